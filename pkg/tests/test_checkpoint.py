import json

import numpy as np
import pytest

from corrsim import checkpoint
from corrsim.errors import SchemaMismatch


def test_roundtrip_bit_exact(tmp_path):
    tensors = {
        "w": np.random.default_rng(0).normal(size=(7, 3)),
        "b": np.array([1e-300, -0.0, np.pi]),
    }
    path = tmp_path / "net.ckpt"
    checkpoint.save_tensors(path, tensors, meta={"kind": "test", "n": 3})
    back, meta = checkpoint.load_tensors(path)
    assert meta == {"kind": "test", "n": 3}
    for name, t in tensors.items():
        assert back[name].shape == t.shape
        assert np.array_equal(back[name], t)


def test_empty_meta_defaults(tmp_path):
    path = tmp_path / "net.ckpt"
    checkpoint.save_tensors(path, {"x": np.zeros(2)})
    _, meta = checkpoint.load_tensors(path)
    assert meta == {}


def test_rejects_non_json(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_text("not json at all {")
    with pytest.raises(SchemaMismatch):
        checkpoint.load_tensors(path)


def test_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_text(json.dumps({"magic": "other", "version": 1, "tensors": {}}))
    with pytest.raises(SchemaMismatch):
        checkpoint.load_tensors(path)


def test_rejects_future_version(tmp_path):
    path = tmp_path / "bad.ckpt"
    checkpoint.save_tensors(path, {"x": np.zeros(1)})
    doc = json.loads(path.read_text())
    doc["version"] = checkpoint.SCHEMA_VERSION + 1
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaMismatch):
        checkpoint.load_tensors(path)
