"""Versioned checkpoint files: named float tensors plus JSON metadata.

Tensor values are stored as C99 hex float literals so save/load round-trips
are bit-exact across platforms.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import SchemaMismatch

SCHEMA_VERSION = 1
MAGIC = "corrsim-checkpoint"


def save_tensors(path, tensors: dict, meta: dict | None = None) -> None:
    doc = {
        "magic": MAGIC,
        "version": SCHEMA_VERSION,
        "meta": meta or {},
        "tensors": {
            name: {
                "shape": list(np.asarray(t).shape),
                "data": [float(v).hex() for v in np.asarray(t, dtype=float).ravel()],
            }
            for name, t in tensors.items()
        },
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load_tensors(path) -> tuple[dict, dict]:
    """Return (tensors, meta)."""
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaMismatch(f"not a checkpoint file: {e}") from e
    if doc.get("magic") != MAGIC:
        raise SchemaMismatch("missing checkpoint magic")
    if doc.get("version") != SCHEMA_VERSION:
        raise SchemaMismatch(
            f"checkpoint version {doc.get('version')}, supported {SCHEMA_VERSION}")
    tensors = {}
    for name, entry in doc["tensors"].items():
        flat = np.array([float.fromhex(v) for v in entry["data"]])
        tensors[name] = flat.reshape(entry["shape"])
    return tensors, doc.get("meta", {})
