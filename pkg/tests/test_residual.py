import numpy as np
import pytest

from corrsim import base_policy as bp
from corrsim import residual as rs
from corrsim.errors import EmptyDataset
from corrsim.recorder import LabeledSample


@pytest.fixture(scope="module")
def tiny_base():
    demos = bp.collect_demos("slot", 1, seed=0)
    return bp.train_base(demos, seed=0, epochs=20)


def _ctx(rng):
    return dict(
        features=rng.normal(size=6) * 0.1,
        pose_now=np.array([0.2, 0.2, 0.0]),
        pose_prev=np.array([0.2, 0.21, 0.0]),
        proprio_hist=np.tile([0.2, 0.2, 0.0], (rs.PROPRIO_HIST, 1)),
        force_hist=rng.normal(size=(rs.FORCE_HIST, 6)),
        base_next=np.tile([0.2, 0.19, 0.0], (rs.HORIZON, 1)),
    )


def _samples(rng, n=40):
    out = []
    for i in range(n):
        target = np.zeros((rs.HORIZON, 15))
        target[:, 7] = 0.004 * np.sin(i)  # translation y
        target[:, 9] = 3.0 * np.cos(i)    # wrench x
        out.append(LabeledSample(
            obs=rng.normal(size=6) * 0.1,
            proprio_hist=np.tile([0.2, 0.2, 0.0], (5, 1)) + rng.normal(size=(5, 3)) * 0.002,
            force_hist=rng.normal(size=(25, 6)),
            base_next=np.tile([0.2, 0.19, 0.0], (5, 1)),
            executed_now=np.array([0.2, 0.2, 0.0]),
            target=target, weight=1.0, episode_id=f"ep{i}", tick=i,
            in_correction=True,
        ))
    return out


def test_untrained_residual_is_noop(tiny_base):
    res = rs.create_residual("slot", seed=1)
    deltas, wrenches = rs.residual_infer(res, tiny_base, **_ctx(np.random.default_rng(0)))
    assert np.allclose(deltas, 0.0)
    assert np.allclose(wrenches, 0.0)


def test_force_disabled_zeroes_wrench_and_input(tiny_base):
    rng = np.random.default_rng(1)
    samples = _samples(rng)
    res = rs.train_residual(tiny_base, samples, seed=2, force_enabled=False,
                            with_base_action=False, epochs=5)
    ctx = _ctx(rng)
    deltas, wrenches = rs.residual_infer(res, tiny_base, **ctx)
    assert np.allclose(wrenches, 0.0)
    # the force channel is dead: a different wrench history changes nothing
    ctx2 = dict(ctx, force_hist=ctx["force_hist"] + 5.0)
    deltas2, _ = rs.residual_infer(res, tiny_base, **ctx2)
    assert np.array_equal(deltas, deltas2)


def test_force_enabled_reads_wrench_history(tiny_base):
    rng = np.random.default_rng(2)
    res = rs.train_residual(tiny_base, _samples(rng), seed=3, epochs=5,
                            with_base_action=False)
    ctx = _ctx(rng)
    a, _ = rs.residual_infer(res, tiny_base, **ctx)
    b, _ = rs.residual_infer(res, tiny_base,
                             **dict(ctx, force_hist=ctx["force_hist"] + 5.0))
    assert not np.array_equal(a, b)


def test_decode_clips_extremes():
    res = rs.create_residual("slot", seed=4)
    out = np.full(rs.HORIZON * rs.FRAME_DIM, 100.0)
    deltas, wrenches = rs.decode_output(res, out)
    assert np.all(np.abs(deltas[:, :2]) <= rs.MAX_TRANSL + 1e-12)
    assert np.all(np.abs(deltas[:, 2]) <= rs.MAX_YAW + 1e-12)


def test_training_reduces_loss_deterministically(tiny_base):
    rng = np.random.default_rng(3)
    samples = _samples(rng)
    a = rs.train_residual(tiny_base, samples, seed=5, epochs=12, with_base_action=False)
    b = rs.train_residual(tiny_base, samples, seed=5, epochs=12, with_base_action=False)
    assert a.loss_history[-1] < a.loss_history[0]
    assert a.loss_history == b.loss_history


def test_empty_dataset_raises(tiny_base):
    with pytest.raises(EmptyDataset):
        rs.train_residual(tiny_base, [], seed=0)


def test_save_load_roundtrip(tiny_base, tmp_path):
    rng = np.random.default_rng(4)
    res = rs.train_residual(tiny_base, _samples(rng), seed=6, epochs=3)
    path = tmp_path / "res.ckpt"
    res.save(path)
    back = rs.ResidualPolicy.load(path)
    assert back.force_enabled == res.force_enabled
    assert back.with_base_action == res.with_base_action
    ctx = _ctx(rng)
    da, wa = rs.residual_infer(res, tiny_base, **ctx)
    db, wb = rs.residual_infer(back, tiny_base, **ctx)
    assert np.array_equal(da, db)
    assert np.array_equal(wa, wb)


def test_base_action_input_default_by_task():
    assert rs.create_residual("flip", seed=0).with_base_action
    assert not rs.create_residual("slot", seed=0).with_base_action


def test_sample_weights_scale_gradient_emphasis(tiny_base):
    """Heavier weights on a subset must change the trained parameters."""
    rng = np.random.default_rng(5)
    samples = _samples(rng)
    a = rs.train_residual(tiny_base, samples, seed=7, epochs=4, with_base_action=False)
    for s in samples[:10]:
        s.weight = 4.0
    b = rs.train_residual(tiny_base, samples, seed=7, epochs=4, with_base_action=False)
    diffs = [not np.array_equal(va, vb)
             for (_, va), (_, vb) in zip(sorted(a.params().items()),
                                         sorted(b.params().items()))]
    assert any(diffs)
