import numpy as np
import pytest

from corrsim import world as wd
from corrsim.base_policy import ScriptedPolicy
from corrsim.harness import BASE_TICKS, EpisodeSession, run_episode
from corrsim.intervener import Action, Intervener
from corrsim.recorder import TICK_DT


def _scripted(task):
    return ScriptedPolicy(task)


def test_run_episode_deterministic():
    a = run_episode("flip", "flip-demo-0", 3, _scripted("flip"), "Demo")
    b = run_episode("flip", "flip-demo-0", 3, _scripted("flip"), "Demo")
    assert a.outcome == b.outcome
    assert len(a.steps) == len(b.steps)
    for s, t in zip(a.steps, b.steps):
        assert np.array_equal(s.executed, t.executed)
        assert np.array_equal(s.measured, t.measured)


def test_tick_timing_grid():
    ep = run_episode("flip", "flip-demo-0", 0, _scripted("flip"), "Demo")
    for i, s in enumerate(ep.steps):
        assert s.t == pytest.approx(i * TICK_DT)
    # one chunk per second of episode
    ticks = [i for i, _, _ in ep.base_ticks]
    assert ticks == list(range(len(ticks)))
    assert len(ep.steps) >= (len(ticks) - 1) * BASE_TICKS


def test_chunk_shape():
    ep = run_episode("slot", "slot-demo-0", 0, _scripted("slot"), "Demo")
    for _, obs, chunk in ep.base_ticks:
        assert chunk.shape == (32, 3)
        assert obs.shape == (12,)


def test_scripted_demo_succeeds_both_tasks():
    for task, sid in (("flip", "flip-demo-0"), ("slot", "slot-demo-0")):
        ep = run_episode(task, sid, 1, _scripted(task), "Demo")
        assert ep.outcome == "success"
        assert ep.stage_reached == 3


def test_stage_sequence_monotone():
    ep = run_episode("slot", "slot-demo-1", 2, _scripted("slot"), "Demo")
    stages = [s.stage for s in ep.steps]
    assert all(b >= a for a, b in zip(stages, stages[1:]))


def test_proprio_offset_in_executed_records():
    """Recorded poses are the policy view: true pose plus calibration offset."""
    task, sid, seed = "slot", "slot-demo-0", 4
    session = EpisodeSession(task, sid, seed, _scripted(task), "Demo")
    off = session.w.proprio_offset
    assert np.any(off[:2] != 0.0)
    rec = session.tick()
    assert np.allclose(rec.executed, session.true_pose() + off)


def test_takeover_suppresses_chunks_and_clears_buffer():
    task, sid = "slot", "slot-col-0"
    session = EpisodeSession(task, sid, 9, _scripted(task), "TakeOver")
    session.tick()  # first chunk pushed
    assert session.buf.setpoints
    act = Action(np.zeros(6), correction=True, clear_buffer=True, stiffness="zero")
    rec = session.tick(action=act)
    assert rec.buffer_cleared
    assert not session.buf.setpoints
    assert np.allclose(rec.stiffness, 0.0)
    # held reference: the tool coasts against the last resampled setpoint
    rec2 = session.tick(action=act)
    assert not session.buf.setpoints
    restore = Action(np.zeros(6), stiffness="restore")
    rec3 = session.tick(action=restore)
    assert rec3.stiffness[0] == 1000.0


def test_human_force_recorded():
    session = EpisodeSession("flip", "flip-col-0", 0, _scripted("flip"), "OnPolicyDelta")
    f = np.zeros(6)
    f[1] = 7.5
    rec = session.tick(action=Action(f, correction=True))
    assert rec.human_force[1] == 7.5
    assert rec.correction


def test_correction_grace_extends_episode():
    class AlwaysOn(Intervener):
        def update(self, w, t, pose, velocity, measured):
            self.engaged = True
            return Action(np.zeros(6), correction=True)

    short = run_episode("flip", "flip-ev-3", 100, _scripted("flip"), "Evaluation")
    long = run_episode("flip", "flip-ev-3", 100, _scripted("flip"), "OnPolicyDelta",
                       intervener=AlwaysOn(style="OnPolicyDelta"))
    if long.outcome != "success":
        assert len(long.steps) > len(short.steps)


def test_shadow_base_setpoints_differ_from_executed():
    """With a shadow policy the base setpoint records its counterfactual."""
    from corrsim.base_policy import demo_waypoints

    class Shifted(ScriptedPolicy):
        def begin_episode(self, features, rng):
            wps = demo_waypoints(self.task, features)
            self._waypoints = [(t, x, y + 0.01) for t, x, y in wps]

    ep = run_episode("slot", "slot-demo-0", 5, _scripted("slot"), "ObserveThenCollect",
                     shadow_base=Shifted("slot"), hold_whole_trajectory=True)
    diffs = [abs(s.base_setpoint[1] - s.executed[1]) for s in ep.steps[50:150]]
    assert np.mean(diffs) > 0.004


def test_residual_none_equals_no_residual_flag():
    ep1 = run_episode("flip", "flip-ev-0", 100, _scripted("flip"), "Evaluation")
    ep2 = run_episode("flip", "flip-ev-0", 100, _scripted("flip"), "Evaluation",
                      residual=None)
    assert np.array_equal(ep1.steps[-1].executed, ep2.steps[-1].executed)
