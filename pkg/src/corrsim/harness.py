"""Closed-loop episode runner.

Timing hierarchy per episode:

* 1 Hz   -- the policy pushes a 32-pose chunk (0.1 s spacing) into the
            command buffer
* 50 Hz  -- the intervener and residual act; one step record per tick
* 500 Hz -- the admittance controller and the contact plant substep

The external wrench fed to the controller is the contact wrench acting on
the tool (minus the sensor reading) plus any corrective force.  A residual,
when present, adds its first predicted frame to the buffer-resampled base
reference and converts its predicted sensor-convention wrench into the
controller's on-tool target.  When the buffer is empty (after a takeover
cleared it) the last resampled reference is held.

The loop is packaged as EpisodeSession so the batch runner and the live
service share one implementation: the session advances one 50 Hz tick per
call, taking the corrective action either from a scripted intervener or
from an explicit Action (live client input).
"""

from __future__ import annotations

import numpy as np

from . import world as wd
from .admittance import (AdmittanceParams, AdmittanceState, CommandBuffer,
                         clear_buffer, set_stiffness, step_axes)
from .base_policy import EPISODE_LEN, build_base_obs
from .errors import EmptyBuffer
from .intervener import Action
from .recorder import TICK_DT, Episode, StepRecord
from .residual import FORCE_HIST, PROPRIO_HIST, residual_infer
from .rng import stream
from .se3 import wrap_angle

SUBSTEPS = int(round(TICK_DT / wd.SUBSTEP_DT))
BASE_TICKS = int(round(1.0 / TICK_DT))
CORRECTION_GRACE = 6.0  # s past nominal length while a correction is active


class EpisodeSession:
    """One running episode, advanced a tick at a time."""

    def __init__(self, task: str, scenario_id: str, seed: int, policy, mode: str,
                 obs_noise: float = 0.0, residual=None, shadow_base=None,
                 hold_whole_trajectory: bool = False):
        self.task = task
        self.scenario_id = scenario_id
        self.seed = seed
        self.policy = policy
        self.mode = mode
        self.residual = residual
        self.shadow_base = shadow_base
        self.hold_whole_trajectory = hold_whole_trajectory
        self.w = wd.reset(task, scenario_id, seed, obs_noise)
        self.ep_len = EPISODE_LEN[task]
        self.params = AdmittanceParams.default()
        self.default_k = self.params.stiffness.copy()
        x0, y0, yaw0 = wd.start_pose(task)
        self.state = AdmittanceState.at(x0, y0, yaw0)
        self.buf = CommandBuffer()
        self.shadow_buf = CommandBuffer() if shadow_base is not None else None
        start = np.array([x0, y0, yaw0])
        self.start = start
        self.last_ref = start.copy()
        self.last_shadow_ref = start.copy()
        # policies read poses through a fixed per-episode calibration offset;
        # the controller and plant always use the true pose
        self.pose_grid = [start + self.w.proprio_offset]
        self.wrench_grid = []
        self.measured = np.zeros(6)
        self.rng = stream(seed, "episode", task, scenario_id)
        self.steps = []
        self.base_ticks = []
        self.max_stage = 0
        self.tick_index = 0
        self._zero_w = [np.zeros(6)] * 32

    @property
    def t(self) -> float:
        return self.tick_index * TICK_DT

    def true_pose(self) -> np.ndarray:
        c = self.state.coords
        return np.array([c[0], c[1], c[5]])

    def features(self) -> np.ndarray:
        return wd.obs_features(self.w, self.ep_len)

    def tick(self, intervener=None, action: Action | None = None) -> StepRecord:
        """Advance one 50 Hz tick; corrective input comes from the scripted
        intervener (queried mid-tick) or from an explicit Action."""
        t = self.t
        feats = self.features()
        pose_now = self.pose_grid[-1]
        pose_prev = self.pose_grid[max(len(self.pose_grid) - 1 - BASE_TICKS // 10, 0)]

        taking_over = (intervener is not None and intervener.style == "TakeOver"
                       and intervener.engaged)
        if action is not None and action.stiffness == "zero":
            taking_over = True
        if self.tick_index % BASE_TICKS == 0 and not taking_over \
                and not self._held_by_action(action):
            if self.tick_index == 0 and hasattr(self.policy, "begin_episode"):
                self.policy.begin_episode(feats, self.rng)
            if self.tick_index == 0 and self.shadow_base is not None \
                    and hasattr(self.shadow_base, "begin_episode"):
                self.shadow_base.begin_episode(feats, self.rng)
            times, poses = self.policy.chunk(feats, pose_now, pose_prev, t)
            self.buf.push_chunk(times, poses, self._zero_w[: len(times)])
            self.base_ticks.append((self.tick_index // BASE_TICKS,
                                    build_base_obs(feats, pose_now, pose_prev),
                                    np.stack(poses)))
            if self.shadow_buf is not None:
                s_times, s_poses = self.shadow_base.chunk(feats, pose_now, pose_prev, t)
                self.shadow_buf.push_chunk(s_times, s_poses, self._zero_w[: len(s_times)])

        if intervener is not None:
            action = intervener.update(self.w, t, self.true_pose(),
                                       self.state.velocity, self.measured)
        elif action is None:
            action = Action.idle()
        human = action.human_force
        correction = action.correction
        cleared = False
        if action.clear_buffer:
            clear_buffer(self.buf)
            cleared = True
        if action.stiffness == "zero":
            set_stiffness(self.params, 0.0)
        elif action.stiffness == "restore":
            self.params.stiffness = self.default_k.copy()

        delta0 = np.zeros(3)
        f_target = np.zeros(6)
        if self.residual is not None:
            proprio = _tail(self.pose_grid, PROPRIO_HIST, self.start)
            forces = _tail(self.wrench_grid, FORCE_HIST, np.zeros(6))
            base_next = np.stack([
                _resample_or_hold(self.buf, t + j * TICK_DT, self.last_ref)
                for j in range(5)
            ])
            deltas, wrenches = residual_infer(
                self.residual, self.policy, feats, pose_now, proprio[0],
                proprio, forces, base_next)
            delta0 = deltas[0]
            f_target[:2] = -wrenches[0][:2]  # sensor convention -> on-tool target

        ref_tick = _resample_or_hold(self.buf, t, self.last_ref)
        ref = self.last_ref
        for k in range(SUBSTEPS):
            ts = t + k * wd.SUBSTEP_DT
            try:
                ref, _ = self.buf.resample(ts)
                self.last_ref = ref
            except EmptyBuffer:
                ref = self.last_ref
            cmd = ref + delta0
            cmd6 = np.zeros(6)
            cmd6[0], cmd6[1], cmd6[5] = cmd[0], cmd[1], wrap_angle(cmd[2])
            f_ext = -self.measured + human
            step_axes(self.state, self.params, cmd6, f_target, f_ext, wd.SUBSTEP_DT)
            self.measured = wd.step(self.w, self.state.pose, self.state.velocity,
                                    wd.SUBSTEP_DT).as_array()
        self.last_ref = ref

        if self.shadow_buf is not None:
            base_sp = _resample_or_hold(self.shadow_buf, t, self.last_shadow_ref)
            self.last_shadow_ref = base_sp
        else:
            base_sp = ref_tick
        executed = self.true_pose() + self.w.proprio_offset
        self.pose_grid.append(executed)
        self.wrench_grid.append(self.measured.copy())
        st = wd.stage_status(self.w)
        self.max_stage = max(self.max_stage, st.stage)
        rec = StepRecord(
            t=t, obs=feats, base_setpoint=base_sp,
            commanded=ref_tick + delta0, executed=executed,
            human_force=human.copy(), measured=self.measured.copy(),
            correction=correction, stiffness=self.params.stiffness.copy(),
            stage=st.stage, buffer_cleared=cleared,
        )
        self.steps.append(rec)
        self.tick_index += 1
        return rec

    @staticmethod
    def _held_by_action(action: Action | None) -> bool:
        # a live client holding the flag in takeover mode suppresses chunks
        return action is not None and action.clear_buffer

    def finished(self, correction_active: bool = False) -> bool:
        if wd.terminal_success(self.w):
            return True
        limit = self.ep_len + (CORRECTION_GRACE if correction_active else 0.0)
        return self.t >= min(limit, wd.TIMEOUT_S)

    def episode(self) -> Episode:
        outcome = wd.outcome_label(self.w, timed_out=self.w.time >= wd.TIMEOUT_S)
        st = wd.stage_status(self.w)
        return Episode(
            task=self.task, scenario_id=self.scenario_id, seed=self.seed,
            mode=self.mode, hold_whole_trajectory=self.hold_whole_trajectory,
            outcome=outcome, stage_reached=max(self.max_stage, st.stage),
            steps=self.steps, base_ticks=self.base_ticks,
        )


def run_episode(task: str, scenario_id: str, seed: int, policy, mode: str,
                obs_noise: float = 0.0, residual=None, intervener=None,
                shadow_base=None, hold_whole_trajectory: bool = False) -> Episode:
    """Run one episode to completion and return its recording.

    `policy` emits the executed chunks.  `residual` (with `policy` as its
    base) adds 50 Hz deltas and force targets.  `intervener` applies
    corrective force with true-state access.  `shadow_base`, if given, is
    queried alongside the executed policy and its reference is recorded as
    the base setpoint (counterfactual labeling for observe-then-collect).
    """
    session = EpisodeSession(task, scenario_id, seed, policy, mode,
                             obs_noise=obs_noise, residual=residual,
                             shadow_base=shadow_base,
                             hold_whole_trajectory=hold_whole_trajectory)
    while True:
        session.tick(intervener=intervener)
        engaged = intervener is not None and intervener.engaged
        if session.finished(correction_active=engaged):
            break
    return session.episode()


def _tail(grid: list, n: int, pad: np.ndarray) -> np.ndarray:
    """Last n entries, front-padded with the earliest (or `pad` if empty)."""
    if not grid:
        return np.stack([pad] * n)
    items = grid[-n:]
    while len(items) < n:
        items = [items[0]] + items
    return np.stack(items)


def _resample_or_hold(buf: CommandBuffer, t: float, fallback: np.ndarray) -> np.ndarray:
    try:
        ref, _ = buf.resample(t)
        return ref
    except EmptyBuffer:
        return fallback
