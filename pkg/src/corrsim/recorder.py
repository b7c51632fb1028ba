"""Recording, serialization, labeling and sample weighting for corrections.

Episodes are recorded at the 50 Hz command tick.  Serialization is
line-delimited with a versioned header; floats are written as C99 hex
literals so round-trips are bit-exact.  The documented schema:

    line 1:  #corrsim-episode v<N>
    line 2:  JSON metadata (task, scenario, seed, mode, flags, outcome, ...)
    line 3:  JSON list of base-tick records [tick, obs[], chunk[[x,y,yaw]*32]]
    line 4+: one step record per line, space-separated hex floats / ints in
             the field order of StepRecord.COLUMNS

Collection modes: Demo, Evaluation, ObserveThenCollect, TakeOver,
OnPolicyDelta.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptRecord, EmptyEpisode, SchemaMismatch

SCHEMA_VERSION = 1
TICK_DT = 0.02
MODES = ("Demo", "Evaluation", "ObserveThenCollect", "TakeOver", "OnPolicyDelta")


@dataclass
class StepRecord:
    t: float
    obs: np.ndarray            # 6 perceived task features
    base_setpoint: np.ndarray  # [x, y, yaw] resampled reference before residual
    commanded: np.ndarray      # [x, y, yaw] reference after residual delta
    executed: np.ndarray       # [x, y, yaw] admittance state
    human_force: np.ndarray    # 6
    measured: np.ndarray       # 6, sensor convention
    correction: bool
    stiffness: np.ndarray      # 6 snapshot
    stage: int
    buffer_cleared: bool

    COLUMNS = (
        "t obs[6] base_setpoint[3] commanded[3] executed[3] "
        "human_force[6] measured[6] correction stiffness[6] stage buffer_cleared"
    )


@dataclass
class Episode:
    task: str
    scenario_id: str
    seed: int
    mode: str
    hold_whole_trajectory: bool
    outcome: str
    stage_reached: int
    schema_version: int = SCHEMA_VERSION
    steps: list = field(default_factory=list)
    base_ticks: list = field(default_factory=list)  # (tick_index, obs array, chunk [32][3])

    def validate(self) -> None:
        if not self.steps:
            raise EmptyEpisode("episode has no steps")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode}")
        for a, b in zip(self.steps, self.steps[1:]):
            if b.t <= a.t:
                raise ValueError("step times must be strictly increasing")


# --- serialization ----------------------------------------------------------

def _hex(values) -> str:
    return " ".join(float(v).hex() for v in np.asarray(values, dtype=float).ravel())


def serialize(ep: Episode) -> bytes:
    ep.validate()
    lines = [f"#corrsim-episode v{ep.schema_version}"]
    meta = {
        "task": ep.task,
        "scenario_id": ep.scenario_id,
        "seed": ep.seed,
        "mode": ep.mode,
        "hold_whole_trajectory": ep.hold_whole_trajectory,
        "outcome": ep.outcome,
        "stage_reached": ep.stage_reached,
    }
    lines.append(json.dumps(meta, sort_keys=True))
    lines.append(json.dumps(
        [[int(i), _hex(obs), _hex(chunk)] for i, obs, chunk in ep.base_ticks]
    ))
    for s in ep.steps:
        parts = [
            float(s.t).hex(), _hex(s.obs), _hex(s.base_setpoint), _hex(s.commanded),
            _hex(s.executed), _hex(s.human_force), _hex(s.measured),
            str(int(s.correction)), _hex(s.stiffness), str(int(s.stage)),
            str(int(s.buffer_cleared)),
        ]
        lines.append(" ".join(parts))
    return ("\n".join(lines) + "\n").encode()


def _floats(tokens: list, n: int, line_no: int) -> np.ndarray:
    if len(tokens) < n:
        raise CorruptRecord(line_no, f"expected {n} more fields, got {len(tokens)}")
    try:
        vals = np.array([float.fromhex(tokens.pop(0)) for _ in range(n)])
    except ValueError as e:
        raise CorruptRecord(line_no, str(e)) from e
    return vals


def deserialize(data: bytes) -> Episode:
    lines = data.decode().splitlines()
    if not lines or not lines[0].startswith("#corrsim-episode v"):
        raise SchemaMismatch("missing episode header")
    try:
        version = int(lines[0].rsplit("v", 1)[1])
    except ValueError as e:
        raise SchemaMismatch(f"bad header: {lines[0]}") from e
    if version != SCHEMA_VERSION:
        raise SchemaMismatch(f"schema version {version}, supported {SCHEMA_VERSION}")
    if len(lines) < 4:
        raise CorruptRecord(len(lines), "truncated episode file")
    try:
        meta = json.loads(lines[1])
        raw_ticks = json.loads(lines[2])
    except json.JSONDecodeError as e:
        raise CorruptRecord(2, str(e)) from e
    base_ticks = []
    for i, obs_hex, chunk_hex in raw_ticks:
        obs = np.array([float.fromhex(t) for t in obs_hex.split()])
        chunk = np.array([float.fromhex(t) for t in chunk_hex.split()]).reshape(-1, 3)
        base_ticks.append((int(i), obs, chunk))
    steps = []
    for line_no, line in enumerate(lines[3:], start=4):
        if not line.strip():
            continue
        tokens = line.split()
        t = _floats(tokens, 1, line_no)[0]
        obs = _floats(tokens, 6, line_no)
        base_sp = _floats(tokens, 3, line_no)
        commanded = _floats(tokens, 3, line_no)
        executed = _floats(tokens, 3, line_no)
        human = _floats(tokens, 6, line_no)
        measured = _floats(tokens, 6, line_no)
        if len(tokens) < 9:
            raise CorruptRecord(line_no, "truncated step record")
        correction = bool(int(tokens.pop(0)))
        stiffness = _floats(tokens, 6, line_no)
        stage = int(tokens.pop(0))
        cleared = bool(int(tokens.pop(0)))
        steps.append(StepRecord(
            t=float(t), obs=obs, base_setpoint=base_sp, commanded=commanded,
            executed=executed, human_force=human, measured=measured,
            correction=correction, stiffness=stiffness, stage=stage,
            buffer_cleared=cleared,
        ))
    ep = Episode(
        task=meta["task"], scenario_id=meta["scenario_id"], seed=meta["seed"],
        mode=meta["mode"], hold_whole_trajectory=meta["hold_whole_trajectory"],
        outcome=meta["outcome"], stage_reached=meta["stage_reached"],
        schema_version=version, steps=steps, base_ticks=base_ticks,
    )
    ep.validate()
    return ep


def save_episode(path, ep: Episode) -> None:
    with open(path, "wb") as f:
        f.write(serialize(ep))


def load_episode(path) -> Episode:
    with open(path, "rb") as f:
        return deserialize(f.read())


# --- labeling ----------------------------------------------------------------

RESIDUAL_HORIZON = 5


@dataclass
class LabeledSample:
    """One 50 Hz tick turned into a residual training sample."""

    obs: np.ndarray          # 6 task features at the tick
    proprio_hist: np.ndarray  # [H_r, 3] executed poses, oldest first
    force_hist: np.ndarray    # [K_f, 6] measured wrenches, oldest first
    base_next: np.ndarray     # [5, 3] base setpoints at t..t+4 ticks
    executed_now: np.ndarray  # [3]
    target: np.ndarray        # [5, 9+6] delta (rot6d offset + transl) + wrench
    weight: float
    episode_id: str
    tick: int
    in_correction: bool


def _yaw_delta_to_rot6d_offset(dyaw: float) -> np.ndarray:
    # rot6d(R_yaw) - rot6d(identity); planar deltas only involve yaw
    c, s = np.cos(dyaw), np.sin(dyaw)
    return np.array([c - 1.0, s, 0.0, -s, c - 1.0, 0.0])


def label_episode(ep: Episode, history_len: int = 5, force_len: int = 25,
                  episode_id: str | None = None) -> list:
    """Turn an episode into residual training samples.

    Delta targets for each of the next 5 frames are pose_delta(base setpoint,
    executed) when the frame is in-correction or the episode holds the whole
    trajectory as correction, zero otherwise.  Wrench targets are the
    measured wrench at the frame.  Ticks within 5 frames of the end are
    dropped.
    """
    ep.validate()
    if ep.mode not in ("TakeOver", "OnPolicyDelta", "ObserveThenCollect"):
        raise ValueError(f"labeling requires a correction mode, got {ep.mode}")
    eid = episode_id or f"{ep.task}/{ep.scenario_id}/{ep.seed}/{ep.mode}"
    steps = ep.steps
    n = len(steps)
    samples = []
    for i in range(n - RESIDUAL_HORIZON):
        s = steps[i]
        # histories end one tick back: at decision time for tick i only
        # measurements through the end of tick i-1 exist
        hist_idx = [max(0, i - 1 - k) for k in range(history_len - 1, -1, -1)]
        proprio = np.stack([steps[j].executed for j in hist_idx])
        f_idx = [max(0, i - 1 - k) for k in range(force_len - 1, -1, -1)]
        force = np.stack([steps[j].measured for j in f_idx])
        base_next = np.stack([steps[i + j].base_setpoint for j in range(RESIDUAL_HORIZON)])
        target = np.zeros((RESIDUAL_HORIZON, 15))
        for j in range(RESIDUAL_HORIZON):
            fut = steps[i + j]
            in_corr = fut.correction or ep.hold_whole_trajectory
            if in_corr:
                d = fut.executed - fut.base_setpoint
                target[j, :6] = _yaw_delta_to_rot6d_offset(d[2])
                target[j, 6:9] = np.array([d[0], d[1], 0.0])
            target[j, 9:15] = fut.measured
        samples.append(LabeledSample(
            obs=s.obs, proprio_hist=proprio, force_hist=force, base_next=base_next,
            executed_now=steps[max(i - 1, 0)].executed, target=target, weight=1.0,
            episode_id=eid, tick=i,
            in_correction=s.correction or ep.hold_whole_trajectory,
        ))
    return samples


# --- sampling strategies ------------------------------------------------------

@dataclass
class SamplingStrategy:
    kind: str = "Uniform"   # Uniform | DenseAroundStart | DenseAfterStart
    window: float = 1.0     # seconds
    factor: float = 4.0


def correction_starts(ep: Episode) -> list:
    """Tick indices where a correction begins."""
    starts = []
    prev = False
    for i, s in enumerate(ep.steps):
        if s.correction and not prev:
            starts.append(i)
        prev = s.correction
    return starts


def assign_weights(samples: list, ep: Episode, strategy: SamplingStrategy) -> list:
    """Set sample weights per the sampling strategy (in place, also returned)."""
    if strategy.kind == "Uniform":
        for s in samples:
            s.weight = 1.0
        return samples
    w_ticks = int(round(strategy.window / TICK_DT))
    starts = correction_starts(ep)
    for s in samples:
        s.weight = 1.0
        for st in starts:
            if strategy.kind == "DenseAfterStart":
                hit = st <= s.tick < st + w_ticks
            elif strategy.kind == "DenseAroundStart":
                hit = st - w_ticks <= s.tick < st + w_ticks
            else:
                raise ValueError(f"unknown sampling strategy {strategy.kind}")
            if hit:
                s.weight = strategy.factor
                break
    return samples


# --- dataset summary ------------------------------------------------------------

def dataset_stats(episodes: list) -> dict:
    """Counts per mode, correction ratio, hold-trajectory count, provenance."""
    by_mode = {}
    corr_ticks = 0
    total_ticks = 0
    hold = 0
    collected_against = {}
    for ep in episodes:
        by_mode[ep.mode] = by_mode.get(ep.mode, 0) + 1
        if ep.hold_whole_trajectory:
            hold += 1
        for s in ep.steps:
            total_ticks += 1
            corr_ticks += int(s.correction)
        tag = getattr(ep, "collected_against", "base")
        collected_against[tag] = collected_against.get(tag, 0) + 1
    return {
        "episodes_per_mode": by_mode,
        "correction_ratio": corr_ticks / total_ticks if total_ticks else 0.0,
        "hold_whole_trajectory_count": hold,
        "total_ticks": total_ticks,
        "collected_against": collected_against,
    }
