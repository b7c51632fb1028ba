"""Correction collection and the four policy update methods.

Collection runs the base policy (or the latest base+residual stack) on the
collection scenario set with a scripted corrector attached, or re-runs the
demonstrator while shadowing the base policy for observe-then-collect
labeling.  Updates consume the collected episodes four ways:

* Retrain          -- behavior cloning from scratch on the original demos
                      plus the corrected trajectories
* Finetune         -- continue the base head on corrections only, feature
                      layer frozen
* ResidualNoForce  -- residual with the force channel disabled
* CompliantResidual -- full residual with force input and force output
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import harness
from .base_policy import (BASE_PERIOD, CHUNK_LEN, POSE_SCALE, BasePolicy,
                          ScriptedPolicy, bc_pairs, fit_base)
from .errors import DemoFailed, MissingInitialData
from .intervener import Intervener
from .recorder import SamplingStrategy, assign_weights, label_episode
from .residual import ResidualPolicy, train_residual
from .rng import stream
from .scenarios import scenario_ids

UPDATE_METHODS = ("Retrain", "Finetune", "ResidualNoForce", "CompliantResidual")
COLLECTION_MODES = ("ObserveThenCollect", "TakeOver", "OnPolicyDelta")
FINETUNE_EPOCHS = 2000
FINETUNE_LR = 3e-4
# flip's correction data is harder to fit (force-conditional pullback on top
# of a fast press ramp) and keeps improving well past slot's plateau
RESIDUAL_EPOCHS = {"flip": 120, "slot": 60}
DEMO_NOISE = 0.0015


@dataclass
class PolicyStack:
    """What evaluation runs: a base policy plus an optional residual."""

    method: str
    base: BasePolicy
    residual: ResidualPolicy | None = None


def collect_corrections(task: str, base: BasePolicy, mode: str, count: int,
                        seed: int, residual: ResidualPolicy | None = None) -> list:
    """Collect `count` correction episodes on the collection scenario set.

    TakeOver and OnPolicyDelta run the current stack with the scripted
    corrector attached.  ObserveThenCollect re-runs the demonstrator on the
    same scenarios while the base policy is queried in shadow, producing
    hold-whole-trajectory episodes labeled against the base's plan.
    """
    if mode not in COLLECTION_MODES:
        raise ValueError(f"unknown collection mode {mode}")
    ids = scenario_ids(task, "collect")
    rng = stream(seed, "collect", task, mode)
    episodes = []
    for i in range(count):
        sid = ids[i % len(ids)]
        ep_seed = int(rng.integers(1 << 31))
        if mode == "ObserveThenCollect":
            ep = _observe_then_collect(task, sid, ep_seed, base)
        else:
            ep = harness.run_episode(
                task=task, scenario_id=sid, seed=ep_seed, policy=base,
                mode=mode, residual=residual,
                intervener=Intervener(style=mode))
        ep.collected_against = "stack" if residual is not None else "base"
        episodes.append(ep)
    return episodes


def _observe_then_collect(task: str, scenario_id: str, seed: int,
                          base: BasePolicy, max_retries: int = 20):
    for attempt in range(max_retries):
        ep = harness.run_episode(
            task=task, scenario_id=scenario_id, seed=seed + 1000 * attempt,
            policy=ScriptedPolicy(task=task, noise=DEMO_NOISE),
            mode="ObserveThenCollect", obs_noise=DEMO_NOISE * 2.0 / 3.0,
            shadow_base=base, hold_whole_trajectory=True)
        if ep.outcome == "success":
            return ep
    raise DemoFailed(f"{task}/{scenario_id}: no successful collection "
                     f"in {max_retries} attempts")


def executed_pairs(episodes: list) -> tuple:
    """BC pairs whose targets are the executed (corrected) trajectory.

    For every stored base tick, the target chunk is the pose the robot
    actually reached 0.1 s-gridded over the following 3.2 s, clamped at the
    episode end.  This is the corrections-to-BC conversion used by Retrain
    and Finetune.
    """
    xs, ys = [], []
    ticks_per_frame = int(round(BASE_PERIOD / 0.02 / 10))
    for ep in episodes:
        last = len(ep.steps) - 1
        for tick_idx, obs, _chunk in ep.base_ticks:
            t0 = min(tick_idx * ticks_per_frame * 10, last)
            now = ep.steps[t0].executed
            chunk = np.stack([
                ep.steps[min(t0 + j * ticks_per_frame, last)].executed
                for j in range(CHUNK_LEN)
            ])
            xs.append(obs)
            ys.append(((chunk - now) * POSE_SCALE).ravel())
    return np.stack(xs), np.stack(ys)


def labeled_dataset(episodes: list, strategy: SamplingStrategy | None = None) -> list:
    """Label and weight every correction episode into residual samples."""
    strategy = strategy or SamplingStrategy()
    samples = []
    for i, ep in enumerate(episodes):
        eps_samples = label_episode(ep, episode_id=f"ep{i}/{ep.scenario_id}/{ep.seed}")
        assign_weights(eps_samples, ep, strategy)
        samples.extend(eps_samples)
    return samples


def update_policy(method: str, base: BasePolicy, init_demos: list,
                  corrections: list, seed: int,
                  strategy: SamplingStrategy | None = None,
                  residual_epochs: int | None = None,
                  prior: ResidualPolicy | None = None) -> PolicyStack:
    """Produce an updated policy stack from correction data."""
    if method not in UPDATE_METHODS:
        raise ValueError(f"unknown update method {method}")
    if method == "Retrain":
        if not init_demos:
            raise MissingInitialData("Retrain requires the demonstration set")
        xd, yd = bc_pairs(init_demos)
        xc, yc = executed_pairs(corrections)
        new_base = fit_base(base.task, np.concatenate([xd, xc]),
                            np.concatenate([yd, yc]), seed)
        return PolicyStack(method=method, base=new_base)
    if method == "Finetune":
        xc, yc = executed_pairs(corrections)
        new_base = fit_base(base.task, xc, yc, seed, epochs=FINETUNE_EPOCHS,
                            lr=FINETUNE_LR, net=base.net, freeze_first=True)
        return PolicyStack(method=method, base=new_base)
    samples = labeled_dataset(corrections, strategy)
    if residual_epochs is None:
        residual_epochs = RESIDUAL_EPOCHS[base.task]
    residual = train_residual(
        base, samples, seed, force_enabled=(method == "CompliantResidual"),
        epochs=residual_epochs, policy=prior)
    return PolicyStack(method=method, base=base, residual=residual)


def run_stack(stack: PolicyStack, task: str, scenario_id: str, seed: int,
              mode: str = "Evaluation"):
    """Evaluate a policy stack on one episode, no corrector attached."""
    return harness.run_episode(task=task, scenario_id=scenario_id, seed=seed,
                               policy=stack.base, mode=mode,
                               residual=stack.residual)
