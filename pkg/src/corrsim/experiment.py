"""Experiment grid orchestration: demo generation through evaluation.

One experiment cell = (task, collection mode, update method, batch
schedule, sampling strategy) run over a set of seeds.  Each seed generates
demos, clones the base, collects the correction budget, updates the policy
and evaluates base and updated stacks on the held-out suite.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

from . import dagger, evaluation
from .base_policy import collect_demos, train_base
from .recorder import SamplingStrategy, dataset_stats
from .rng import stream

BATCH_SCHEDULES = ("SingleBatch", "SmallBatch")
SMALL_BATCH_WARMUP = 20
SMALL_BATCH_INCREMENT = 10
SMALL_BATCH_ROUNDS = 3


@dataclass
class ExperimentConfig:
    task: str
    method: str = "CompliantResidual"
    mode: str = "OnPolicyDelta"
    batch: str = "SingleBatch"
    sampling: str = "DenseAfterStart"
    sampling_window: float = 1.0
    sampling_factor: float = 4.0
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    episode_budget: int = 50
    demo_count: int = 150
    eval_suite: str = "eval"

    def validate(self) -> None:
        if self.task not in ("flip", "slot"):
            raise ValueError(f"unknown task {self.task}")
        if self.method not in dagger.UPDATE_METHODS:
            raise ValueError(f"unknown update method {self.method}")
        if self.mode not in dagger.COLLECTION_MODES:
            raise ValueError(f"unknown collection mode {self.mode}")
        if self.batch not in BATCH_SCHEDULES:
            raise ValueError(f"unknown batch schedule {self.batch}")
        if self.episode_budget <= 0 or self.demo_count <= 0:
            raise ValueError("budgets must be positive")
        if self.batch == "SmallBatch" and self.episode_budget != (
                SMALL_BATCH_WARMUP + SMALL_BATCH_INCREMENT * SMALL_BATCH_ROUNDS):
            raise ValueError("SmallBatch schedule must total the episode budget")

    def strategy(self) -> SamplingStrategy:
        return SamplingStrategy(kind=self.sampling, window=self.sampling_window,
                                factor=self.sampling_factor)


@dataclass
class SeedResult:
    seed: int
    base_result: evaluation.StageWiseResult
    final_result: evaluation.StageWiseResult
    dataset: dict
    base_loss: float
    update_loss: float


@dataclass
class RunReport:
    config: dict
    seeds: list                    # SeedResult per experiment seed
    wall_clock_s: float

    @property
    def base_success(self) -> float:
        return sum(r.base_result.success_rate for r in self.seeds) / len(self.seeds)

    @property
    def final_success(self) -> float:
        return sum(r.final_result.success_rate for r in self.seeds) / len(self.seeds)

    def stage_fractions(self, which: str = "final") -> list:
        rows = [getattr(r, f"{which}_result").stage_fractions() for r in self.seeds]
        return [sum(col) / len(rows) for col in zip(*rows)]

    def failure_histogram(self, which: str = "final") -> dict:
        out = {}
        for r in self.seeds:
            for label, n in getattr(r, f"{which}_result").failures.items():
                out[label] = out.get(label, 0) + n
        return out


class BaseCache:
    """Demo sets and trained bases are reusable across cells of one grid."""

    def __init__(self):
        self._store = {}

    def get(self, task: str, seed: int, demo_count: int):
        key = (task, seed, demo_count)
        if key not in self._store:
            demo_seed = int(stream(seed, "experiment-demos", task).integers(1 << 31))
            demos = collect_demos(task, demo_count, seed=demo_seed)
            base = train_base(demos, seed=seed)
            self._store[key] = (demos, base)
        return self._store[key]


def run_seed(cfg: ExperimentConfig, seed: int, cache: BaseCache | None = None) -> SeedResult:
    cache = cache or BaseCache()
    demos, base = cache.get(cfg.task, seed, cfg.demo_count)
    collect_seed = int(stream(seed, "experiment-collect", cfg.task, cfg.mode).integers(1 << 31))
    strategy = cfg.strategy()

    if cfg.batch == "SingleBatch":
        corrections = dagger.collect_corrections(
            cfg.task, base, cfg.mode, cfg.episode_budget, seed=collect_seed)
        stack = dagger.update_policy(cfg.method, base, demos, corrections,
                                     seed=seed, strategy=strategy)
    else:
        corrections = dagger.collect_corrections(
            cfg.task, base, cfg.mode, SMALL_BATCH_WARMUP, seed=collect_seed)
        stack = dagger.update_policy(cfg.method, base, demos, corrections,
                                     seed=seed, strategy=strategy)
        for rnd in range(SMALL_BATCH_ROUNDS):
            inc = dagger.collect_corrections(
                cfg.task, stack.base, cfg.mode, SMALL_BATCH_INCREMENT,
                seed=collect_seed + 1 + rnd, residual=stack.residual)
            corrections = corrections + inc
            # incremental rounds continue training the running residual on
            # the accumulated set instead of restarting from scratch
            epochs = None
            if stack.residual is not None:
                epochs = dagger.RESIDUAL_EPOCHS[cfg.task] // 2
            stack = dagger.update_policy(cfg.method, base, demos, corrections,
                                         seed=seed, strategy=strategy,
                                         prior=stack.residual,
                                         residual_epochs=epochs)

    base_res = evaluation.evaluate(dagger.PolicyStack("base", base), cfg.task,
                                   suite=cfg.eval_suite)
    final_res = evaluation.evaluate(stack, cfg.task, suite=cfg.eval_suite)
    update_loss = 0.0
    if stack.residual is not None and stack.residual.loss_history:
        update_loss = float(stack.residual.loss_history[-1])
    elif stack.base is not base and stack.base.loss_history:
        update_loss = float(stack.base.loss_history[-1])
    return SeedResult(seed=seed, base_result=base_res, final_result=final_res,
                      dataset=dataset_stats(corrections),
                      base_loss=float(base.loss_history[-1]),
                      update_loss=update_loss)


def run_experiment(cfg: ExperimentConfig, cache: BaseCache | None = None) -> RunReport:
    cfg.validate()
    cache = cache or BaseCache()
    t0 = time.time()
    results = [run_seed(cfg, s, cache) for s in cfg.seeds]
    return RunReport(config=asdict(cfg), seeds=results,
                     wall_clock_s=time.time() - t0)


def ablate_batch(cfg: ExperimentConfig, cache: BaseCache | None = None) -> dict:
    """Same cell under both batch schedules; budgets are identical."""
    cache = cache or BaseCache()
    out = {}
    for batch in BATCH_SCHEDULES:
        c = ExperimentConfig(**{**asdict(cfg), "batch": batch})
        out[batch] = run_experiment(c, cache)
    return out


def ablate_sampling(cfg: ExperimentConfig, cache: BaseCache | None = None) -> dict:
    """Three sampling strategies on a shared correction dataset per seed."""
    cache = cache or BaseCache()
    kinds = ("Uniform", "DenseAroundStart", "DenseAfterStart")
    t0 = time.time()
    per_kind = {k: [] for k in kinds}
    for seed in cfg.seeds:
        demos, base = cache.get(cfg.task, seed, cfg.demo_count)
        collect_seed = int(stream(seed, "experiment-collect", cfg.task,
                                  cfg.mode).integers(1 << 31))
        corrections = dagger.collect_corrections(
            cfg.task, base, cfg.mode, cfg.episode_budget, seed=collect_seed)
        base_res = evaluation.evaluate(dagger.PolicyStack("base", base), cfg.task,
                                       suite=cfg.eval_suite)
        for kind in kinds:
            strategy = SamplingStrategy(kind=kind, window=cfg.sampling_window,
                                        factor=cfg.sampling_factor)
            stack = dagger.update_policy(cfg.method, base, demos, corrections,
                                         seed=seed, strategy=strategy)
            res = evaluation.evaluate(stack, cfg.task, suite=cfg.eval_suite)
            loss = float(stack.residual.loss_history[-1]) if stack.residual else 0.0
            per_kind[kind].append(SeedResult(
                seed=seed, base_result=base_res, final_result=res,
                dataset=dataset_stats(corrections),
                base_loss=float(base.loss_history[-1]), update_loss=loss))
    wall = time.time() - t0
    return {
        kind: RunReport(config={**asdict(cfg), "sampling": kind},
                        seeds=per_kind[kind], wall_clock_s=wall)
        for kind in kinds
    }
