import pytest

from corrsim import base_policy as bp
from corrsim import dagger, evaluation, experiment


def test_config_validation_errors():
    with pytest.raises(ValueError):
        experiment.ExperimentConfig(task="stack").validate()
    with pytest.raises(ValueError):
        experiment.ExperimentConfig(task="flip", method="Magic").validate()
    with pytest.raises(ValueError):
        experiment.ExperimentConfig(task="flip", mode="Wish").validate()
    with pytest.raises(ValueError):
        experiment.ExperimentConfig(task="flip", batch="Huge").validate()
    with pytest.raises(ValueError):
        experiment.ExperimentConfig(task="flip", batch="SmallBatch",
                                    episode_budget=40).validate()
    experiment.ExperimentConfig(task="flip", batch="SmallBatch",
                                episode_budget=50).validate()


def test_strategy_passthrough():
    cfg = experiment.ExperimentConfig(task="slot", sampling="DenseAroundStart",
                                      sampling_window=0.5, sampling_factor=2.0)
    s = cfg.strategy()
    assert s.kind == "DenseAroundStart"
    assert s.window == 0.5
    assert s.factor == 2.0


@pytest.fixture()
def fast_grid(monkeypatch):
    """Shrink every budget so a whole experiment cell runs in seconds."""
    monkeypatch.setattr(experiment, "collect_demos",
                        lambda task, count, seed: bp.collect_demos(task, 2, seed=seed))
    monkeypatch.setattr(experiment, "train_base",
                        lambda demos, seed: bp.train_base(demos, seed=seed, epochs=40))
    real_eval = evaluation.evaluate
    monkeypatch.setattr(
        experiment.evaluation, "evaluate",
        lambda stack, task, seeds=None, suite="eval":
            real_eval(stack, task, seeds=[100], suite=suite))
    real_update = dagger.update_policy
    monkeypatch.setattr(
        experiment.dagger, "update_policy",
        lambda *a, **k: real_update(*a, **{**k, "residual_epochs": 2}))


def test_run_experiment_single_batch(fast_grid):
    cfg = experiment.ExperimentConfig(task="slot", seeds=[0], episode_budget=2)
    report = experiment.run_experiment(cfg)
    assert len(report.seeds) == 1
    r = report.seeds[0]
    assert r.base_result.trials == 4
    assert r.final_result.trials == 4
    assert r.dataset["episodes_per_mode"] == {"OnPolicyDelta": 2}
    assert 0.0 <= report.final_success <= 1.0
    assert report.wall_clock_s > 0


def test_run_experiment_small_batch_budget(fast_grid, monkeypatch):
    monkeypatch.setattr(experiment, "SMALL_BATCH_WARMUP", 1)
    monkeypatch.setattr(experiment, "SMALL_BATCH_INCREMENT", 1)
    monkeypatch.setattr(experiment, "SMALL_BATCH_ROUNDS", 2)
    cfg = experiment.ExperimentConfig(task="slot", seeds=[0], batch="SmallBatch",
                                      episode_budget=3)
    report = experiment.run_experiment(cfg)
    assert report.seeds[0].dataset["episodes_per_mode"] == {"OnPolicyDelta": 3}
    # later increments are gathered against the updated stack
    assert report.seeds[0].dataset["collected_against"]["stack"] == 2


def test_report_aggregates():
    r1 = evaluation.StageWiseResult(task="slot", trials=4, stage_counts=[4, 2, 2],
                                    failures={"timeout": 2})
    r2 = evaluation.StageWiseResult(task="slot", trials=4, stage_counts=[4, 4, 0],
                                    failures={"timeout": 4})
    seeds = [
        experiment.SeedResult(seed=0, base_result=r1, final_result=r2,
                              dataset={}, base_loss=0.1, update_loss=0.2),
        experiment.SeedResult(seed=1, base_result=r2, final_result=r1,
                              dataset={}, base_loss=0.1, update_loss=0.2),
    ]
    report = experiment.RunReport(config={}, seeds=seeds, wall_clock_s=1.0)
    assert report.base_success == 0.25
    assert report.final_success == 0.25
    assert report.stage_fractions("final") == [1.0, 0.75, 0.25]
    assert report.failure_histogram("final") == {"timeout": 6}


def test_base_cache_reuses(fast_grid):
    cache = experiment.BaseCache()
    a = cache.get("slot", 0, 2)
    b = cache.get("slot", 0, 2)
    assert a is b
