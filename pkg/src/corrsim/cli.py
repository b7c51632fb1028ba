"""Command-line entry points.

Artifacts on disk: episodes are ``.ep`` files in the recorder format, one
per episode inside a directory; policies are single checkpoint files.
Reports are CSV/markdown plus SVG figures.  Every subcommand takes
``--seed`` and exits nonzero on invariant violations.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import dagger, evaluation, experiment
from .base_policy import BasePolicy, collect_demos, train_base
from .errors import CorrsimError
from .recorder import SamplingStrategy, dataset_stats, load_episode, save_episode
from .residual import ResidualPolicy, train_residual

_SAMPLING = {"uniform": "Uniform", "around": "DenseAroundStart",
             "after": "DenseAfterStart"}
_MODES = {"observe": "ObserveThenCollect", "takeover": "TakeOver",
          "delta": "OnPolicyDelta"}
_METHODS = {"retrain": "Retrain", "finetune": "Finetune",
            "residual": "ResidualNoForce", "compliant": "CompliantResidual"}


def _save_episodes(dirpath: Path, episodes: list) -> None:
    dirpath.mkdir(parents=True, exist_ok=True)
    for i, ep in enumerate(episodes):
        save_episode(dirpath / f"{i:04d}.ep", ep)


def _load_episodes(dirpath: Path) -> list:
    paths = sorted(Path(dirpath).glob("*.ep"))
    return [load_episode(p) for p in paths]


def _cmd_gen_demos(args) -> int:
    demos = collect_demos(args.task, args.n, seed=args.seed)
    _save_episodes(Path(args.out), demos)
    print(json.dumps({"task": args.task, "episodes": len(demos),
                      "out": str(args.out)}))
    return 0


def _cmd_train_base(args) -> int:
    demos = _load_episodes(Path(args.demos))
    base = train_base(demos, seed=args.seed, epochs=args.epochs)
    base.save(args.out)
    print(json.dumps({"task": base.task, "final_loss": base.loss_history[-1],
                      "out": str(args.out)}))
    return 0


def _cmd_collect(args) -> int:
    base = BasePolicy.load(args.base)
    residual = ResidualPolicy.load(args.residual) if args.residual else None
    episodes = dagger.collect_corrections(
        base.task, base, _MODES[args.mode], args.n, seed=args.seed,
        residual=residual)
    _save_episodes(Path(args.out), episodes)
    print(json.dumps({"mode": _MODES[args.mode],
                      "stats": dataset_stats(episodes)}))
    return 0


def _cmd_train_residual(args) -> int:
    base = BasePolicy.load(args.base)
    episodes = _load_episodes(Path(args.data))
    strategy = SamplingStrategy(kind=_SAMPLING[args.sampling],
                                window=args.window)
    samples = dagger.labeled_dataset(episodes, strategy)
    residual = train_residual(
        base, samples, seed=args.seed, force_enabled=args.force == "on",
        with_base_action=None if args.with_base_action == "auto"
        else args.with_base_action == "on")
    residual.save(args.out)
    print(json.dumps({"samples": len(samples),
                      "final_loss": residual.loss_history[-1],
                      "out": str(args.out)}))
    return 0


def _cmd_update(args) -> int:
    base = BasePolicy.load(args.base)
    demos = _load_episodes(Path(args.demos)) if args.demos else []
    corrections = _load_episodes(Path(args.data))
    stack = dagger.update_policy(_METHODS[args.method], base, demos,
                                 corrections, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stack.base.save(out / "base.ckpt")
    info = {"method": stack.method, "out": str(out)}
    if stack.residual is not None:
        stack.residual.save(out / "residual.ckpt")
        info["residual"] = True
    print(json.dumps(info))
    return 0


def _load_stack(path: Path) -> dagger.PolicyStack:
    path = Path(path)
    if path.is_dir():
        base = BasePolicy.load(path / "base.ckpt")
        rpath = path / "residual.ckpt"
        residual = ResidualPolicy.load(rpath) if rpath.exists() else None
        return dagger.PolicyStack("stack", base, residual)
    return dagger.PolicyStack("base", BasePolicy.load(path))


def _cmd_eval(args) -> int:
    stack = _load_stack(Path(args.policy))
    seeds = range(args.seed, args.seed + max(1, args.trials // 4))
    res = evaluation.evaluate(stack, stack.base.task, seeds=seeds,
                              suite=args.suite)
    print(json.dumps({"task": res.task, "trials": res.trials,
                      "stage_fractions": res.stage_fractions(),
                      "failures": res.failures}))
    return 0


def _parse_config(path: Path) -> experiment.ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise CorrsimError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    known = set(experiment.ExperimentConfig.__dataclass_fields__)
    for key in raw:
        if key not in known:
            raise CorrsimError(f"{path}: unknown config field '{key}'")
    cfg = experiment.ExperimentConfig(**raw)
    cfg.validate()
    return cfg


def _report_payload(rep: experiment.RunReport) -> dict:
    return {
        "config": rep.config,
        "base_success": rep.base_success,
        "final_success": rep.final_success,
        "stage_fractions": rep.stage_fractions(),
        "failures": rep.failure_histogram(),
        "wall_clock_s": rep.wall_clock_s,
        "dataset": [r.dataset for r in rep.seeds],
    }


def _cmd_experiment(args) -> int:
    cfg = _parse_config(Path(args.config))
    rep = experiment.run_experiment(cfg)
    payload = _report_payload(rep)
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2))
    print(json.dumps(payload))
    return 0


def _cmd_ablate(args, runner) -> int:
    cfg = _parse_config(Path(args.config))
    reports = runner(cfg)
    payload = {k: _report_payload(v) for k, v in reports.items()}
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2))
    print(json.dumps(payload))
    return 0


def _cmd_report(args) -> int:
    reports = {}
    for path in sorted(Path(args.indir).glob("*.json")):
        payload = json.loads(path.read_text())
        key = (payload["config"]["mode"], payload["config"]["method"])
        reports[key] = payload
    rows = {k: type("R", (), {"success_rate": v["final_success"]})()
            for k, v in reports.items()}
    csv_text, md_text = evaluation.compare_table(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.csv").write_text(csv_text)
    (out / "comparison.md").write_text(md_text)
    tasks = {p["config"]["task"] for p in reports.values()}
    from .evaluation import StageWiseResult
    for task in tasks:
        task_reports = {}
        for (mode, method), p in reports.items():
            if p["config"]["task"] != task:
                continue
            trials = 20 * len(p["config"]["seeds"])
            counts = [int(round(f * trials)) for f in p["stage_fractions"]]
            task_reports[f"{mode}+{method}"] = StageWiseResult(
                task=task, trials=trials, stage_counts=counts,
                failures=p["failures"])
        if task_reports:
            evaluation.emit_plots(task_reports, task, out)
    print(json.dumps({"out": str(out), "cells": len(reports)}))
    return 0


def _cmd_serve(args) -> int:
    from .service import serve
    policy = residual = None
    if args.policy:
        stack = _load_stack(Path(args.policy))
        policy, residual = stack.base, stack.residual
    serve(port=args.port, task=args.task, scenario_set=args.scenarios,
          force_scale=args.force_scale, record_dir=args.record_dir,
          policy=policy, residual=residual, seed=args.seed)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corrsim")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("gen-demos", help="generate scripted demonstrations")
    d.add_argument("--task", required=True, choices=["flip", "slot"])
    d.add_argument("--n", type=int, default=150)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", required=True)
    d.set_defaults(fn=_cmd_gen_demos)

    t = sub.add_parser("train-base", help="behavior-clone the base policy")
    t.add_argument("--demos", required=True)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(fn=_cmd_train_base)

    c = sub.add_parser("collect", help="collect correction episodes")
    c.add_argument("--base", required=True)
    c.add_argument("--residual", default=None)
    c.add_argument("--mode", required=True, choices=sorted(_MODES))
    c.add_argument("--n", type=int, default=50)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.set_defaults(fn=_cmd_collect)

    r = sub.add_parser("train-residual", help="train the residual policy")
    r.add_argument("--base", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--sampling", default="uniform", choices=sorted(_SAMPLING))
    r.add_argument("--window", type=float, default=1.0)
    r.add_argument("--force", default="on", choices=["on", "off"])
    r.add_argument("--with-base-action", default="auto",
                   choices=["auto", "on", "off"])
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.set_defaults(fn=_cmd_train_residual)

    u = sub.add_parser("update", help="run one policy update method")
    u.add_argument("--method", required=True, choices=sorted(_METHODS))
    u.add_argument("--base", required=True)
    u.add_argument("--demos", default=None)
    u.add_argument("--data", required=True)
    u.add_argument("--seed", type=int, default=0)
    u.add_argument("--out", required=True)
    u.set_defaults(fn=_cmd_update)

    e = sub.add_parser("eval", help="evaluate a policy on the held-out suite")
    e.add_argument("--policy", required=True)
    e.add_argument("--suite", default="eval")
    e.add_argument("--trials", type=int, default=20)
    e.add_argument("--seed", type=int, default=100)
    e.set_defaults(fn=_cmd_eval)

    x = sub.add_parser("experiment", help="run one experiment grid cell")
    x.add_argument("--config", required=True)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--out", default=None)
    x.set_defaults(fn=_cmd_experiment)

    ab = sub.add_parser("ablate-batch", help="single-batch vs small-batch")
    ab.add_argument("--config", required=True)
    ab.add_argument("--seed", type=int, default=0)
    ab.add_argument("--out", default=None)
    ab.set_defaults(fn=lambda a: _cmd_ablate(a, experiment.ablate_batch))

    asamp = sub.add_parser("ablate-sampling", help="sampling strategy sweep")
    asamp.add_argument("--config", required=True)
    asamp.add_argument("--seed", type=int, default=0)
    asamp.add_argument("--out", default=None)
    asamp.set_defaults(fn=lambda a: _cmd_ablate(a, experiment.ablate_sampling))

    s = sub.add_parser("serve", help="run the live correction service")
    s.add_argument("--port", type=int, default=8701)
    s.add_argument("--task", required=True, choices=["flip", "slot"])
    s.add_argument("--policy", default=None,
                   help="base checkpoint or stack directory; scripted if omitted")
    s.add_argument("--scenarios", default="collect")
    s.add_argument("--force-scale", type=float, default=0.05)
    s.add_argument("--record-dir", default="recordings")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=_cmd_serve)

    rp = sub.add_parser("report", help="tables and figures from cell reports")
    rp.add_argument("--in", dest="indir", required=True)
    rp.add_argument("--out", required=True)
    rp.add_argument("--seed", type=int, default=0)
    rp.set_defaults(fn=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CorrsimError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
