"""Stage-wise scoring, failure-mode counting, and report emission."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import dagger, world
from .scenarios import scenario_ids

STAGES = 3
EVAL_SEED_BASE = 100


@dataclass
class StageWiseResult:
    task: str
    trials: int
    stage_counts: list            # cumulative successes per stage, len 3
    failures: dict                # label -> count
    outcomes: list = field(default_factory=list)  # (scenario_id, seed, outcome, stage)

    @property
    def success_rate(self) -> float:
        return self.stage_counts[-1] / self.trials if self.trials else 0.0

    def stage_fractions(self) -> list:
        return [c / self.trials for c in self.stage_counts]

    def validate(self) -> None:
        for a, b in zip(self.stage_counts, self.stage_counts[1:]):
            if b > a:
                raise ValueError("stage successes must be monotone non-increasing")
        if sum(self.failures.values()) + self.stage_counts[-1] != self.trials:
            raise ValueError("failures plus successes must equal trial count")


def evaluate(stack: dagger.PolicyStack, task: str, seeds=None,
             suite: str = "eval") -> StageWiseResult:
    """Run the held-out suite: every eval scenario under every seed."""
    seeds = list(seeds) if seeds is not None else list(range(EVAL_SEED_BASE,
                                                             EVAL_SEED_BASE + 5))
    counts = [0] * STAGES
    failures = {}
    outcomes = []
    trials = 0
    for sid in scenario_ids(task, suite):
        for seed in seeds:
            ep = dagger.run_stack(stack, task, sid, seed)
            trials += 1
            reached = STAGES if ep.outcome == "success" else ep.stage_reached
            for k in range(STAGES):
                counts[k] += int(reached >= k + 1)
            if ep.outcome != "success":
                failures[ep.outcome] = failures.get(ep.outcome, 0) + 1
            outcomes.append((sid, seed, ep.outcome, ep.stage_reached))
    res = StageWiseResult(task=task, trials=trials, stage_counts=counts,
                          failures=failures, outcomes=outcomes)
    res.validate()
    return res


def failure_labels(task: str) -> tuple:
    return world.FLIP_FAILURES if task == "flip" else world.SLOT_FAILURES


# --- tables ----------------------------------------------------------------------

def compare_table(reports: dict) -> tuple:
    """(csv text, markdown text) from {(mode, method): StageWiseResult}.

    Rows are collection modes, columns update methods; cells are final
    success percentages.
    """
    modes = sorted({m for m, _ in reports})
    methods = sorted({u for _, u in reports})
    header = ["mode"] + methods
    rows = []
    for mode in modes:
        row = [mode]
        for method in methods:
            r = reports.get((mode, method))
            row.append("" if r is None else f"{100 * r.success_rate:.0f}")
        rows.append(row)

    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(rows)

    md = ["| " + " | ".join(header) + " |",
          "|" + "---|" * len(header)]
    for row in rows:
        md.append("| " + " | ".join(row) + " |")
    return buf.getvalue(), "\n".join(md) + "\n"


# --- plots -----------------------------------------------------------------------

def emit_plots(reports: dict, task: str, out_dir) -> list:
    """Render stage-wise bar charts (and a scene snapshot) as SVG files."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    labels = [str(k) for k in reports]
    fracs = np.array([reports[k].stage_fractions() for k in reports])
    x = np.arange(len(labels))
    width = 0.25
    fig, ax = plt.subplots(figsize=(1.8 + 1.2 * len(labels), 3.2))
    for stage in range(STAGES):
        ax.bar(x + (stage - 1) * width, fracs[:, stage], width,
               label=f"stage {stage + 1}")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("cumulative success")
    ax.set_title(f"{task}: stage-wise success")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / f"{task}_stages.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    path = out_dir / f"{task}_scene.svg"
    _scene_snapshot(task, path)
    written.append(path)
    return written


def _scene_snapshot(task: str, path) -> None:
    import matplotlib.pyplot as plt

    sid = scenario_ids(task, "eval")[0]
    w = world.reset(task, sid, seed=0)
    x0, y0, _ = world.start_pose(task)
    prims = world.render_primitives(w, tool_xy=(x0, y0))
    fig, ax = plt.subplots(figsize=(4, 4))
    for p in prims:
        if p["kind"] == "segment":
            ax.plot([p["a"][0], p["b"][0]], [p["a"][1], p["b"][1]], lw=2)
        elif p["kind"] == "polygon":
            pts = np.array(p["points"] + p["points"][:1])
            ax.plot(pts[:, 0], pts[:, 1], lw=1.5)
    ax.set_aspect("equal")
    ax.set_title(f"{task} scene ({sid})")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
