"""Scenario table: documented initial placements and ambiguity parameters.

The table lives in ``data/scenarios.json`` (versioned, human-readable) and
defines three disjoint sets per task: ``demo`` (used for demonstrations,
no systematic perception bias), ``collect`` (correction collection) and
``eval`` (held-out evaluation suite).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .errors import UnknownScenario

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Scenario:
    id: str
    task: str
    set_name: str  # demo | collect | eval
    params: dict


def _load_table() -> dict:
    text = resources.files("corrsim.data").joinpath("scenarios.json").read_text()
    table = json.loads(text)
    if table.get("version") != SCHEMA_VERSION:
        raise UnknownScenario(f"scenario table version {table.get('version')} unsupported")
    return table


_TABLE = None


def _table() -> dict:
    global _TABLE
    if _TABLE is None:
        _TABLE = _load_table()
    return _TABLE


def scenario_ids(task: str, set_name: str) -> list[str]:
    try:
        return [s["id"] for s in _table()["tasks"][task][set_name]]
    except KeyError as e:
        raise UnknownScenario(f"no scenario set {task}/{set_name}") from e


def get_scenario(task: str, scenario_id: str) -> Scenario:
    try:
        sets = _table()["tasks"][task]
    except KeyError as e:
        raise UnknownScenario(f"unknown task {task}") from e
    for set_name, entries in sets.items():
        for s in entries:
            if s["id"] == scenario_id:
                params = {k: v for k, v in s.items() if k != "id"}
                return Scenario(id=scenario_id, task=task, set_name=set_name, params=params)
    raise UnknownScenario(f"scenario {scenario_id} not in task {task}")
