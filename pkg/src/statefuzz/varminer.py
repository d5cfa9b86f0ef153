"""Dynamic filtering of candidate state variables.

A calibration run fuzzes the target with classical mutations and records
every candidate variable after every message. :func:`filter_vars` then keeps
the variables whose value distribution looks like a protocol state: a small
number of distinct values, each observed often enough.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Sequence

import jsonschema

from statefuzz.errors import EmptyCorpus
from statefuzz.message import Seed

if TYPE_CHECKING:
    from statefuzz.harness.base import Target


@dataclass
class VarTrace:
    var_id: int
    name: str
    value_hits: Counter = field(default_factory=Counter)

    @property
    def total_observations(self) -> int:
        return sum(self.value_hits.values())

    @property
    def unique_values(self) -> int:
        return len(self.value_hits)


@dataclass
class FilterConfig:
    min_unique: int = 3
    max_unique: int = 10  # exclusive
    hard_cap: int = 10_000
    hit_threshold: int = 5
    name_keyword: str = "state"
    force_include: Sequence[str] = ()


def calibrate(
    target: "Target",
    corpus: Sequence[Seed],
    duration_execs: int,
    rng: random.Random | int = 0,
) -> list[VarTrace]:
    """Trace every declared variable over a classical stacked-mutation run."""
    from statefuzz.campaign import Fuzzer

    if not corpus:
        raise EmptyCorpus("calibration needs at least one seed")
    if isinstance(rng, int):
        rng = random.Random(rng)
    traces = [VarTrace(vid, name) for vid, name in target.variables]

    def record(outcome) -> None:
        for snapshot in outcome.var_snapshots:
            for vid, value in snapshot.items():
                traces[vid].value_hits[value] += 1

    if duration_execs <= 0:
        return traces
    fuzzer = Fuzzer(
        target,
        list(corpus),
        rng=rng,
        state_feedback=False,
        record_states=False,
        # the deterministic walk would spend the whole budget on a few seeds
        deterministic=False,
        max_execs=duration_execs,
        trace_all=True,
        on_execution=record,
    )
    fuzzer.run()
    return traces


def _retained(trace: VarTrace, cfg: FilterConfig) -> int:
    return sum(1 for n in trace.value_hits.values() if n >= cfg.hit_threshold)


def passes(trace: VarTrace, cfg: FilterConfig) -> bool:
    # Values seen fewer than hit_threshold times do not count towards the
    # minimum. The maximum is checked on all distinct values, so raising the
    # threshold can only ever remove variables from the selection.
    if trace.unique_values >= min(cfg.hard_cap, cfg.max_unique):
        return False
    return _retained(trace, cfg) >= cfg.min_unique


def filter_vars(traces: Sequence[VarTrace], cfg: FilterConfig | None = None) -> list[int]:
    """Ranked var ids of the traces that look like state variables."""
    cfg = cfg or FilterConfig()
    keyword = cfg.name_keyword.lower()
    kept = [t for t in traces if passes(t, cfg) or t.name in cfg.force_include]
    kept.sort(key=lambda t: (keyword not in t.name.lower(), _retained(t, cfg), t.var_id))
    return [t.var_id for t in kept]


REPORT_SCHEMA = {
    "type": "object",
    "required": ["variables", "histogram", "selected"],
    "properties": {
        "variables": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["var_id", "name", "unique_values", "total_observations", "value_hits"],
                "properties": {
                    "var_id": {"type": "integer", "minimum": 0},
                    "name": {"type": "string"},
                    "unique_values": {"type": "integer", "minimum": 0},
                    "total_observations": {"type": "integer", "minimum": 0},
                    "value_hits": {"type": "object", "additionalProperties": {"type": "integer"}},
                },
            },
        },
        "histogram": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["unique_values", "variables"],
                "properties": {
                    "unique_values": {"type": "integer"},
                    "variables": {"type": "integer"},
                },
            },
        },
        "selected": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["var_id", "name"],
                "properties": {"var_id": {"type": "integer"}, "name": {"type": "string"}},
            },
        },
    },
}

# hit histograms of variables with more distinct values than this are cut
REPORT_MAX_VALUES = 64


def _value_key(value: Any) -> str:
    return str(getattr(value, "name", value))


def build_report(traces: Sequence[VarTrace], selection: Sequence[int]) -> dict:
    by_id = {t.var_id: t for t in traces}
    variables = []
    for t in traces:
        top = t.value_hits.most_common(REPORT_MAX_VALUES)
        variables.append({
            "var_id": t.var_id,
            "name": t.name,
            "unique_values": t.unique_values,
            "total_observations": t.total_observations,
            "value_hits": {_value_key(v): n for v, n in top},
        })
    hist = Counter(t.unique_values for t in traces)
    return {
        "variables": variables,
        "histogram": [{"unique_values": k, "variables": hist[k]} for k in sorted(hist)],
        "selected": [{"var_id": i, "name": by_id[i].name} for i in selection],
    }


def emit_report(traces: Sequence[VarTrace], selection: Sequence[int], path: str | Path) -> dict:
    report = build_report(traces, selection)
    jsonschema.validate(report, REPORT_SCHEMA)
    Path(path).write_text(json.dumps(report, indent=2) + "\n")
    return report


def load_report(path: str | Path) -> dict:
    report = json.loads(Path(path).read_text())
    jsonschema.validate(report, REPORT_SCHEMA)
    return report


def load_selection(path: str | Path) -> list[str]:
    """Variable names from a report's selection or from a plain JSON list."""
    obj = json.loads(Path(path).read_text())
    if isinstance(obj, list):
        return [str(x) for x in obj]
    jsonschema.validate(obj, REPORT_SCHEMA)
    return [s["name"] for s in obj["selected"]]
