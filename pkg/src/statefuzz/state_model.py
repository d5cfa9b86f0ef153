"""The inferred protocol state machine."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

from statefuzz.feedback import StateId


@dataclass
class VertexStats:
    hits: int = 0
    times_selected: int = 0
    coverage_gains: int = 0


@dataclass
class UpdateDelta:
    new_vertices: list[StateId] = field(default_factory=list)
    new_edges: list[tuple[StateId, StateId]] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.new_vertices or self.new_edges)


class StateModel:
    """Directed graph of observed states and transitions with hit counts.

    A vertex's ``hits`` counts its appearances in observed state sequences.
    The implicit start of every execution is not counted, otherwise the
    initial state would look heavily exercised to the scheduler even when no
    message has ever been mutated while the target sat in it.

    ``vertices`` and ``edges`` are insertion-ordered dicts, so iteration order
    only depends on the order in which states were discovered.
    """

    def __init__(self, initial: StateId | None = None) -> None:
        self.vertices: dict[StateId, VertexStats] = {}
        self.edges: dict[tuple[StateId, StateId], int] = {}
        self.initial: StateId | None = None
        if initial is not None:
            self.set_initial(initial)

    def set_initial(self, state: StateId) -> None:
        self.initial = state
        self.vertices.setdefault(state, VertexStats())

    def update(self, state_seq: Iterable[StateId]) -> UpdateDelta:
        delta = UpdateDelta()
        seq = list(state_seq)
        if not seq:
            return delta
        prev = self.initial
        if prev is not None:
            if prev not in self.vertices:
                self.vertices[prev] = VertexStats()
                delta.new_vertices.append(prev)
        for s in seq:
            stats = self.vertices.get(s)
            if stats is None:
                stats = self.vertices[s] = VertexStats()
                delta.new_vertices.append(s)
            stats.hits += 1
            if prev is not None:
                edge = (prev, s)
                if edge in self.edges:
                    self.edges[edge] += 1
                else:
                    self.edges[edge] = 1
                    delta.new_edges.append(edge)
            prev = s
        return delta

    def stats(self) -> tuple[int, int]:
        return len(self.vertices), len(self.edges)

    def check_closure(self) -> None:
        for a, b in self.edges:
            assert a in self.vertices and b in self.vertices, (a, b)
        if self.edges or len(self.vertices) > 1:
            assert self.initial in self.vertices

    def to_dot(self) -> str:
        return _dot(
            (s.label() for s in self.vertices),
            ((a.label(), b.label(), hits) for (a, b), hits in self.edges.items()),
        )

    @staticmethod
    def dot_from_json(obj: dict) -> str:
        """DOT text for a model saved with :meth:`to_json`."""
        return _dot(
            (v["state"] for v in obj["per_state"]),
            ((t["from"], t["to"], t["hits"]) for t in obj["transitions"]),
        )

    def to_json(self) -> dict:
        per_state = [
            {"state": s.label(), **asdict(v)}
            for s, v in sorted(self.vertices.items(), key=lambda kv: kv[0].label())
        ]
        return {
            "vertices": len(self.vertices),
            "edges": len(self.edges),
            "initial": self.initial.label() if self.initial is not None else None,
            "per_state": per_state,
            "transitions": [
                {"from": a, "to": b, "hits": h}
                for a, b, h in sorted((a.label(), b.label(), h) for (a, b), h in self.edges.items())
            ],
        }


def _dot(labels: Iterable[str], edges: Iterable[tuple[str, str, int]]) -> str:
    lines = ["digraph state_model {"]
    lines += [f'  "{label}";' for label in sorted(labels)]
    lines += [f'  "{a}" -> "{b}" [label="{hits}"];' for a, b, hits in sorted(edges)]
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(model: StateModel, path: str | Path) -> None:
    Path(path).write_text(model.to_dot())


def export_json(model: StateModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_json(), indent=2) + "\n")


def stats(model: StateModel) -> tuple[int, int]:
    return model.stats()
