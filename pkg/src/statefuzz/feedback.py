"""Code-coverage and state feedback.

Edge coverage follows the AFL scheme: every executed block id ``cur`` bumps
the counter at ``cur ^ (prev >> 1)``. Hit counts are compared after bucketing
into ``{1, 2, 3, 4-7, 8-15, 16-31, 32-127, 128+}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from statefuzz.state_model import StateModel

MAP_SIZE = 1 << 16
_MAP_MASK = MAP_SIZE - 1


def _bucket_table() -> tuple[int, ...]:
    table = [-1]
    for n in range(1, 256):
        if n <= 3:
            table.append(n - 1)
        elif n <= 7:
            table.append(3)
        elif n <= 15:
            table.append(4)
        elif n <= 31:
            table.append(5)
        elif n <= 127:
            table.append(6)
        else:
            table.append(7)
    return tuple(table)


BUCKETS = _bucket_table()
_BUCKET_ARRAY = np.array(BUCKETS, dtype=np.int8)


def bucket(hit_count):
    """Bucket id for a hit count (``-1`` for zero hits).

    Accepts an int or an integer numpy array.
    """
    if isinstance(hit_count, np.ndarray):
        return _BUCKET_ARRAY[np.minimum(hit_count, 255)]
    if hit_count < 0:
        raise ValueError("hit count must be non-negative")
    return BUCKETS[min(hit_count, 255)]


def edge_index(prev: int, cur: int) -> int:
    """Map slot of the edge entering ``cur`` after a block whose id was ``prev``."""
    return (cur ^ (prev >> 1)) & _MAP_MASK


class CoverageMap:
    """Per-execution edge hit counters.

    ``touched`` lists the slots that became non-zero, in first-hit order, so
    the interestingness check does not have to scan all 65,536 counters.
    """

    __slots__ = ("bits", "prev_location", "touched")

    def __init__(self) -> None:
        self.bits = bytearray(MAP_SIZE)
        self.prev_location = 0
        self.touched: list[int] = []

    def record_edge(self, cur: int) -> None:
        idx = (cur ^ (self.prev_location >> 1)) & _MAP_MASK
        n = self.bits[idx]
        if n == 0:
            self.touched.append(idx)
            self.bits[idx] = 1
        elif n < 255:
            self.bits[idx] = n + 1
        self.prev_location = cur

    def as_array(self) -> np.ndarray:
        return np.frombuffer(bytes(self.bits), dtype=np.uint8)

    def edges(self) -> dict[int, int]:
        return {i: self.bits[i] for i in sorted(self.touched)}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoverageMap):
            return NotImplemented
        return self.bits == other.bits

    def __len__(self) -> int:
        return len(self.touched)


class GlobalCoverage:
    """Highest bucket seen so far for every edge slot across a campaign."""

    def __init__(self) -> None:
        # bucket + 1; zero means the slot was never hit
        self.virgin = bytearray(MAP_SIZE)
        self.edges_covered = 0

    def has_new_bits(self, cov: CoverageMap) -> bool:
        virgin = self.virgin
        bits = cov.bits
        for idx in cov.touched:
            if BUCKETS[bits[idx]] + 1 > virgin[idx]:
                return True
        return False

    def merge(self, cov: CoverageMap) -> bool:
        changed = False
        virgin = self.virgin
        bits = cov.bits
        for idx in cov.touched:
            b = BUCKETS[bits[idx]] + 1
            old = virgin[idx]
            if b > old:
                if old == 0:
                    self.edges_covered += 1
                virgin[idx] = b
                changed = True
        return changed


class _Unset:
    __slots__ = ()

    def __repr__(self) -> str:
        return "UNSET"

    def __reduce__(self):
        return "UNSET"


UNSET = _Unset()


def _render(value: Any) -> str:
    if value is UNSET:
        return "?"
    return str(getattr(value, "name", value))


@dataclass(frozen=True)
class StateId:
    """Snapshot of the selected state variables, in selection order."""

    values: tuple[tuple[str, Any], ...]

    @classmethod
    def from_vars(cls, names: Sequence[str], ids: Sequence[int], snapshot: dict[int, Any]) -> "StateId":
        return cls(tuple((n, snapshot.get(i, UNSET)) for n, i in zip(names, ids)))

    def label(self) -> str:
        return ",".join(f"{n}={_render(v)}" for n, v in self.values)

    def __str__(self) -> str:
        return self.label()


@dataclass(frozen=True)
class Verdict:
    kind: str  # "ok" | "crash" | "hang"
    site: str | None = None

    @property
    def ok(self) -> bool:
        return self.kind == "ok"

    def __str__(self) -> str:
        return f"crash({self.site})" if self.kind == "crash" else self.kind


OK = Verdict("ok")
HANG = Verdict("hang")


def crash(site: str) -> Verdict:
    return Verdict("crash", site)


@dataclass
class ExecOutcome:
    coverage: CoverageMap
    state_seq: list[StateId] = field(default_factory=list)
    verdict: Verdict = OK
    responses: list[bytes] = field(default_factory=list)
    messages_sent: int = 0
    # every declared variable after every delivered message; filled only on request
    var_snapshots: list[dict[int, Any]] | None = None

    def same_result(self, other: "ExecOutcome") -> bool:
        return (
            self.coverage == other.coverage
            and self.state_seq == other.state_seq
            and self.verdict == other.verdict
        )


def _state_reasons(state_seq: Iterable[StateId], model: "StateModel") -> tuple[bool, bool]:
    new_vertex = new_edge = False
    prev = model.initial
    for s in state_seq:
        if s not in model.vertices:
            new_vertex = True
        if prev is not None and (prev, s) not in model.edges:
            new_edge = True
        prev = s
    return new_vertex, new_edge


def is_interesting(
    outcome: ExecOutcome,
    global_coverage: GlobalCoverage,
    state_model: "StateModel | None" = None,
) -> list[str]:
    """Reasons an ok execution is worth keeping; empty list if it is not.

    ``"a"``: an edge reached a higher hit-count bucket, ``"b"``: a new state,
    ``"c"``: a new state transition. Passing ``state_model=None`` disables the
    state checks. Global structures are merged only when something fired.
    """
    reasons = []
    if global_coverage.has_new_bits(outcome.coverage):
        reasons.append("a")
    if state_model is not None:
        new_vertex, new_edge = _state_reasons(outcome.state_seq, state_model)
        if new_vertex:
            reasons.append("b")
        if new_edge:
            reasons.append("c")
    if reasons:
        global_coverage.merge(outcome.coverage)
        if state_model is not None:
            state_model.update(outcome.state_seq)
    return reasons
