"""The stateful-target contract and the message-sending loop."""

from __future__ import annotations

import zlib
from abc import ABC, abstractmethod
from typing import Any, Sequence

from statefuzz.feedback import HANG, OK, CoverageMap, ExecOutcome, StateId, Verdict, crash

DEFAULT_STEP_BUDGET = 10**6


class _Crash(Exception):
    def __init__(self, site: str) -> None:
        super().__init__(site)
        self.site = site


class _Hang(Exception):
    pass


def block_id(target: str, block: str) -> int:
    """Stable 16-bit id of a named basic block."""
    return zlib.crc32(f"{target}:{block}".encode()) & 0xFFFF


class Target(ABC):
    """An in-process stand-in for an instrumented server.

    Subclasses implement :meth:`_reset` and :meth:`_process`, report executed
    blocks with :meth:`hit` and abort with :meth:`crash`. They expose their
    candidate state variables through ``VARIABLES`` (names, in var-id order)
    and :meth:`read_vars`.
    """

    name: str = "target"
    VARIABLES: tuple[str, ...] = ()
    BLOCKS: tuple[str, ...] = ()

    def __init__(self, step_budget: int = DEFAULT_STEP_BUDGET) -> None:
        self.step_budget = step_budget
        self._cov: CoverageMap | None = None
        self._ids = {b: block_id(self.name, b) for b in self.BLOCKS}
        self._verdict: Verdict = OK
        self._steps = 0
        self.reset()

    # contract -------------------------------------------------------------

    @property
    def variables(self) -> list[tuple[int, str]]:
        return list(enumerate(self.VARIABLES))

    def var_id(self, name: str) -> int:
        return self.VARIABLES.index(name)

    def attach_coverage(self, cov: CoverageMap | None) -> None:
        self._cov = cov

    def reset(self) -> None:
        self._verdict = OK
        self._steps = 0
        self._reset()

    def handle(self, message: bytes) -> bytes:
        """Process one request; afterwards :meth:`verdict` tells how it went."""
        self._steps = 0
        try:
            return self._process(message)
        except _Crash as exc:
            self._verdict = crash(exc.site)
        except _Hang:
            self._verdict = HANG
        return b""

    def verdict(self) -> Verdict:
        return self._verdict

    @abstractmethod
    def read_vars(self) -> dict[int, Any]:
        ...

    # helpers for subclasses -------------------------------------------------

    def hit(self, block: str) -> None:
        self._steps += 1
        if self._steps > self.step_budget:
            raise _Hang()
        if self._cov is not None:
            self._cov.record_edge(self._ids[block])

    def crash(self, site: str) -> None:
        raise _Crash(site)

    @abstractmethod
    def _reset(self) -> None:
        ...

    @abstractmethod
    def _process(self, message: bytes) -> bytes:
        ...


def run_sequence(
    target: Target,
    messages: Sequence[bytes],
    var_ids: Sequence[int] | None = None,
    var_names: Sequence[str] | None = None,
    trace_all: bool = False,
) -> ExecOutcome:
    """Deliver ``messages`` to a freshly reset target and collect feedback.

    A state snapshot of the variables in ``var_ids`` is taken after each
    message the target finished handling. Delivery stops at the first crash
    or hang. With ``trace_all`` every declared variable is also recorded.
    """
    if var_ids is None:
        var_ids = [vid for vid, _ in target.variables]
    if var_names is None:
        var_names = [target.VARIABLES[i] for i in var_ids]
    cov = CoverageMap()
    target.attach_coverage(cov)
    outcome = ExecOutcome(cov, var_snapshots=[] if trace_all else None)
    try:
        for m in messages:
            response = target.handle(m)
            verdict = target.verdict()
            if not verdict.ok:
                outcome.verdict = verdict
                outcome.messages_sent += 1
                break
            snapshot = target.read_vars()
            outcome.state_seq.append(StateId.from_vars(var_names, var_ids, snapshot))
            outcome.responses.append(response)
            outcome.messages_sent += 1
            if trace_all:
                outcome.var_snapshots.append(snapshot)
    finally:
        target.attach_coverage(None)
    return outcome


def initial_state(target: Target, var_ids: Sequence[int], var_names: Sequence[str] | None = None) -> StateId:
    """Snapshot of the selected variables straight after a reset."""
    target.reset()
    if var_names is None:
        var_names = [target.VARIABLES[i] for i in var_ids]
    return StateId.from_vars(var_names, var_ids, target.read_vars())
