"""The fuzzing loop, crash bookkeeping, replay and stats output."""

from __future__ import annotations

import csv
import io
import json
import logging
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from statefuzz.errors import ConfigError, EmptyCorpus
from statefuzz.feedback import ExecOutcome, GlobalCoverage, StateId, is_interesting
from statefuzz.harness import Target, fixture_path, make_target, run_sequence
from statefuzz.harness.base import initial_state
from statefuzz.message import Grammar, Seed, dump_corpus, load_corpus, load_grammar, save_corpus
from statefuzz.mutation import (
    DETERMINISTIC_STAGES,
    EFFECTOR_STAGES,
    MutationConfig,
    MutationPlan,
    deterministic_mutants,
    mutate_region,
)
from statefuzz.scheduler import (
    SchedulerConfig,
    assign_energy,
    choose_sequence,
    choose_state,
    region_indices,
)
from statefuzz.state_model import StateModel, export_dot, export_json
from statefuzz.varminer import FilterConfig, calibrate, filter_vars

log = logging.getLogger(__name__)

STATS_COLUMNS = (
    "exec_index",
    "wall_seconds",
    "execs_per_sec",
    "msgs_per_sec",
    "edges_covered",
    "vertices",
    "state_edges",
    "corpus_size",
    "unique_crashes",
)

MAX_POOL = 1024


@dataclass
class CampaignConfig:
    target: str = "toy-ftp"
    # corpus file/dir or seeds; None uses the target's shipped corpus
    corpus: str | Path | list[Seed] | None = None
    grammar: str | Path | Grammar | None = None
    # None runs a calibration pass and keeps what the variable filter selects
    state_vars: Sequence[str] | None = None
    epsilon: float = 0.5
    rng_seed: int = 0
    max_execs: int | None = 100_000
    max_seconds: float | None = None
    state_feedback: bool = True
    field_mutations: bool = True
    deterministic: bool = True
    stack_depth_max: int = 16
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    calibration_execs: int = 10_000
    stats_interval: int = 1000
    # wall-clock columns make stats files differ between identical runs
    wall_timing: bool = False
    # stop as soon as one of these crash sites is found
    stop_on: frozenset[str] = frozenset()
    out_dir: str | Path | None = None

    def validate(self) -> None:
        if self.max_execs is None and self.max_seconds is None:
            raise ConfigError("a budget (max_execs or max_seconds) is required")
        if self.max_execs is not None and self.max_execs < 0:
            raise ConfigError("max_execs must be >= 0")
        if self.max_seconds is not None and self.max_seconds < 0:
            raise ConfigError("max_seconds must be >= 0")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon must lie in [0, 1]")
        if self.stats_interval < 1:
            raise ConfigError("stats_interval must be >= 1")


@dataclass
class CrashRecord:
    site_id: str
    seed: Seed
    exec_index: int
    time: float | None = None

    def to_json(self) -> dict:
        return {
            "site_id": self.site_id,
            "exec_index": self.exec_index,
            "time": self.time,
            "messages": [m.hex() for m in self.seed.messages],
        }


@dataclass
class CampaignResult:
    corpus: list[Seed]
    crashes: list[CrashRecord]
    crash_count: int
    stats: list[dict]
    model: StateModel
    execs: int
    messages: int
    state_vars: list[str]
    grammar: Grammar | None

    def first_crash(self, site: str) -> CrashRecord | None:
        return next((c for c in self.crashes if c.site_id == site), None)


def dedup(crashes: Iterable[CrashRecord]) -> list[CrashRecord]:
    """One record per crash site, keeping the earliest discovery."""
    best: dict[str, CrashRecord] = {}
    for c in crashes:
        if c.site_id not in best or c.exec_index < best[c.site_id].exec_index:
            best[c.site_id] = c
    return sorted(best.values(), key=lambda c: (c.exec_index, c.site_id))


def replay(target: Target, seed: Seed | Sequence[bytes], var_names: Sequence[str] | None = None) -> ExecOutcome:
    messages = seed.messages if isinstance(seed, Seed) else list(seed)
    var_ids = None if var_names is None else [target.var_id(n) for n in var_names]
    target.reset()
    return run_sequence(target, messages, var_ids, var_names)


def _stats_text(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=STATS_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def emit_stats(rows: Sequence[dict], path: str | Path) -> None:
    Path(path).write_text(_stats_text(rows))


def read_stats(path: str | Path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


class Fuzzer:
    """One campaign's mutable state and the loop that drives it."""

    def __init__(
        self,
        target: Target,
        corpus: list[Seed],
        *,
        state_vars: Sequence[str] = (),
        grammar: Grammar | None = None,
        mutation: MutationConfig | None = None,
        rng: random.Random | None = None,
        state_feedback: bool = True,
        record_states: bool = True,
        deterministic: bool = True,
        effector: bool = True,
        scheduler: SchedulerConfig | None = None,
        max_execs: int | None = None,
        max_seconds: float | None = None,
        stats_interval: int = 1000,
        wall_timing: bool = False,
        stop_on: Iterable[str] = (),
        trace_all: bool = False,
        on_execution: Callable[[ExecOutcome], None] | None = None,
    ) -> None:
        if not corpus:
            raise EmptyCorpus("initial corpus is empty")
        self.target = target
        self.initial_corpus = [Seed(s.messages) for s in corpus]
        self.corpus: list[Seed] = []
        self.var_names = list(state_vars)
        self.var_ids = [target.var_id(n) for n in self.var_names]
        self.grammar = grammar if grammar else None
        self.mutation = mutation or MutationConfig()
        self.rng = rng or random.Random(self.mutation.rng_seed)
        self.state_feedback = state_feedback and record_states
        self.record_states = record_states
        self.deterministic = deterministic
        self.effector = effector
        self.sched = scheduler or SchedulerConfig()
        self.max_execs = max_execs
        self.max_seconds = max_seconds
        self.stats_interval = stats_interval
        self.wall_timing = wall_timing or max_seconds is not None
        self.stop_on = frozenset(stop_on)
        self.trace_all = trace_all
        self.on_execution = on_execution

        self.coverage = GlobalCoverage()
        self.model = StateModel()
        self.crashes: dict[str, CrashRecord] = {}
        self.crash_count = 0
        self.execs = 0
        self.messages = 0
        self.stats: list[dict] = []
        self._pool: list[bytes] = []
        self._pool_set: set[bytes] = set()
        self._t0 = 0.0
        self._stopped = False
        self.last_outcome: ExecOutcome | None = None

    # budget ----------------------------------------------------------------

    def exhausted(self) -> bool:
        if self._stopped:
            return True
        if self.max_execs is not None and self.execs >= self.max_execs:
            return True
        if self.max_seconds is not None and time.perf_counter() - self._t0 >= self.max_seconds:
            return True
        return False

    # execution -------------------------------------------------------------

    def _add_to_pool(self, messages: Iterable[bytes]) -> None:
        for m in messages:
            if len(self._pool) >= MAX_POOL:
                return
            if m not in self._pool_set:
                self._pool_set.add(m)
                self._pool.append(m)

    def execute(self, messages: list[bytes], parent: Seed | None = None, state: StateId | None = None) -> list[str]:
        self.target.reset()
        out = run_sequence(self.target, messages, self.var_ids, self.var_names, self.trace_all)
        self.execs += 1
        self.messages += out.messages_sent
        self.last_outcome = out
        if self.on_execution is not None:
            self.on_execution(out)

        reasons: list[str] = []
        if not out.verdict.ok:
            if self.record_states:
                self.model.update(out.state_seq)
            self.crash_count += int(out.verdict.kind == "crash")
            site = out.verdict.site if out.verdict.kind == "crash" else None
            if site is not None and site not in self.crashes:
                self.crashes[site] = CrashRecord(
                    site, Seed(messages), self.execs,
                    round(time.perf_counter() - self._t0, 6) if self.wall_timing else None,
                )
                log.info("new crash %s at exec %d", site, self.execs)
                if site in self.stop_on:
                    self._stopped = True
        else:
            model = self.model if self.state_feedback else None
            fresh = [s for s in dict.fromkeys(out.state_seq) if s not in self.model.vertices]
            reasons = is_interesting(out, self.coverage, model)
            if self.record_states and not (reasons and model is not None):
                self.model.update(out.state_seq)
            if reasons:
                self.corpus.append(Seed(messages, out.state_seq))
                self._add_to_pool(messages)
                if parent is not None:
                    parent.perf.coverage_gains += 1
                if state is not None and state in self.model.vertices:
                    self.model.vertices[state].coverage_gains += 1
                # a state's first gain is the input that revealed it, so
                # new states get scheduled before their yield is known
                credited = dict.fromkeys(out.state_seq) if parent is None else fresh
                for s in credited:
                    if s != state and s in self.model.vertices:
                        self.model.vertices[s].coverage_gains += 1

        if self.execs % self.stats_interval == 0:
            self._sample()
        return reasons

    def _sample(self) -> None:
        row = {
            "exec_index": self.execs,
            "wall_seconds": "",
            "execs_per_sec": "",
            "msgs_per_sec": "",
            "edges_covered": self.coverage.edges_covered,
            "vertices": len(self.model.vertices),
            "state_edges": len(self.model.edges),
            "corpus_size": len(self.corpus),
            "unique_crashes": len(self.crashes),
        }
        if self.wall_timing:
            elapsed = max(time.perf_counter() - self._t0, 1e-9)
            row["wall_seconds"] = f"{elapsed:.3f}"
            row["execs_per_sec"] = f"{self.execs / elapsed:.1f}"
            row["msgs_per_sec"] = f"{self.messages / elapsed:.1f}"
        self.stats.append(row)

    # loop ------------------------------------------------------------------

    def dry_run(self) -> None:
        """Execute the initial seeds; every seed that runs cleanly is kept."""
        if self.record_states:
            self.model.set_initial(initial_state(self.target, self.var_ids, self.var_names))
        for seed in self.initial_corpus:
            if self.exhausted():
                return
            if not self.execute(seed.messages) and self.last_outcome.verdict.ok:
                self.corpus.append(Seed(seed.messages, self.last_outcome.state_seq))
            self._add_to_pool(seed.messages)

    def _pick(self) -> tuple[Seed, range, StateId | None]:
        rng = self.rng
        if self.state_feedback:
            state = choose_state(self.model, rng, self.sched)
            self.model.vertices[state].times_selected += 1
            seed = choose_sequence(self.corpus, state, rng)
            return seed, region_indices(seed, state), state
        seed = self.corpus[rng.randrange(len(self.corpus))]
        n = len(seed.messages)
        k = rng.randrange(n) if n else 0
        return seed, range(k, min(k + 1, n)), None

    def _deterministic(self, seed: Seed, plan: MutationPlan, state: StateId | None) -> None:
        """Deterministic walk with an effector map.

        ``flip8`` runs first; a byte whose flipped mutant runs the same path
        as the original is skipped by all later stages.
        """
        self.execute(seed.messages, seed, state)
        base = self.last_outcome
        stages = EFFECTOR_STAGES
        if not self.effector:
            effective = None
            stages = DETERMINISTIC_STAGES
        else:
            effect: dict[tuple[int, int], bool] = {}
            effective = lambda k, pos: effect.get((k, pos), True)
        for d in deterministic_mutants(seed, plan, stages, effective):
            if self.exhausted():
                return
            self.execute(d.seed.messages, seed, state)
            if effective is not None and d.stage == "flip8":
                effect[d.message, d.pos] = not self.last_outcome.same_result(base)

    def fuzz_one(self) -> None:
        seed, region, state = self._pick()
        plan = MutationPlan(region, self.grammar, self._pool)
        m1 = seed.messages[:region.start]
        m2 = seed.messages[region.start:region.stop]
        m3 = seed.messages[region.stop:]
        if self.deterministic and not seed.det_done:
            seed.det_done = True
            self._deterministic(seed, plan, state)
            if self.exhausted():
                return
        energy = assign_energy(seed, self.sched)
        seed.perf.times_selected += 1
        for _ in range(energy):
            if self.exhausted():
                return
            new_m2, _ = mutate_region(m2, self.grammar, self.mutation, self.rng, self._pool)
            self.execute(m1 + new_m2 + m3, seed, state)

    def run(self) -> None:
        self._t0 = time.perf_counter()
        self.dry_run()
        while not self.exhausted():
            if not self.corpus:
                log.warning("no initial seed survived the dry run; stopping")
                break
            self.fuzz_one()
        if not self.stats or self.stats[-1]["exec_index"] != self.execs:
            self._sample()


def _resolve_corpus(cfg: CampaignConfig) -> list[Seed]:
    if cfg.corpus is None:
        return load_corpus(fixture_path(cfg.target, "corpus.bin"))
    if isinstance(cfg.corpus, (str, Path)):
        try:
            return load_corpus(cfg.corpus)
        except FileNotFoundError as exc:
            raise ConfigError(f"corpus not found: {cfg.corpus}") from exc
    # the fuzzer annotates seeds in place, so work on copies of the caller's
    return [Seed(list(s.messages)) for s in cfg.corpus]


def _resolve_grammar(cfg: CampaignConfig) -> Grammar | None:
    if not cfg.field_mutations or cfg.grammar is None:
        return None
    if isinstance(cfg.grammar, Grammar):
        return cfg.grammar
    try:
        return load_grammar(cfg.grammar)
    except FileNotFoundError as exc:
        raise ConfigError(f"grammar not found: {cfg.grammar}") from exc


def select_state_vars(cfg: CampaignConfig, target: Target, corpus: list[Seed]) -> list[str]:
    if cfg.state_vars is not None:
        unknown = [n for n in cfg.state_vars if n not in target.VARIABLES]
        if unknown:
            raise ConfigError(f"target {target.name} has no variables {unknown}")
        return list(cfg.state_vars)
    traces = calibrate(target, corpus, cfg.calibration_execs, random.Random(cfg.rng_seed))
    chosen = filter_vars(traces, cfg.filter)
    return [target.VARIABLES[i] for i in chosen]


def run_campaign(cfg: CampaignConfig) -> CampaignResult:
    cfg.validate()
    target = make_target(cfg.target)
    corpus = _resolve_corpus(cfg)
    if not corpus:
        raise ConfigError("initial corpus is empty")
    grammar = _resolve_grammar(cfg)
    state_vars = select_state_vars(cfg, target, corpus)
    log.info("state variables: %s", state_vars)

    fuzzer = Fuzzer(
        target,
        corpus,
        state_vars=state_vars,
        grammar=grammar,
        mutation=MutationConfig(cfg.epsilon, cfg.stack_depth_max, cfg.rng_seed),
        state_feedback=cfg.state_feedback,
        deterministic=cfg.deterministic,
        scheduler=cfg.scheduler,
        max_execs=cfg.max_execs,
        max_seconds=cfg.max_seconds,
        stats_interval=cfg.stats_interval,
        wall_timing=cfg.wall_timing,
        stop_on=cfg.stop_on,
    )
    if cfg.max_execs != 0:
        fuzzer.run()
    result = CampaignResult(
        corpus=fuzzer.corpus,
        crashes=dedup(fuzzer.crashes.values()),
        crash_count=fuzzer.crash_count,
        stats=fuzzer.stats,
        model=fuzzer.model,
        execs=fuzzer.execs,
        messages=fuzzer.messages,
        state_vars=state_vars,
        grammar=grammar,
    )
    if cfg.out_dir is not None:
        write_outputs(result, cfg.out_dir)
    return result


def write_outputs(result: CampaignResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    (out / "crashes").mkdir(parents=True, exist_ok=True)
    save_corpus(result.corpus, out / "corpus.bin")
    for c in result.crashes:
        (out / "crashes" / f"{c.site_id}.bin").write_bytes(dump_corpus([c.seed]))
    (out / "crashes.json").write_text(
        json.dumps({"total": result.crash_count, "unique": [c.to_json() for c in result.crashes]}, indent=2) + "\n"
    )
    (out / "state_vars.json").write_text(json.dumps(result.state_vars) + "\n")
    emit_stats(result.stats, out / "stats.csv")
    export_dot(result.model, out / "state_model.dot")
    export_json(result.model, out / "state_model.json")
