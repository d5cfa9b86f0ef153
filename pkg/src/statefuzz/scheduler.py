"""State selection, seed selection, region splitting and energy.

The scoring constants are heuristics, not derived values; all of them can be
overridden through :class:`SchedulerConfig`.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from statefuzz.errors import EmptyCorpus, EmptyModel, NoStateSeq
from statefuzz.feedback import StateId
from statefuzz.message import Seed
from statefuzz.state_model import StateModel, VertexStats


@dataclass
class SchedulerConfig:
    alpha: float = 1.0
    beta: float = 1.0
    energy_base: int = 32
    energy_min: int = 8
    energy_max: int = 512


@dataclass(frozen=True)
class StateScore:
    state: StateId
    score: float


def state_score(stats: VertexStats, cfg: SchedulerConfig) -> float:
    return cfg.alpha / (1 + stats.hits) + cfg.beta * stats.coverage_gains / (1 + stats.times_selected)


def scores(model: StateModel, cfg: SchedulerConfig | None = None) -> list[StateScore]:
    cfg = cfg or SchedulerConfig()
    return [StateScore(s, state_score(v, cfg)) for s, v in model.vertices.items()]


def choose_state(model: StateModel, rng: random.Random, cfg: SchedulerConfig | None = None) -> StateId:
    """Sample a state with probability proportional to its score."""
    if not model.vertices:
        raise EmptyModel("cannot choose a state from an empty model")
    ranked = scores(model, cfg)
    total = sum(s.score for s in ranked)
    if total <= 0:
        return ranked[rng.randrange(len(ranked))].state
    x = rng.random() * total
    acc = 0.0
    for s in ranked:
        if s.score <= 0:
            continue
        acc += s.score
        if x < acc:
            return s.state
    # float round-off: fall back to the last positive-score state
    return next(s.state for s in reversed(ranked) if s.score > 0)


def choose_sequence(corpus: list[Seed], state: StateId | None, rng: random.Random) -> Seed:
    """Uniform pick among seeds that visit ``state``, else among all seeds."""
    if not corpus:
        raise EmptyCorpus("corpus is empty")
    eligible = [seed for seed in corpus if state in seed.state_seq] if state is not None else []
    pool = eligible or corpus
    return pool[rng.randrange(len(pool))]


def split_regions(seed: Seed, state: StateId) -> tuple[list[bytes], list[bytes], list[bytes]]:
    """Split ``seed`` into (prefix, mutation region, suffix) around ``state``.

    The prefix ends with the first message after which ``state`` holds. The
    region is the run of following messages that keep the target in
    ``state``, and always holds at least one message when any remain.
    """
    msgs = seed.messages
    if not msgs:
        return [], [], []
    if not seed.state_seq:
        raise NoStateSeq("seed has not been executed yet")
    seq = seed.state_seq
    try:
        i = seq.index(state)
    except ValueError:
        return [], msgs[:1], msgs[1:]
    if i == len(msgs) - 1:
        return msgs[:-1], msgs[-1:], []
    j = i + 1
    while j < len(msgs) and seq[j] == state:
        j += 1
    end = max(j, i + 2)
    return msgs[:i + 1], msgs[i + 1:end], msgs[end:]


def region_indices(seed: Seed, state: StateId) -> range:
    m1, m2, _ = split_regions(seed, state)
    return range(len(m1), len(m1) + len(m2))


def assign_energy(seed: Seed, cfg: SchedulerConfig | None = None) -> int:
    cfg = cfg or SchedulerConfig()
    raw = cfg.energy_base * (1 + seed.perf.coverage_gains) / (1 + seed.perf.times_selected)
    return int(min(max(raw, cfg.energy_min), cfg.energy_max))
