"""Mutation operators.

Three families act on the mutation region (M2) of a seed:

* the deterministic stage, a fixed-order walk of bit flips, byte flips,
  +/-1 arithmetic and interesting-value overwrites;
* the classical stack, random byte-level and message-level operators;
* the field stack, bit-level operators confined to grammar fields.

The prefix (M1) and suffix (M3) are never touched.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from statefuzz.errors import NoGrammar
from statefuzz.message import FieldSpec, Grammar, Seed, fit_bits, read_field, write_field

INTERESTING = (0, 1, 16, 32, 64, 100, 127, 128, 255, 256, 512, 1000, 1024, 4096, 32767, 65535)
INTERESTING_8 = tuple(v for v in INTERESTING if v < 1 << 8)
INTERESTING_16 = tuple(v for v in INTERESTING if v < 1 << 16)
INTERESTING_32 = INTERESTING

ARITH_MAX = 35
MAX_MESSAGE_LEN = 4096
MAX_REGION_MESSAGES = 64
MAX_RETRIES = 8

DETERMINISTIC_STAGES = (
    "flip1", "flip2", "flip4", "flip8",
    "arith8", "arith16", "arith32",
    "interest8", "interest16", "interest32",
)
# with an effector map, flip8 runs first so that it can gate every later stage
EFFECTOR_STAGES = ("flip8",) + tuple(st for st in DETERMINISTIC_STAGES if st != "flip8")


@dataclass
class MutationConfig:
    epsilon: float = 0.5
    stack_depth_max: int = 16
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.stack_depth_max < 1:
            raise ValueError("stack_depth_max must be >= 1")


@dataclass
class MutationPlan:
    """Which messages of the seed form M2, and the grammar to mutate with."""

    target_region: range
    grammar: Grammar | None = None
    # messages available to message-level insert/replace
    pool: Sequence[bytes] = field(default_factory=tuple)

    def validate(self, seed: Seed) -> None:
        r = self.target_region
        if r.step != 1 or r.start < 0 or r.stop > len(seed.messages) or r.start > r.stop:
            raise ValueError(f"region {r} invalid for a seed of {len(seed.messages)} messages")

    def split(self, seed: Seed) -> tuple[list[bytes], list[bytes], list[bytes]]:
        self.validate(seed)
        r = self.target_region
        msgs = seed.messages
        return msgs[:r.start], msgs[r.start:r.stop], msgs[r.stop:]


def _reassemble(seed: Seed, plan: MutationPlan, m2: list[bytes]) -> Seed:
    m1, _, m3 = plan.split(seed)
    return Seed(m1 + m2 + m3)


# --- deterministic stage ---------------------------------------------------


def _flip_bits(data: bytes, start: int, width: int) -> bytes:
    out = bytearray(data)
    for bit in range(start, start + width):
        out[bit >> 3] ^= 0x80 >> (bit & 7)
    return bytes(out)


def _put_int(data: bytes, pos: int, width: int, value: int) -> bytes:
    return data[:pos] + value.to_bytes(width, "big") + data[pos + width:]


def _det_mutants(data: bytes, stage: str, effective: Callable[[int], bool] | None = None) -> Iterator[tuple[int, bytes]]:
    """(byte position, mutant) pairs of one deterministic stage.

    ``effective(pos)`` lets every stage but ``flip8`` skip positions whose
    bytes never changed the execution path when flipped.
    """
    n = len(data)

    def wanted(pos: int, width: int) -> bool:
        return effective is None or any(effective(p) for p in range(pos, pos + width))

    if stage.startswith("flip"):
        width = int(stage[4:])
        if width == 8:
            for i in range(n):
                yield i, data[:i] + bytes([data[i] ^ 0xFF]) + data[i + 1:]
        else:
            for bit in range(8 * n - width + 1):
                if not wanted(bit >> 3, ((bit & 7) + width + 7) >> 3):
                    continue
                yield bit >> 3, _flip_bits(data, bit, width)
    elif stage.startswith("arith"):
        width = int(stage[5:]) // 8
        mod = 1 << (8 * width)
        for pos in range(n - width + 1):
            if not wanted(pos, width):
                continue
            old = int.from_bytes(data[pos:pos + width], "big")
            for delta in (1, -1):
                yield pos, _put_int(data, pos, width, (old + delta) % mod)
    elif stage.startswith("interest"):
        width = int(stage[8:]) // 8
        values = {1: INTERESTING_8, 2: INTERESTING_16, 4: INTERESTING_32}[width]
        for pos in range(n - width + 1):
            if not wanted(pos, width):
                continue
            for v in values:
                mutant = _put_int(data, pos, width, v)
                if mutant != data:
                    yield pos, mutant
    else:
        raise ValueError(f"unknown deterministic stage {stage!r}")


@dataclass(frozen=True)
class DetMutant:
    stage: str
    message: int  # index into M2
    pos: int  # byte position inside that message
    seed: Seed


def deterministic_mutants(
    seed: Seed,
    plan: MutationPlan,
    stages: Sequence[str] = DETERMINISTIC_STAGES,
    effective: Callable[[int, int], bool] | None = None,
) -> Iterator[DetMutant]:
    """Deterministic mutants of M2 tagged with where they were made.

    ``effective(message, pos)`` is consulted lazily, so a caller can fill it
    in from the results of the ``flip8`` mutants it has already executed.
    """
    m1, m2, m3 = plan.split(seed)
    for k, data in enumerate(m2):
        eff = None if effective is None else (lambda pos, k=k: effective(k, pos))
        for stage in stages:
            for pos, mutant in _det_mutants(data, stage, eff):
                yield DetMutant(stage, k, pos, Seed(m1 + m2[:k] + [mutant] + m2[k + 1:] + m3))


def deterministic_stage(
    seed: Seed, plan: MutationPlan, stages: Sequence[str] = DETERMINISTIC_STAGES
) -> Iterator[Seed]:
    """Yield one mutant per deterministic operator application over M2's bytes."""
    for d in deterministic_mutants(seed, plan, stages):
        yield d.seed


# --- classical stack -------------------------------------------------------


def _block_len(rng: random.Random, limit: int) -> int:
    r = rng.random()
    if r < 0.75:
        hi = 32
    elif r < 0.95:
        hi = 128
    else:
        hi = 1500
    return rng.randint(1, max(1, min(hi, limit)))


def _pick_message(msgs: list[bytes], rng: random.Random, min_len: int = 1) -> int | None:
    candidates = [i for i, m in enumerate(msgs) if len(m) >= min_len]
    if not candidates:
        return None
    return candidates[rng.randrange(len(candidates))]


def _byte_op(fn: Callable[[bytearray, random.Random], bool | None], min_len: int = 1):
    def op(msgs: list[bytes], rng: random.Random, pool: Sequence[bytes] = ()) -> list[bytes] | None:
        k = _pick_message(msgs, rng, min_len)
        if k is None:
            return None
        buf = bytearray(msgs[k])
        if fn(buf, rng) is False:
            return None
        if len(buf) > MAX_MESSAGE_LEN:
            del buf[MAX_MESSAGE_LEN:]
        return msgs[:k] + [bytes(buf)] + msgs[k + 1:]

    op.__name__ = fn.__name__
    return op


def _random_endian_put(buf: bytearray, pos: int, width: int, value: int, rng: random.Random) -> None:
    buf[pos:pos + width] = value.to_bytes(width, "big" if rng.random() < 0.5 else "little")


def _op_bitflip(buf, rng):
    bit = rng.randrange(8 * len(buf))
    buf[bit >> 3] ^= 0x80 >> (bit & 7)


def _op_interest8(buf, rng):
    buf[rng.randrange(len(buf))] = rng.choice(INTERESTING_8)


def _op_interest16(buf, rng):
    _random_endian_put(buf, rng.randrange(len(buf) - 1), 2, rng.choice(INTERESTING_16), rng)


def _op_interest32(buf, rng):
    _random_endian_put(buf, rng.randrange(len(buf) - 3), 4, rng.choice(INTERESTING_32), rng)


def _arith(width: int):
    def fn(buf, rng):
        pos = rng.randrange(len(buf) - width + 1)
        order = "big" if rng.random() < 0.5 else "little"
        old = int.from_bytes(buf[pos:pos + width], order)
        delta = rng.randint(1, ARITH_MAX) * (1 if rng.random() < 0.5 else -1)
        buf[pos:pos + width] = ((old + delta) % (1 << (8 * width))).to_bytes(width, order)

    fn.__name__ = f"_op_arith{8 * width}"
    return fn


def _op_random_byte(buf, rng):
    buf[rng.randrange(len(buf))] ^= rng.randint(1, 255)


def _op_block_delete(buf, rng):
    if len(buf) < 2:
        return False
    n = _block_len(rng, len(buf) - 1)
    pos = rng.randrange(len(buf) - n + 1)
    del buf[pos:pos + n]


def _op_block_insert(buf, rng):
    """Insert a cloned block (75%) or a run of one constant byte."""
    if rng.random() < 0.75 and buf:
        n = _block_len(rng, len(buf))
        src = rng.randrange(len(buf) - n + 1)
        chunk = bytes(buf[src:src + n])
    else:
        n = _block_len(rng, 128)
        value = rng.randrange(256) if rng.random() < 0.5 or not buf else buf[rng.randrange(len(buf))]
        chunk = bytes([value]) * n
    pos = rng.randrange(len(buf) + 1)
    buf[pos:pos] = chunk


def _op_block_overwrite(buf, rng):
    """Overwrite a block with a copy of another block (75%) or memset it."""
    if len(buf) < 2:
        return False
    n = _block_len(rng, len(buf) - 1)
    dst = rng.randrange(len(buf) - n + 1)
    if rng.random() < 0.75:
        src = rng.randrange(len(buf) - n + 1)
        if src == dst:
            return False
        buf[dst:dst + n] = bytes(buf[src:src + n])
    else:
        value = rng.randrange(256) if rng.random() < 0.5 else buf[rng.randrange(len(buf))]
        buf[dst:dst + n] = bytes([value]) * n


def msg_insert(msgs, rng, pool=(), index=None):
    if not pool or len(msgs) >= MAX_REGION_MESSAGES:
        return None
    pos = rng.randrange(len(msgs) + 1) if index is None else index
    return msgs[:pos] + [pool[rng.randrange(len(pool))]] + msgs[pos:]


def msg_replace(msgs, rng, pool=(), index=None):
    if not pool or not msgs:
        return None
    pos = rng.randrange(len(msgs)) if index is None else index
    return msgs[:pos] + [pool[rng.randrange(len(pool))]] + msgs[pos + 1:]


def msg_duplicate(msgs, rng, pool=(), index=None):
    if not msgs or len(msgs) >= MAX_REGION_MESSAGES:
        return None
    pos = rng.randrange(len(msgs)) if index is None else index
    return msgs[:pos + 1] + [msgs[pos]] + msgs[pos + 1:]


def msg_delete(msgs, rng, pool=(), index=None):
    if not msgs:
        return None
    pos = rng.randrange(len(msgs)) if index is None else index
    return msgs[:pos] + msgs[pos + 1:]


CLASSICAL_OPS: dict[str, Callable] = {
    "bitflip": _byte_op(_op_bitflip),
    "interest8": _byte_op(_op_interest8),
    "interest16": _byte_op(_op_interest16, 2),
    "interest32": _byte_op(_op_interest32, 4),
    "arith8": _byte_op(_arith(1)),
    "arith16": _byte_op(_arith(2), 2),
    "arith32": _byte_op(_arith(4), 4),
    "random_byte": _byte_op(_op_random_byte),
    "block_delete": _byte_op(_op_block_delete, 2),
    "block_insert": _byte_op(_op_block_insert, 0),
    "block_overwrite": _byte_op(_op_block_overwrite, 2),
    "msg_insert": msg_insert,
    "msg_replace": msg_replace,
    "msg_duplicate": msg_duplicate,
    "msg_delete": msg_delete,
}


def stack_depth(rng: random.Random, depth_max: int) -> int:
    return min(1 << rng.randrange(5), depth_max)


def classical_region(
    m2: list[bytes],
    rng: random.Random,
    depth_max: int = 16,
    pool: Sequence[bytes] = (),
    ops: Sequence[str] | None = None,
) -> list[bytes]:
    names = list(ops) if ops is not None else list(CLASSICAL_OPS)
    out = list(m2)
    for _ in range(stack_depth(rng, depth_max)):
        for _attempt in range(MAX_RETRIES):
            result = CLASSICAL_OPS[names[rng.randrange(len(names))]](out, rng, pool)
            if result is not None:
                out = result
                break
    return out


def classical_stack(
    seed: Seed,
    plan: MutationPlan,
    rng: random.Random,
    cfg: MutationConfig | None = None,
    ops: Sequence[str] | None = None,
) -> Seed:
    cfg = cfg or MutationConfig()
    _, m2, _ = plan.split(seed)
    return _reassemble(seed, plan, classical_region(m2, rng, cfg.stack_depth_max, plan.pool, ops))


# --- field stack -----------------------------------------------------------


def flip_field(message: bytes, f: FieldSpec) -> bytes:
    bits = read_field(message, f)
    return write_field(message, f, "".join("1" if b == "0" else "0" for b in bits))


def swap_field_bits(message: bytes, f: FieldSpec, i: int, j: int) -> bytes:
    bits = list(read_field(message, f))
    bits[i], bits[j] = bits[j], bits[i]
    return write_field(message, f, "".join(bits))


def overwrite_field(message: bytes, f: FieldSpec, value: str) -> bytes:
    return write_field(message, f, fit_bits(value, f.bit_len))


def applicable_fields(grammar: Grammar, message: bytes) -> list[FieldSpec]:
    """Grammar fields clipped to the message length."""
    n_bits = 8 * len(message)
    out = []
    for f in grammar.fields:
        if f.bit_start >= n_bits:
            continue
        if f.bit_end > n_bits:
            f = FieldSpec(f.name, f.bit_start, n_bits - f.bit_start)
        out.append(f)
    return out


def _random_window(message: bytes, rng: random.Random) -> FieldSpec:
    n_bits = 8 * len(message)
    start = rng.randrange(n_bits)
    return FieldSpec("", start, rng.randint(1, min(32, n_bits - start)))


def field_step(message: bytes, grammar: Grammar, rng: random.Random) -> bytes:
    fields = applicable_fields(grammar, message)
    f = fields[rng.randrange(len(fields))] if fields else _random_window(message, rng)
    values = grammar.values_for(f.name)
    ops = ["flip", "swap", "dict"] if values else ["flip", "swap"]
    op = ops[rng.randrange(len(ops))]
    if op == "swap" and f.bit_len >= 2:
        i, j = rng.sample(range(f.bit_len), 2)
        return swap_field_bits(message, f, i, j)
    if op == "dict":
        return overwrite_field(message, f, values[rng.randrange(len(values))])
    return flip_field(message, f)


def field_region(m2: list[bytes], grammar: Grammar, rng: random.Random, depth_max: int = 16) -> list[bytes]:
    out = list(m2)
    for _ in range(stack_depth(rng, depth_max)):
        k = _pick_message(out, rng)
        if k is None:
            break
        out[k] = field_step(out[k], grammar, rng)
    return out


def field_stack(seed: Seed, plan: MutationPlan, rng: random.Random, cfg: MutationConfig | None = None) -> Seed:
    if plan.grammar is None:
        raise NoGrammar("field mutations need a grammar")
    cfg = cfg or MutationConfig()
    _, m2, _ = plan.split(seed)
    return _reassemble(seed, plan, field_region(m2, plan.grammar, rng, cfg.stack_depth_max))


# --- dispatch --------------------------------------------------------------


def mutate_region(
    m2: list[bytes],
    grammar: Grammar | None,
    cfg: MutationConfig,
    rng: random.Random,
    pool: Sequence[bytes] = (),
) -> tuple[list[bytes], str]:
    """Mutate M2 with one stack step; also reports which family was used."""
    u = rng.random()
    if u < cfg.epsilon and grammar and any(m2):
        return field_region(m2, grammar, rng, cfg.stack_depth_max), "field"
    return classical_region(m2, rng, cfg.stack_depth_max, pool), "classical"


def mutate(seed: Seed, plan: MutationPlan, cfg: MutationConfig, rng: random.Random) -> Seed:
    _, m2, _ = plan.split(seed)
    new_m2, _ = mutate_region(m2, plan.grammar, cfg, rng, plan.pool)
    return _reassemble(seed, plan, new_m2)
