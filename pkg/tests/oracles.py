"""Independent reference implementations used to cross-check the library."""

from __future__ import annotations

import random

from statefuzz.message import FieldSpec


def bit_vector(m: bytes) -> list[int]:
    return [(m[i // 8] >> (7 - i % 8)) & 1 for i in range(8 * len(m))]


def from_bit_vector(vec: list[int]) -> bytes:
    return bytes(sum(vec[8 * k + j] << (7 - j) for j in range(8)) for k in range(len(vec) // 8))


def read_bits(m: bytes, start: int, length: int) -> str:
    return "".join(map(str, bit_vector(m)[start:start + length]))


def write_bits(m: bytes, start: int, length: int, bits: str) -> bytes:
    vec = bit_vector(m)
    vec[start:start + length] = [int(b) for b in bits]
    return from_bit_vector(vec)


def _span(fields: list[FieldSpec], i: int, j: int) -> tuple[int, int] | None:
    """(start, end) of fields[i..j] if they are gapless, else None."""
    for a, b in zip(fields[i:j], fields[i + 1:j + 1]):
        if a.bit_end != b.bit_start:
            return None
    return fields[i].bit_start, fields[j].bit_end


def classify(hyp: list[FieldSpec], truth: list[FieldSpec]) -> tuple[int, int, int, int, int]:
    """Pair every run of consecutive hypothesis fields with every run of truth fields."""
    g_l = l_mg = ml_g = 0
    for k, h in enumerate(hyp):
        h_span = (h.bit_start, h.bit_end)
        exact = any((t.bit_start, t.bit_end) == h_span for t in truth)
        merged = any(
            _span(truth, i, j) == h_span
            for i in range(len(truth)) for j in range(i + 1, len(truth))
        )
        split = any(
            _span(hyp, i, j) == (t.bit_start, t.bit_end)
            for i in range(len(hyp)) for j in range(i + 1, len(hyp)) if i <= k <= j
            for t in truth
        )
        if exact:
            g_l += 1
        elif merged:
            l_mg += 1
        elif split:
            ml_g += 1
    return g_l, l_mg, ml_g, len(hyp) - g_l - l_mg - ml_g, len(hyp)


def random_partition(rng: random.Random, n_bits: int = 64, max_fields: int = 6, prefix: str = "f") -> list[FieldSpec]:
    k = rng.randint(1, max_fields)
    cuts = sorted(rng.sample(range(1, n_bits), k - 1))
    bounds = [0, *cuts, n_bits]
    return [FieldSpec(f"{prefix}{i}", a, b - a) for i, (a, b) in enumerate(zip(bounds, bounds[1:]))]


def edge_slot(prev: int, cur: int, map_size: int = 1 << 16) -> int:
    return (cur ^ (prev >> 1)) % map_size
