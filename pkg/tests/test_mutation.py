import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from statefuzz.errors import NoGrammar
from statefuzz.message import FieldSpec, Grammar, Seed, bits_of
from statefuzz.mutation import (
    CLASSICAL_OPS,
    DETERMINISTIC_STAGES,
    EFFECTOR_STAGES,
    INTERESTING,
    MutationConfig,
    MutationPlan,
    classical_stack,
    deterministic_mutants,
    deterministic_stage,
    field_stack,
    flip_field,
    mutate,
    mutate_region,
    overwrite_field,
    swap_field_bits,
)

SEED = Seed([b"m1", b"AB", b"m3"])
PLAN = MutationPlan(range(1, 2))


def flip_oracle(data: bytes, width: int) -> list[bytes]:
    bits = bits_of(data)
    out = []
    for i in range(len(bits) - width + 1):
        v = bits[:i] + "".join("1" if b == "0" else "0" for b in bits[i:i + width]) + bits[i + width:]
        out.append(int(v, 2).to_bytes(len(data), "big") if data else b"")
    return out


def stage_mutants(data: bytes, stage: str) -> list[bytes]:
    seed = Seed([data])
    return [d.seed.messages[0] for d in deterministic_mutants(seed, MutationPlan(range(0, 1)), (stage,))]


class TestDeterministic:
    def test_single_zero_byte_flip1(self):
        assert stage_mutants(b"\x00", "flip1") == [bytes([0x80 >> i]) for i in range(8)]

    def test_empty_message(self):
        assert list(deterministic_stage(Seed([b""]), MutationPlan(range(0, 1)))) == []

    def test_two_bytes_flip1_count(self):
        assert len(stage_mutants(b"AB", "flip1")) == 16

    @given(st.binary(min_size=1, max_size=6), st.sampled_from([1, 2, 4, 8]))
    def test_flips_match_bit_string_oracle(self, data, width):
        got = stage_mutants(data, f"flip{width}")
        if width == 8:
            assert got == [data[:i] + bytes([data[i] ^ 0xFF]) + data[i + 1:] for i in range(len(data))]
        else:
            assert got == flip_oracle(data, width)

    @given(st.binary(min_size=1, max_size=6))
    def test_arith_and_interest_counts(self, data):
        n = len(data)
        for width in (1, 2, 4):
            assert len(stage_mutants(data, f"arith{8 * width}")) == 2 * max(0, n - width + 1)
            values = [v for v in INTERESTING if v < 1 << (8 * width)]
            expected = sum(
                1 for pos in range(n - width + 1) for v in values
                if data[pos:pos + width] != v.to_bytes(width, "big")
            )
            assert len(stage_mutants(data, f"interest{8 * width}")) == expected

    def test_arith_wraps(self):
        assert stage_mutants(b"\xff", "arith8") == [b"\x00", b"\xfe"]

    def test_only_region_touched(self):
        for mutant in deterministic_stage(SEED, PLAN):
            assert mutant.messages[0] == b"m1" and mutant.messages[2] == b"m3"
            assert len(mutant.messages) == 3

    def test_effector_skips_ineffective_bytes(self):
        seed = Seed([b"\x00\x00\x00"])
        plan = MutationPlan(range(0, 1))
        full = list(deterministic_mutants(seed, plan, EFFECTOR_STAGES))
        gated = list(deterministic_mutants(seed, plan, EFFECTOR_STAGES, effective=lambda k, pos: pos == 1))
        assert [d.stage for d in gated[:3]] == ["flip8"] * 3
        widths = {"arith8": 1, "arith16": 2, "arith32": 4, "interest8": 1, "interest16": 2, "interest32": 4}
        for d in gated[3:]:
            if d.stage.startswith("flip"):
                changed = [i for i in range(3) if d.seed.messages[0][i]]
                assert 1 in changed
            else:
                assert d.pos <= 1 < d.pos + widths[d.stage]
        assert len(gated) < len(full)
        assert {d.seed.key() for d in gated} <= {d.seed.key() for d in full}

    def test_stage_order_constants(self):
        assert set(EFFECTOR_STAGES) == set(DETERMINISTIC_STAGES)
        assert DETERMINISTIC_STAGES[:4] == ("flip1", "flip2", "flip4", "flip8")


class TestClassical:
    def test_forced_duplicate(self):
        out = classical_stack(Seed([b"A"]), MutationPlan(range(0, 1)), random.Random(0), MutationConfig(stack_depth_max=1), ["msg_duplicate"])
        assert out.messages == [b"A", b"A"]

    def test_delete_at_index(self):
        assert CLASSICAL_OPS["msg_delete"]([b"A", b"B"], random.Random(0), index=0) == [b"B"]

    def test_unapplicable_op_falls_back_to_identity(self):
        out = classical_stack(Seed([b"x", b"A"]), MutationPlan(range(1, 2)), random.Random(0), ops=["msg_insert"])
        assert out.messages == [b"x", b"A"]  # empty pool: insert never applies

    def test_fixed_seed_is_deterministic(self, ftp_corpus):
        seed = ftp_corpus[0]
        plan = MutationPlan(range(1, 3), pool=[m for s in ftp_corpus for m in s.messages])
        a = [classical_stack(seed, plan, random.Random(42)).messages for _ in range(3)]
        assert a[0] == a[1] == a[2]

    @given(st.lists(st.binary(max_size=20), min_size=1, max_size=6), st.integers(0, 2**32), st.data())
    def test_prefix_and_suffix_untouched(self, msgs, rng_seed, data):
        i = data.draw(st.integers(0, len(msgs) - 1))
        j = data.draw(st.integers(i, len(msgs)))
        plan = MutationPlan(range(i, j), pool=[b"POOL"])
        out = mutate(Seed(msgs), plan, MutationConfig(epsilon=0.0), random.Random(rng_seed))
        assert out.messages[:i] == msgs[:i]
        assert out.messages[len(out.messages) - (len(msgs) - j):] == msgs[j:]
        assert all(isinstance(m, bytes) for m in out.messages)


GRAMMAR = Grammar("t", [FieldSpec("hdr", 0, 8), FieldSpec("qtype", 8, 16)], {"qtype": ["1"]})


class TestField:
    def test_flip_example(self):
        assert flip_field(b"\x00", FieldSpec("f", 2, 3)) == b"\x38"

    def test_swap_equal_bits(self):
        assert swap_field_bits(b"\x0f", FieldSpec("f", 0, 8), 0, 1) == b"\x0f"

    def test_overwrite_example(self):
        assert overwrite_field(b"\x00\x00", FieldSpec("qtype", 0, 16), "0000000000000001") == b"\x00\x01"
        # shorter dictionary values are zero-padded at the top
        assert overwrite_field(b"\xff\xff", FieldSpec("qtype", 0, 16), "1") == b"\x00\x01"

    def test_no_grammar(self):
        with pytest.raises(NoGrammar):
            field_stack(SEED, PLAN, random.Random(0))

    @given(st.lists(st.binary(min_size=0, max_size=12), min_size=1, max_size=4), st.integers(0, 2**32))
    def test_lengths_preserved(self, msgs, rng_seed):
        plan = MutationPlan(range(0, len(msgs)), GRAMMAR)
        out = field_stack(Seed(msgs), plan, random.Random(rng_seed))
        assert [len(m) for m in out.messages] == [len(m) for m in msgs]

    def test_field_ops_stay_inside_fields(self):
        g = Grammar("t", [FieldSpec("type", 16, 8)], {})
        rng = random.Random(3)
        base = b"\x4d\x5a\x01\x00\x05hello"
        for _ in range(200):
            out = field_stack(Seed([base]), MutationPlan(range(0, 1), g), rng).messages[0]
            assert out[:2] == base[:2] and out[3:] == base[3:]


class TestDispatch:
    def test_epsilon_zero_is_classical(self):
        rng = random.Random(0)
        assert all(mutate_region([b"abc"], GRAMMAR, MutationConfig(0.0), rng)[1] == "classical" for _ in range(200))

    def test_epsilon_one_is_field(self):
        rng = random.Random(0)
        assert all(mutate_region([b"abc"], GRAMMAR, MutationConfig(1.0), rng)[1] == "field" for _ in range(200))

    def test_no_grammar_is_classical(self):
        rng = random.Random(0)
        assert all(mutate_region([b"abc"], None, MutationConfig(1.0), rng)[1] == "classical" for _ in range(50))

    def test_epsilon_half_rate(self):
        rng = random.Random(7)
        n = 10_000
        fields = sum(mutate_region([b"abc"], GRAMMAR, MutationConfig(0.5), rng)[1] == "field" for _ in range(n))
        assert abs(fields - 5000) <= 150

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MutationConfig(epsilon=1.5)
        with pytest.raises(ValueError):
            MutationConfig(stack_depth_max=0)

    def test_invalid_region(self):
        with pytest.raises(ValueError):
            mutate(SEED, MutationPlan(range(2, 5)), MutationConfig(), random.Random(0))
