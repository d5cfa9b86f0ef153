import struct

import pytest
from hypothesis import given
from hypothesis import strategies as st

from statefuzz.errors import BadMagic, LengthMismatch, OutOfRange, Truncated, VersionMismatch
from statefuzz.message import (
    FieldSpec,
    Grammar,
    Seed,
    bits_of,
    dump_corpus,
    fit_bits,
    grammar_from_json,
    grammar_to_json,
    load_corpus,
    load_grammar,
    parse_corpus,
    read_field,
    save_corpus,
    save_grammar,
    write_field,
)

from oracles import read_bits as oracle_read
from oracles import write_bits as oracle_write


@st.composite
def message_and_field(draw, max_len=4):
    m = draw(st.binary(min_size=1, max_size=max_len))
    n = 8 * len(m)
    start = draw(st.integers(0, n - 1))
    length = draw(st.integers(1, n - start))
    return m, FieldSpec("f", start, length)


class TestReadWrite:
    def test_low_nibble(self):
        assert read_field(b"\x0f", FieldSpec("f", 4, 4)) == "1111"

    def test_msb(self):
        assert read_field(b"\x80", FieldSpec("f", 0, 1)) == "1"

    def test_straddling_bytes(self):
        # 1010010100111100, bits 6..9
        assert read_field(b"\xa5\x3c", FieldSpec("f", 6, 4)) == "0100"

    def test_write_examples(self):
        assert write_field(b"\x00", FieldSpec("f", 4, 4), "1111") == b"\x0f"
        assert write_field(b"\xff", FieldSpec("f", 0, 8), "00000000") == b"\x00"

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            read_field(b"\x00", FieldSpec("f", 4, 5))
        with pytest.raises(OutOfRange):
            write_field(b"\x00", FieldSpec("f", 8, 1), "1")

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            write_field(b"\x00", FieldSpec("f", 0, 4), "111")

    def test_fieldspec_validation(self):
        with pytest.raises(ValueError):
            FieldSpec("f", -1, 4)
        with pytest.raises(ValueError):
            FieldSpec("f", 0, 0)

    @given(message_and_field())
    def test_read_matches_bit_vector(self, mf):
        m, f = mf
        assert read_field(m, f) == oracle_read(m, f.bit_start, f.bit_len)

    @given(message_and_field(), st.data())
    def test_write_matches_bit_vector(self, mf, data):
        m, f = mf
        bits = data.draw(st.text("01", min_size=f.bit_len, max_size=f.bit_len))
        out = write_field(m, f, bits)
        assert out == oracle_write(m, f.bit_start, f.bit_len, bits)
        assert read_field(out, f) == bits

    @given(message_and_field(max_len=32))
    def test_write_own_value_is_identity(self, mf):
        m, f = mf
        assert write_field(m, f, read_field(m, f)) == m


def test_fit_bits():
    assert fit_bits("1", 4) == "0001"
    assert fit_bits("110101", 4) == "0101"
    assert fit_bits("1010", 4) == "1010"


class TestCorpus:
    def test_empty(self):
        data = b"APFZ\x01" + struct.pack("<I", 0)
        assert parse_corpus(data) == []

    def test_round_trip(self, tmp_path):
        seeds = [Seed([b"USER a\r\n", b"PASS b\r\n"])]
        save_corpus(seeds, tmp_path / "c.bin")
        back = load_corpus(tmp_path / "c.bin")
        assert [s.messages for s in back] == [s.messages for s in seeds]

    def test_layout(self):
        raw = dump_corpus([Seed([b"ab", b""])])
        assert raw == b"APFZ\x01" + struct.pack("<IIIcc", 1, 2, 2, b"a", b"b") + struct.pack("<I", 0)

    def test_truncated(self):
        raw = dump_corpus([Seed([b"hello"])])
        with pytest.raises(Truncated):
            parse_corpus(raw[:-1])
        with pytest.raises(Truncated):
            parse_corpus(raw[:7])

    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            parse_corpus(b"XXXX\x01\x00\x00\x00\x00")

    def test_version(self):
        with pytest.raises(VersionMismatch):
            parse_corpus(b"APFZ\x02\x00\x00\x00\x00")

    def test_directory(self, tmp_path):
        save_corpus([Seed([b"a"])], tmp_path / "1.bin")
        save_corpus([Seed([b"b"]), Seed([])], tmp_path / "2.bin")
        assert [s.messages for s in load_corpus(tmp_path)] == [[b"a"], [b"b"], []]

    @given(st.lists(st.lists(st.binary(max_size=40), max_size=6), max_size=6))
    def test_round_trip_property(self, raw):
        seeds = parse_corpus(dump_corpus([Seed(m) for m in raw]))
        assert [s.messages for s in seeds] == raw


def test_seed_state_seq_length_checked():
    with pytest.raises(ValueError):
        Seed([b"a", b"b"], ["S"])


def test_grammar_json_round_trip(tmp_path):
    g = Grammar("p", [FieldSpec("magic", 0, 16), FieldSpec("t", 16, 4)], {"magic": [bits_of(b"\x4d\x5a")], "t": ["0101"]})
    assert grammar_to_json(g)["dictionary"] == {"magic": ["4d5a"], "t": ["5"]}
    save_grammar(g, tmp_path / "g.json")
    assert load_grammar(tmp_path / "g.json") == g
    assert grammar_from_json({"fields": []}) == Grammar("")
