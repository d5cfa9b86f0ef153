"""Messages, seeds, field grammars and their on-disk formats.

A message is a plain ``bytes`` object. Bit positions inside a message are
counted MSB-first: bit 0 is the most significant bit of byte 0, which is the
order protocol diagrams and packet dissectors draw fields in.

Bit-strings are ``str`` objects made of ``'0'`` and ``'1'``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from statefuzz.errors import (
    BadMagic,
    LengthMismatch,
    OutOfRange,
    Truncated,
    VersionMismatch,
)

Message = bytes

CORPUS_MAGIC = b"APFZ"
CORPUS_VERSION = 1

_U32 = struct.Struct("<I")


@dataclass
class SeedPerf:
    times_selected: int = 0
    coverage_gains: int = 0


@dataclass
class Seed:
    """An ordered request sequence plus the states it was last observed in."""

    messages: list[bytes]
    state_seq: list = field(default_factory=list)
    perf: SeedPerf = field(default_factory=SeedPerf)
    det_done: bool = False

    def __post_init__(self) -> None:
        self.messages = [bytes(m) for m in self.messages]
        if self.state_seq and len(self.state_seq) != len(self.messages):
            raise ValueError(
                f"state_seq has {len(self.state_seq)} entries for "
                f"{len(self.messages)} messages"
            )

    def with_messages(self, messages: Iterable[bytes]) -> "Seed":
        """New unexecuted seed carrying ``messages``."""
        return Seed(list(messages))

    def key(self) -> tuple[bytes, ...]:
        return tuple(self.messages)


@dataclass(frozen=True)
class FieldSpec:
    name: str
    bit_start: int
    bit_len: int

    def __post_init__(self) -> None:
        if self.bit_start < 0:
            raise ValueError(f"negative bit_start in field {self.name!r}")
        if self.bit_len < 1:
            raise ValueError(f"bit_len must be >= 1 in field {self.name!r}")

    @property
    def bit_end(self) -> int:
        return self.bit_start + self.bit_len

    def fits(self, message: bytes) -> bool:
        return self.bit_end <= 8 * len(message)

    def to_json(self) -> dict[str, Any]:
        return {"name": self.name, "bit_start": self.bit_start, "bit_len": self.bit_len}


@dataclass
class Grammar:
    protocol: str
    fields: list[FieldSpec] = field(default_factory=list)
    dictionary: dict[str, list[str]] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.fields)

    def values_for(self, name: str) -> list[str]:
        return self.dictionary.get(name, [])


def _check_range(message: bytes, f: FieldSpec) -> None:
    if f.bit_end > 8 * len(message):
        raise OutOfRange(
            f"field {f.name!r} [{f.bit_start}, {f.bit_end}) exceeds "
            f"{8 * len(message)}-bit message"
        )


def read_field(message: bytes, f: FieldSpec) -> str:
    """Return the bits ``[bit_start, bit_start + bit_len)`` of ``message``."""
    _check_range(message, f)
    first = f.bit_start // 8
    last = (f.bit_end - 1) // 8
    chunk = int.from_bytes(message[first:last + 1], "big")
    shift = 8 * (last + 1) - f.bit_end
    value = (chunk >> shift) & ((1 << f.bit_len) - 1)
    return format(value, f"0{f.bit_len}b")


def write_field(message: bytes, f: FieldSpec, bits: str) -> bytes:
    """Return a copy of ``message`` with the field overwritten by ``bits``."""
    if len(bits) != f.bit_len:
        raise LengthMismatch(f"{len(bits)} bits given for {f.bit_len}-bit field {f.name!r}")
    _check_range(message, f)
    first = f.bit_start // 8
    last = (f.bit_end - 1) // 8
    width = last + 1 - first
    chunk = int.from_bytes(message[first:last + 1], "big")
    shift = 8 * (last + 1) - f.bit_end
    mask = ((1 << f.bit_len) - 1) << shift
    chunk = (chunk & ~mask) | (int(bits, 2) << shift)
    return message[:first] + chunk.to_bytes(width, "big") + message[last + 1:]


def bits_of(message: bytes) -> str:
    return "".join(format(b, "08b") for b in message)


def bits_to_hex(bits: str) -> str:
    width = (len(bits) + 3) // 4
    return format(int(bits, 2), f"0{width}x") if bits else ""


def hex_to_bits(text: str) -> str:
    text = text.lower().removeprefix("0x")
    return "".join(format(int(ch, 16), "04b") for ch in text)


def fit_bits(bits: str, length: int) -> str:
    """Truncate from, or zero-pad at, the most significant end."""
    if len(bits) >= length:
        return bits[len(bits) - length:]
    return "0" * (length - len(bits)) + bits


# --- corpus files ---------------------------------------------------------


def dump_corpus(seeds: Iterable[Seed]) -> bytes:
    seeds = list(seeds)
    out = bytearray(CORPUS_MAGIC)
    out.append(CORPUS_VERSION)
    out += _U32.pack(len(seeds))
    for seed in seeds:
        out += _U32.pack(len(seed.messages))
        for m in seed.messages:
            out += _U32.pack(len(m))
            out += m
    return bytes(out)


def parse_corpus(data: bytes) -> list[Seed]:
    if len(data) < len(CORPUS_MAGIC) or data[:4] != CORPUS_MAGIC:
        raise BadMagic("corpus file does not start with b'APFZ'")
    if len(data) < 5:
        raise Truncated("missing version byte")
    if data[4] != CORPUS_VERSION:
        raise VersionMismatch(f"corpus version {data[4]}, expected {CORPUS_VERSION}")
    pos = 5

    def u32() -> int:
        nonlocal pos
        if pos + 4 > len(data):
            raise Truncated(f"length field at offset {pos} runs past end of file")
        (value,) = _U32.unpack_from(data, pos)
        pos += 4
        return value

    seeds = []
    for _ in range(u32()):
        messages = []
        for _ in range(u32()):
            n = u32()
            if pos + n > len(data):
                raise Truncated(f"message of {n} bytes at offset {pos} runs past end of file")
            messages.append(data[pos:pos + n])
            pos += n
        seeds.append(Seed(messages))
    return seeds


def save_corpus(seeds: Iterable[Seed], path: str | Path) -> None:
    Path(path).write_bytes(dump_corpus(seeds))


def load_corpus(path: str | Path) -> list[Seed]:
    """Load one corpus file, or every ``*.bin`` corpus file in a directory."""
    path = Path(path)
    if path.is_dir():
        seeds = []
        for p in sorted(path.glob("*.bin")):
            seeds.extend(parse_corpus(p.read_bytes()))
        return seeds
    return parse_corpus(path.read_bytes())


# --- grammar files --------------------------------------------------------


def grammar_to_json(g: Grammar) -> dict[str, Any]:
    return {
        "protocol": g.protocol,
        "fields": [f.to_json() for f in g.fields],
        "dictionary": {
            name: [bits_to_hex(v) for v in values] for name, values in g.dictionary.items()
        },
    }


def grammar_from_json(obj: dict[str, Any]) -> Grammar:
    fields = [FieldSpec(f["name"], int(f["bit_start"]), int(f["bit_len"])) for f in obj.get("fields", [])]
    dictionary = {
        name: [hex_to_bits(v) for v in values]
        for name, values in obj.get("dictionary", {}).items()
    }
    return Grammar(obj.get("protocol", ""), fields, dictionary)


def save_grammar(g: Grammar, path: str | Path) -> None:
    Path(path).write_text(json.dumps(grammar_to_json(g), indent=2) + "\n")


def load_grammar(path: str | Path) -> Grammar:
    return grammar_from_json(json.loads(Path(path).read_text()))
