"""Learning field grammars from seed messages with an LLM, and scoring them.

Each distinct seed message is rendered as a bit string and sent to a language
model together with one labelled example. The model answers with a JSON
array of ``{name, bit_start, bit_len}`` objects, which is validated into
:class:`FieldSpec` lists and merged into one :class:`Grammar`.

The evaluator compares a hypothesised field list against ground truth. Each
hypothesis field is counted in exactly one of four buckets:

``g_l``
    same bit boundaries as one truth field;
``l_mg``
    spans exactly two or more adjacent truth fields;
``ml_g``
    belongs to a gapless run of two or more hypothesis fields that together
    tile one truth field;
``mismatch``
    anything else.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import urllib.request
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

from statefuzz.errors import FuzzError, NoParse, UnsortedInput
from statefuzz.message import FieldSpec, Grammar, Seed, bits_of, read_field

log = logging.getLogger(__name__)


class LlmError(FuzzError):
    """The model endpoint failed or returned nothing usable."""


class LlmClient(ABC):
    @abstractmethod
    def complete(self, prompt: str) -> str: ...


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode()).hexdigest()


class OfflineClient(LlmClient):
    """Replays recorded answers stored as ``<sha256 of prompt>.json`` files.

    Each file holds ``{"prompt": ..., "response": ...}``. Never touches the
    network; an unknown prompt raises :class:`LlmError`.
    """

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)

    def complete(self, prompt: str) -> str:
        path = self.directory / f"{prompt_key(prompt)}.json"
        if not path.exists():
            raise LlmError(f"no recorded transcript for prompt {path.stem[:12]}")
        return json.loads(path.read_text())["response"]


def record_transcript(directory: str | Path, prompt: str, response: str) -> Path:
    path = Path(directory) / f"{prompt_key(prompt)}.json"
    path.write_text(json.dumps({"prompt": prompt, "response": response}, indent=2) + "\n")
    return path


class HttpClient(LlmClient):
    """Chat-completions style endpoint reached with ``urllib``."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        token_env: str = "STATEFUZZ_LLM_TOKEN",
        temperature: float = 0.0,
        timeout: float = 60.0,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.token = os.environ.get(token_env, "")
        self.temperature = temperature
        self.timeout = timeout

    def complete(self, prompt: str) -> str:
        body = json.dumps({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }).encode()
        req = urllib.request.Request(self.endpoint, data=body, method="POST")
        req.add_header("Content-Type", "application/json")
        if self.token:
            req.add_header("Authorization", f"Bearer {self.token}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                answer = json.load(resp)
            return answer["choices"][0]["message"]["content"]
        except (OSError, KeyError, IndexError, ValueError) as exc:
            raise LlmError(str(exc)) from exc


# --- prompting -------------------------------------------------------------

_EXAMPLE_MESSAGE = bytes.fromhex("abcd0100000100000000000a")
_EXAMPLE_FIELDS = [
    FieldSpec("id", 0, 16),
    FieldSpec("flags", 16, 16),
    FieldSpec("qdcount", 32, 16),
    FieldSpec("ancount", 48, 16),
    FieldSpec("nscount", 64, 16),
    FieldSpec("arcount", 80, 16),
]


def build_prompt(protocol_name: str, message: bytes) -> str:
    example = json.dumps([f.to_json() for f in _EXAMPLE_FIELDS])
    return (
        "You are an expert in network protocol reverse engineering.\n"
        "Split a binary message into its fields. Bits are numbered from 0, "
        "starting at the most significant bit of the first byte.\n\n"
        "Example message (12 bytes):\n"
        f"{bits_of(_EXAMPLE_MESSAGE)}\n"
        f"Fields:\n{example}\n\n"
        f"Protocol: {protocol_name}\n"
        f"Message ({len(message)} bytes):\n"
        f"{bits_of(message)}\n"
        "Answer with a JSON array only. Each element is an object with keys "
        '"name", "bit_start" and "bit_len".\n'
    )


def _first_array(text: str) -> list | None:
    decoder = json.JSONDecoder()
    pos = text.find("[")
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(text, pos)
        except ValueError:
            obj = None
        if isinstance(obj, list):
            return obj
        pos = text.find("[", pos + 1)
    return None


def parse_response(text: str, n_bits: int | None = None) -> list[FieldSpec]:
    """Validated, sorted, non-overlapping fields from a model answer."""
    items = _first_array(text)
    if items is None:
        raise NoParse("no JSON array in response")
    fields = []
    for item in items:
        try:
            f = FieldSpec(str(item["name"]), int(item["bit_start"]), int(item["bit_len"]))
        except (KeyError, TypeError, ValueError) as exc:
            log.info("dropping malformed field entry %r: %s", item, exc)
            continue
        fields.append(f)
    fields.sort(key=lambda f: (f.bit_start, f.bit_len))
    kept: list[FieldSpec] = []
    for f in fields:
        if n_bits is not None and f.bit_end > n_bits:
            log.info("dropping %s: ends at bit %d of %d", f.name, f.bit_end, n_bits)
        elif kept and f.bit_start < kept[-1].bit_end:
            log.info("dropping %s: overlaps %s", f.name, kept[-1].name)
        else:
            kept.append(f)
    if items and not kept:
        raise NoParse("no valid field in response")
    return kept


# --- evaluation ------------------------------------------------------------


@dataclass(frozen=True)
class MatchReport:
    g_l: int = 0
    l_mg: int = 0
    ml_g: int = 0
    mismatch: int = 0
    total: int = 0

    def to_json(self) -> dict:
        return asdict(self)


def _check_sorted(fields: Sequence[FieldSpec], what: str) -> None:
    for a, b in zip(fields, fields[1:]):
        if b.bit_start < a.bit_end:
            raise UnsortedInput(f"{what} fields {a.name!r} and {b.name!r} are unsorted or overlap")


def _gapless(fields: Sequence[FieldSpec]) -> bool:
    return all(a.bit_end == b.bit_start for a, b in zip(fields, fields[1:]))


def classify_fields(hypothesis: Sequence[FieldSpec], truth: Sequence[FieldSpec]) -> MatchReport:
    _check_sorted(hypothesis, "hypothesis")
    _check_sorted(truth, "truth")
    exact = {(t.bit_start, t.bit_len) for t in truth}
    starts = {t.bit_start: i for i, t in enumerate(truth)}

    def spans_truth_run(h: FieldSpec) -> bool:
        i = starts.get(h.bit_start)
        if i is None:
            return False
        j = i
        while j < len(truth) and truth[j].bit_end < h.bit_end:
            if j + 1 < len(truth) and truth[j + 1].bit_start != truth[j].bit_end:
                return False
            j += 1
        return j < len(truth) and j > i and truth[j].bit_end == h.bit_end

    # hypothesis fields that tile one truth field in groups of two or more
    tiled: set[int] = set()
    for t in truth:
        inside = [i for i, h in enumerate(hypothesis) if h.bit_start >= t.bit_start and h.bit_end <= t.bit_end]
        if len(inside) < 2:
            continue
        run = [hypothesis[i] for i in inside]
        if run[0].bit_start == t.bit_start and run[-1].bit_end == t.bit_end and _gapless(run):
            tiled.update(inside)

    g_l = l_mg = ml_g = 0
    for i, h in enumerate(hypothesis):
        if (h.bit_start, h.bit_len) in exact:
            g_l += 1
        elif spans_truth_run(h):
            l_mg += 1
        elif i in tiled:
            ml_g += 1
    total = len(hypothesis)
    return MatchReport(g_l, l_mg, ml_g, total - g_l - l_mg - ml_g, total)


def accuracy(report: MatchReport) -> dict[str, float]:
    if report.total == 0:
        return {"exact_acc": 0.0, "multi_acc": 0.0}
    return {
        "exact_acc": report.g_l / report.total,
        "multi_acc": (report.g_l + report.l_mg + report.ml_g) / report.total,
    }


def load_fields(path: str | Path) -> list[FieldSpec]:
    """Fields of a grammar JSON file, sorted by start bit."""
    from statefuzz.message import load_grammar

    return sorted(load_grammar(path).fields, key=lambda f: f.bit_start)


# --- learning --------------------------------------------------------------


def _merge(fields: list[FieldSpec], new: Iterable[FieldSpec]) -> list[FieldSpec]:
    merged = {(f.name, f.bit_start): f for f in fields}
    for f in new:
        key = (f.name, f.bit_start)
        old = merged.get(key)
        candidate = f if old is None else FieldSpec(f.name, f.bit_start, max(old.bit_len, f.bit_len))
        others = [g for k, g in merged.items() if k != key]
        if any(g.bit_start < candidate.bit_end and candidate.bit_start < g.bit_end for g in others):
            log.info("skipping %s: overlaps an already learned field", f.name)
            continue
        merged[key] = candidate
    return sorted(merged.values(), key=lambda f: f.bit_start)


def harvest_dictionary(fields: Sequence[FieldSpec], messages: Iterable[bytes]) -> dict[str, list[str]]:
    """Distinct values each field holds across ``messages``, in first-seen order."""
    dictionary: dict[str, list[str]] = {f.name: [] for f in fields}
    seen: dict[str, set[str]] = {f.name: set() for f in fields}
    for m in messages:
        for f in fields:
            if not f.fits(m):
                continue
            v = read_field(m, f)
            if v not in seen[f.name]:
                seen[f.name].add(v)
                dictionary[f.name].append(v)
    return {k: v for k, v in dictionary.items() if v}


def learn_grammar(
    client: LlmClient,
    protocol_name: str,
    seeds: Sequence[Seed],
    attempts: int = 3,
) -> Grammar:
    """Ask ``client`` about every distinct seed message and merge the answers.

    Returns an empty grammar when no message could be parsed, so callers fall
    back to classical mutation.
    """
    messages = list(dict.fromkeys(m for s in seeds for m in s.messages if m))
    fields: list[FieldSpec] = []
    parsed_any = False
    for m in messages:
        prompt = build_prompt(protocol_name, m)
        for attempt in range(attempts):
            try:
                got = parse_response(client.complete(prompt), 8 * len(m))
            except (NoParse, LlmError) as exc:
                log.info("attempt %d for a %d-byte message failed: %s", attempt + 1, len(m), exc)
                continue
            fields = _merge(fields, got)
            parsed_any = True
            break
    if not parsed_any:
        log.warning("no message could be interpreted; continuing without a grammar")
        return Grammar(protocol_name)
    return Grammar(protocol_name, fields, harvest_dictionary(fields, messages))
