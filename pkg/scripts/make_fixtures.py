"""Regenerate the data files shipped under src/statefuzz/fixtures/.

    python3 scripts/make_fixtures.py

Everything here is computed directly from the byte layouts written out
below, not through the library's own grammar learner, so the shipped files
can serve as independent reference data in the tests.
"""

from __future__ import annotations

import json
from pathlib import Path

from statefuzz.grammar import build_prompt, record_transcript
from statefuzz.harness.toy_tlv import BYE, DATA, HELLO, HEADER_LEN, pack
from statefuzz.message import Seed, save_corpus

ROOT = Path(__file__).resolve().parent.parent / "src" / "statefuzz" / "fixtures"


def dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


# --- toy-ftp ---------------------------------------------------------------

# most sessions never log in, as in captured traffic where failed or
# aborted logins dominate; only one reaches RETR
FTP_SEEDS = [
    [b"USER alice\r\n", b"PASS s3cret\r\n", b"RETR report.txt\r\n", b"QUIT\r\n"],
    [b"USER bob\r\n", b"QUIT\r\n"],
    [b"QUIT\r\n"],
    [b"SYST\r\n", b"USER carol\r\n", b"QUIT\r\n"],
    [b"NOOP\r\n", b"HELP\r\n", b"USER dave\r\n", b"QUIT\r\n"],
    [b"FEAT\r\n", b"USER frank\r\n", b"CWD /\r\n"],
    [b"USER anonymous\r\n", b"LIST\r\n"],
    [b"HELP USER\r\n", b"NOOP\r\n", b"QUIT\r\n"],
    [b"USER grace\r\n", b"USER grace\r\n"],
    [b"STAT\r\n", b"QUIT\r\n"],
]

# command class -> next state, per state; "*" is any other line
FTP_FSM = {
    "states": ["INIT", "AUTH_WAIT_PASS", "LOGGED_IN", "CLOSED"],
    "initial": "INIT",
    "transitions": [
        {"from": "INIT", "on": "USER", "to": "AUTH_WAIT_PASS"},
        {"from": "INIT", "on": "QUIT", "to": "CLOSED"},
        {"from": "INIT", "on": "*", "to": "INIT"},
        {"from": "AUTH_WAIT_PASS", "on": "PASS", "to": "LOGGED_IN"},
        {"from": "AUTH_WAIT_PASS", "on": "QUIT", "to": "CLOSED"},
        {"from": "AUTH_WAIT_PASS", "on": "*", "to": "CLOSED"},
        {"from": "LOGGED_IN", "on": "QUIT", "to": "CLOSED"},
        {"from": "LOGGED_IN", "on": "*", "to": "LOGGED_IN"},
        {"from": "CLOSED", "on": "*", "to": "CLOSED"},
    ],
}


# --- toy-tlv ---------------------------------------------------------------

def _payload(n: int, salt: int) -> bytes:
    alphabet = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"
    return bytes(alphabet[(i * 7 + salt) % len(alphabet)] for i in range(n))


TLV_SEEDS = [
    [pack(HELLO, b"client-v2"), pack(DATA, _payload(64, 0)), pack(BYE)],
    [pack(HELLO, b"client-v2"), pack(DATA, _payload(48, 5)), pack(DATA, _payload(32, 11)), pack(BYE)],
]


def tlv_fields(message: bytes) -> list[dict]:
    fields = [
        {"name": "magic", "bit_start": 0, "bit_len": 16},
        {"name": "type", "bit_start": 16, "bit_len": 8},
        {"name": "length", "bit_start": 24, "bit_len": 16},
    ]
    if len(message) > HEADER_LEN:
        fields.append({"name": "payload", "bit_start": 40, "bit_len": 8 * (len(message) - HEADER_LEN)})
    return fields


def tlv_grammar(seeds) -> dict:
    messages = list(dict.fromkeys(m for s in seeds for m in s))
    longest = max(len(m) for m in messages)
    slices = {"magic": (0, 2), "type": (2, 3), "length": (3, 5), "payload": (5, longest)}
    dictionary: dict[str, list[str]] = {k: [] for k in slices}
    for m in messages:
        for name, (a, b) in slices.items():
            if len(m) >= b:
                v = m[a:b].hex()
                if v not in dictionary[name]:
                    dictionary[name].append(v)
    return {
        "protocol": "toy-tlv",
        "fields": [
            {"name": "magic", "bit_start": 0, "bit_len": 16},
            {"name": "type", "bit_start": 16, "bit_len": 8},
            {"name": "length", "bit_start": 24, "bit_len": 16},
            {"name": "payload", "bit_start": 40, "bit_len": 8 * (longest - HEADER_LEN)},
        ],
        "dictionary": dictionary,
    }


# --- dns classification counts --------------------------------------------

def dns_table() -> tuple[dict, dict]:
    """Truth/hypothesis field lists with 54 exact, 21 split and 6 misaligned fields."""
    truth, hyp = [], []
    pos = 0

    def add(lst, name, n):
        lst.append({"name": name, "bit_start": pos, "bit_len": n})

    for i in range(54):
        add(truth, f"t{i}", 16)
        add(hyp, f"h{i}", 16)
        pos += 16
    # seven 24-bit truth fields, each split into three 8-bit hypothesis fields
    for i in range(7):
        add(truth, f"s{i}", 24)
        for k in range(3):
            hyp.append({"name": f"s{i}_{k}", "bit_start": pos + 8 * k, "bit_len": 8})
        pos += 24
    # two pairs of 8-bit truth fields whose boundaries the hypothesis misses
    for i in range(2):
        truth.append({"name": f"a{i}", "bit_start": pos, "bit_len": 8})
        truth.append({"name": f"b{i}", "bit_start": pos + 8, "bit_len": 8})
        hyp.append({"name": f"m{i}_0", "bit_start": pos, "bit_len": 4})
        hyp.append({"name": f"m{i}_1", "bit_start": pos + 4, "bit_len": 8})
        hyp.append({"name": f"m{i}_2", "bit_start": pos + 12, "bit_len": 4})
        pos += 16
    wrap = lambda fields: {"protocol": "dns", "fields": fields, "dictionary": {}}
    return wrap(hyp), wrap(truth)


def main() -> None:
    ftp = ROOT / "toy_ftp"
    tlv = ROOT / "toy_tlv"
    dns = ROOT / "dns_layout"
    llm = tlv / "llm"
    for d in (ftp, tlv, dns, llm):
        d.mkdir(parents=True, exist_ok=True)

    save_corpus([Seed(s) for s in FTP_SEEDS], ftp / "corpus.bin")
    dump(FTP_FSM, ftp / "fsm.json")

    save_corpus([Seed(s) for s in TLV_SEEDS], tlv / "corpus.bin")
    dump(tlv_grammar(TLV_SEEDS), tlv / "grammar.json")
    for old in llm.glob("*.json"):
        old.unlink()
    for m in dict.fromkeys(m for s in TLV_SEEDS for m in s):
        answer = "Here is the field layout:\n" + json.dumps(tlv_fields(m))
        record_transcript(llm, build_prompt("toy-tlv", m), answer)

    hyp, truth = dns_table()
    dump(hyp, dns / "hypothesis.json")
    dump(truth, dns / "truth.json")


if __name__ == "__main__":
    main()
