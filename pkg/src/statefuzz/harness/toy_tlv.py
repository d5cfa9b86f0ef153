"""A binary type-length-value server with a length-confusion bug.

Wire format of every message::

    magic:16 (0x4D5A) | type:8 | length:16 (big-endian) | payload

A correct HELLO moves the connection from INIT to ESTABLISHED. In
ESTABLISHED, DATA and ECHO share one payload handler, which ignores empty
payloads and rejects declared lengths beyond the receive buffer. ECHO then
trusts the declared length instead of clamping it to the received payload,
which reads past the data when the declared length is larger. An unknown
type closes the session.
"""

from __future__ import annotations

import zlib
from enum import IntEnum

from statefuzz.harness.base import Target

MAGIC = 0x4D5A
HEADER_LEN = 5

# receive buffer size; larger declared lengths are rejected up front
MAX_DECLARED = 4096

HELLO = 0xA1
DATA = 0x89
# one bit swap away from DATA, but out of reach of small arithmetic steps and
# single bit flips from the other type codes and the interesting byte values
ECHO = 0xC8
BYE = 0xF0


class TlvState(IntEnum):
    INIT = 0
    ESTABLISHED = 1
    CLOSED = 2


VARIABLES = ("conn_state", "proto_version", "rx_bytes", "last_len_field", "msg_crc")
CONN_STATE, PROTO_VERSION, RX_BYTES, LAST_LEN_FIELD, MSG_CRC = range(len(VARIABLES))


def pack(msg_type: int, payload: bytes = b"", length: int | None = None, magic: int = MAGIC) -> bytes:
    if length is None:
        length = len(payload)
    return magic.to_bytes(2, "big") + bytes([msg_type]) + length.to_bytes(2, "big") + payload


class ToyTlv(Target):
    name = "toy-tlv"
    VARIABLES = VARIABLES
    BLOCKS = (
        "recv", "short", "bad_magic", "magic_ok", "closed_drop",
        "hello", "hello_ok", "hello_badlen", "init_reject",
        "rehello", "payload_handler", "empty_payload", "too_long", "copy_payload", "bye", "unknown_type",
    )

    def _reset(self) -> None:
        self.v = [TlvState.INIT, 2, 0, 0, 0]

    def read_vars(self) -> dict[int, object]:
        return dict(enumerate(self.v))

    def _process(self, msg: bytes) -> bytes:
        v = self.v
        self.hit("recv")
        v[RX_BYTES] += len(msg)
        v[MSG_CRC] = zlib.crc32(msg)
        if len(msg) < HEADER_LEN:
            self.hit("short")
            return b"\x00"
        if (msg[0] << 8 | msg[1]) != MAGIC:
            self.hit("bad_magic")
            return b"\x00"
        self.hit("magic_ok")
        msg_type = msg[2]
        declared = msg[3] << 8 | msg[4]
        payload = msg[HEADER_LEN:]
        v[LAST_LEN_FIELD] = declared
        state = v[CONN_STATE]

        if state == TlvState.CLOSED:
            self.hit("closed_drop")
            return b""
        if state == TlvState.INIT:
            if msg_type != HELLO:
                self.hit("init_reject")
                return b"\x01"
            self.hit("hello")
            if declared != len(payload):
                self.hit("hello_badlen")
                return b"\x02"
            self.hit("hello_ok")
            v[CONN_STATE] = TlvState.ESTABLISHED
            return b"\x10"

        # ESTABLISHED
        if msg_type == HELLO:
            self.hit("rehello")
            return b"\x03"
        if msg_type == DATA or msg_type == ECHO:
            self.hit("payload_handler")
            if not payload:
                self.hit("empty_payload")
                return b"\x05"
            if declared > MAX_DECLARED:
                self.hit("too_long")
                return b"\x06"
            # ECHO trusts the wire length, DATA clamps it
            n = (declared, min(declared, len(payload)))[msg_type == DATA]
            if n > len(payload):
                self.crash("len_confusion")
            # a single memcpy: no per-byte edges
            self.hit("copy_payload")
            return b"\x11"
        if msg_type == BYE:
            self.hit("bye")
            v[CONN_STATE] = TlvState.CLOSED
            return b"\x12"
        # protocol violation: the server drops the session
        self.hit("unknown_type")
        v[CONN_STATE] = TlvState.CLOSED
        return b"\x04"
