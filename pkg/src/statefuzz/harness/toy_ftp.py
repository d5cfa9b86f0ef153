"""A small FTP-like text server with one deep-state bug.

Protocol states are INIT, AUTH_WAIT_PASS, LOGGED_IN and CLOSED. The server
is strict about the login sequence: anything but PASS or QUIT after USER
drops the session. ``RETR`` copies its argument into a 64-byte buffer, so an
argument longer than that crashes the server, but only once logged in.

Besides ``session_state`` the server registers 20 decoy variables that a
state-variable miner has to reject: constants, two-valued flags, counters
and hashes that take many values, and one error code whose extra values are
rare.
"""

from __future__ import annotations

import zlib
from enum import IntEnum

from statefuzz.harness.base import Target

RETR_BUFFER = 64
PROTECTED_PREFIX = b"/etc/"
# Telnet "interrupt process" + "data mark" (IAC IP IAC DM), the urgent
# sequence an FTP client sends ahead of ABOR
TELNET_IP = b"\xff\xf4\xff\xf2"


class FtpState(IntEnum):
    INIT = 0
    AUTH_WAIT_PASS = 1
    LOGGED_IN = 2
    CLOSED = 3


VARIABLES = (
    "session_state",
    "server_version",
    "max_clients",
    "greeting_sent",
    "peer_port",
    "is_anonymous",
    "data_conn_open",
    "binary_mode",
    "auth_failed",
    "bytes_in",
    "last_byte",
    "last_msg_len",
    "arg_len",
    "line_checksum",
    "session_nonce",
    "state_buf_ptr",
    "step_ticks",
    "last_error",
    "xfer_bytes",
    "cmd_hash",
    "user_name_hash",
)

# indices into the variable table
(
    SESSION_STATE, SERVER_VERSION, MAX_CLIENTS, GREETING_SENT, PEER_PORT,
    IS_ANONYMOUS, DATA_CONN_OPEN, BINARY_MODE, AUTH_FAILED, BYTES_IN,
    LAST_BYTE, LAST_MSG_LEN, ARG_LEN, LINE_CHECKSUM, SESSION_NONCE,
    STATE_BUF_PTR, STEP_TICKS, LAST_ERROR, XFER_BYTES, CMD_HASH, USER_NAME_HASH,
) = range(len(VARIABLES))

ERR_NONE = 0
ERR_SYNTAX = 1
ERR_PATH = 2
ERR_CONTROL = 3


class ToyFtp(Target):
    name = "toy-ftp"
    VARIABLES = VARIABLES
    BLOCKS = (
        "recv", "closed_drop", "parse_cmd", "empty_line",
        "user", "user_arg", "init_quit", "init_other",
        "pass", "pass_arg", "pass_empty", "awp_quit", "awp_violation",
        "list", "list_arg", "retr", "retr_scan", "retr_bin", "li_quit",
        "li_relogin", "li_other", "path_denied", "ctrl_char",
    )

    def _reset(self) -> None:
        v = [0] * len(VARIABLES)
        v[SESSION_STATE] = FtpState.INIT
        v[SERVER_VERSION] = 3
        v[MAX_CLIENTS] = 10
        v[GREETING_SENT] = 1
        v[PEER_PORT] = 2121
        v[STATE_BUF_PTR] = 0x1000
        self.v = v

    def read_vars(self) -> dict[int, object]:
        return dict(enumerate(self.v))

    @property
    def state(self) -> FtpState:
        return self.v[SESSION_STATE]

    def _process(self, msg: bytes) -> bytes:
        v = self.v
        self.hit("recv")
        v[BYTES_IN] += len(msg)
        v[LAST_MSG_LEN] = len(msg)
        v[LAST_BYTE] = msg[-1] if msg else 0
        v[LINE_CHECKSUM] = sum(msg) & 0xFFFF
        v[SESSION_NONCE] = zlib.crc32(msg, v[SESSION_NONCE])
        v[STATE_BUF_PTR] = 0x1000 + v[BYTES_IN]
        try:
            response = self._dispatch(msg)
            v[XFER_BYTES] += len(response)
            return response
        finally:
            v[STEP_TICKS] += self._steps

    def _dispatch(self, msg: bytes) -> bytes:
        v = self.v
        state = v[SESSION_STATE]
        if state == FtpState.CLOSED:
            self.hit("closed_drop")
            return b""

        line = msg.rstrip(b"\r\n")
        cmd, _, arg = line.partition(b" ")
        for _ in cmd[:8]:
            self.hit("parse_cmd")
        cmd = cmd.upper()
        v[ARG_LEN] = len(arg)
        v[CMD_HASH] = zlib.crc32(cmd) & 0xFFFF
        v[LAST_ERROR] = ERR_NONE
        if not line:
            self.hit("empty_line")
        if TELNET_IP in line:
            self.hit("ctrl_char")
            v[LAST_ERROR] = ERR_CONTROL

        if state == FtpState.INIT:
            if cmd == b"USER":
                self.hit("user")
                for _ in arg:
                    self.hit("user_arg")
                v[IS_ANONYMOUS] = int(arg == b"anonymous")
                v[USER_NAME_HASH] = zlib.crc32(arg)
                v[SESSION_STATE] = FtpState.AUTH_WAIT_PASS
                return b"331 Password required\r\n"
            if cmd == b"QUIT":
                self.hit("init_quit")
                v[SESSION_STATE] = FtpState.CLOSED
                return b"221 Goodbye\r\n"
            self.hit("init_other")
            if v[LAST_ERROR] == ERR_NONE:
                v[LAST_ERROR] = ERR_SYNTAX
            return b"530 Please login with USER and PASS\r\n"

        if state == FtpState.AUTH_WAIT_PASS:
            if cmd == b"PASS":
                self.hit("pass")
                for _ in arg:
                    self.hit("pass_arg")
                if not arg:
                    self.hit("pass_empty")
                    v[AUTH_FAILED] = 1
                v[SESSION_STATE] = FtpState.LOGGED_IN
                return b"230 Logged in\r\n"
            if cmd == b"QUIT":
                self.hit("awp_quit")
                v[SESSION_STATE] = FtpState.CLOSED
                return b"221 Goodbye\r\n"
            self.hit("awp_violation")
            v[SESSION_STATE] = FtpState.CLOSED
            return b"503 Bad sequence of commands, closing\r\n"

        # LOGGED_IN
        if cmd == b"LIST":
            self.hit("list")
            for _ in arg:
                self.hit("list_arg")
            v[DATA_CONN_OPEN] = 1
            return b"150 Here comes the listing\r\n226 Done\r\n"
        if cmd == b"RETR":
            self.hit("retr")
            for _ in arg:
                self.hit("retr_scan")
            if len(arg) > RETR_BUFFER:
                self.crash("retr_overflow")
            if arg.startswith(PROTECTED_PREFIX):
                self.hit("path_denied")
                v[LAST_ERROR] = ERR_PATH
                return b"550 Permission denied\r\n"
            if arg.endswith(b".bin"):
                self.hit("retr_bin")
                v[BINARY_MODE] = 1
            v[DATA_CONN_OPEN] = 1
            return b"150 Opening data connection\r\n226 Transfer complete\r\n"
        if cmd == b"QUIT":
            self.hit("li_quit")
            v[SESSION_STATE] = FtpState.CLOSED
            return b"221 Goodbye\r\n"
        if cmd in (b"USER", b"PASS"):
            self.hit("li_relogin")
            return b"503 Already logged in\r\n"
        self.hit("li_other")
        if v[LAST_ERROR] == ERR_NONE:
            v[LAST_ERROR] = ERR_SYNTAX
        return b"500 Unknown command\r\n"
