"""Target contract and the built-in reference targets."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from statefuzz.errors import ConfigError
from statefuzz.harness.base import Target, block_id, initial_state, run_sequence
from statefuzz.harness.toy_ftp import ToyFtp
from statefuzz.harness.toy_tlv import ToyTlv

TARGETS: dict[str, type[Target]] = {
    ToyFtp.name: ToyFtp,
    ToyTlv.name: ToyTlv,
}


def make_target(name: str, **kwargs) -> Target:
    try:
        cls = TARGETS[name]
    except KeyError:
        raise ConfigError(f"unknown target {name!r}; choose from {sorted(TARGETS)}") from None
    return cls(**kwargs)


def fixture_path(target: str, filename: str) -> Path:
    """Path of a file shipped under ``statefuzz/fixtures/<target>/``."""
    return Path(str(resources.files("statefuzz") / "fixtures" / target.replace("-", "_") / filename))


__all__ = [
    "TARGETS",
    "Target",
    "ToyFtp",
    "ToyTlv",
    "block_id",
    "fixture_path",
    "initial_state",
    "make_target",
    "run_sequence",
]
