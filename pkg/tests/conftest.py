import os

import pytest
from hypothesis import HealthCheck, settings

from statefuzz.harness import fixture_path, make_target
from statefuzz.message import load_corpus, load_grammar

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def ftp():
    return make_target("toy-ftp")


@pytest.fixture
def tlv():
    return make_target("toy-tlv")


@pytest.fixture(scope="session")
def ftp_corpus():
    return load_corpus(fixture_path("toy-ftp", "corpus.bin"))


@pytest.fixture(scope="session")
def tlv_corpus():
    return load_corpus(fixture_path("toy-tlv", "corpus.bin"))


@pytest.fixture(scope="session")
def tlv_grammar():
    return load_grammar(fixture_path("toy-tlv", "grammar.json"))


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one verdict line per acceptance criterion for the terminal summary."""

    def record(criterion: str, ok: bool, detail: str) -> bool:
        line = f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
