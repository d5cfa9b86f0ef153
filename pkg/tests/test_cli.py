import json
import subprocess
import sys

import pytest

from statefuzz.cli import main
from statefuzz.harness import fixture_path


def test_fuzz_writes_outputs(tmp_path, capsys):
    vars_file = tmp_path / "vars.json"
    vars_file.write_text('["session_state"]')
    out = tmp_path / "out"
    assert main(["fuzz", "--execs", "300", "--vars", str(vars_file), "--out", str(out)]) == 0
    assert "execs=300" in capsys.readouterr().out
    for name in ("stats.csv", "state_model.dot", "state_model.json", "corpus.bin", "crashes.json", "state_vars.json"):
        assert (out / name).exists(), name
    assert json.loads((out / "state_vars.json").read_text()) == ["session_state"]


def test_fuzz_tlv_with_grammar(tmp_path):
    vars_file = tmp_path / "vars.json"
    vars_file.write_text('["conn_state"]')
    args = ["fuzz", "--target", "toy-tlv", "--grammar", str(fixture_path("toy-tlv", "grammar.json")),
            "--vars", str(vars_file), "--execs", "300", "--out", str(tmp_path / "o")]
    assert main(args) == 0


def test_analyze_vars_then_fuzz(tmp_path, capsys):
    report = tmp_path / "vars.json"
    assert main(["analyze-vars", "--execs", "2000", "--out", str(report)]) == 0
    assert "selected: session_state" in capsys.readouterr().out
    assert main(["fuzz", "--execs", "100", "--vars", str(report), "--out", str(tmp_path / "o")]) == 0


def test_replay(tmp_path, capsys):
    assert main(["replay", str(fixture_path("toy-ftp", "corpus.bin")), "--vars", "session_state"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 10 and all(" ok after " in line for line in lines)


def test_learn_and_eval_grammar(tmp_path, capsys):
    out = tmp_path / "g.json"
    assert main(["learn-grammar", "--offline", str(fixture_path("toy-tlv", "llm")), "--out", str(out)]) == 0
    assert json.loads(out.read_text()) == json.loads(fixture_path("toy-tlv", "grammar.json").read_text())
    capsys.readouterr()
    assert main(["eval-grammar", "--hypothesis", str(fixture_path("dns-layout", "hypothesis.json")),
                 "--truth", str(fixture_path("dns-layout", "truth.json"))]) == 0
    report = json.loads(capsys.readouterr().out)
    assert (report["g_l"], report["l_mg"], report["ml_g"], report["mismatch"], report["total"]) == (54, 0, 21, 6, 81)


def test_export_state_model(tmp_path, capsys):
    vars_file = tmp_path / "vars.json"
    vars_file.write_text('["session_state"]')
    out = tmp_path / "o"
    main(["fuzz", "--execs", "300", "--vars", str(vars_file), "--out", str(out)])
    dot = tmp_path / "m.dot"
    assert main(["export-state-model", str(out / "state_model.json"), "--out", str(dot)]) == 0
    assert dot.read_text() == (out / "state_model.dot").read_text()


@pytest.mark.parametrize("argv", [
    ["fuzz", "--corpus", "/nonexistent.bin", "--out", "x"],
    ["fuzz", "--target", "no-such-target", "--out", "x"],
    ["fuzz", "--epsilon", "2", "--out", "x"],
    ["fuzz", "--vars", "/nonexistent.json", "--out", "x"],
    ["replay", "/nonexistent.bin"],
    ["learn-grammar", "--out", "x"],
    ["eval-grammar", "--hypothesis", "/nonexistent.json", "--truth", "/nonexistent.json"],
    ["export-state-model", "/nonexistent.json"],
])
def test_config_errors_exit_2(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "statefuzz.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "analyze-vars" in proc.stdout
