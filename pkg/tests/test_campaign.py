import pytest

from statefuzz.campaign import (
    STATS_COLUMNS,
    CampaignConfig,
    CrashRecord,
    dedup,
    read_stats,
    replay,
    run_campaign,
    write_outputs,
)
from statefuzz.errors import ConfigError
from statefuzz.feedback import OK, Verdict
from statefuzz.harness import make_target
from statefuzz.harness.toy_tlv import ECHO, pack
from statefuzz.message import Seed, load_corpus


def rec(site, idx, tag=b"x"):
    return CrashRecord(site, Seed([tag]), idx)


def test_dedup_keeps_earliest_per_site():
    out = dedup([rec("b", 5), rec("a", 9), rec("b", 2, b"y"), rec("a", 3)])
    assert [(c.site_id, c.exec_index) for c in out] == [("b", 2), ("a", 3)]
    assert out[0].seed.messages == [b"y"]
    assert dedup([]) == []


def test_zero_budget_gives_empty_outputs(tlv_corpus, tmp_path):
    cfg = CampaignConfig(target="toy-tlv", corpus=tlv_corpus, state_vars=["conn_state"], max_execs=0, out_dir=tmp_path)
    r = run_campaign(cfg)
    assert r.execs == 0 and r.crashes == [] and r.corpus == [] and r.model.stats() == (0, 0)
    assert load_corpus(tmp_path / "corpus.bin") == []
    assert read_stats(tmp_path / "stats.csv") == []
    assert not any((tmp_path / "crashes").iterdir())


def test_caller_seeds_left_untouched(tlv_corpus):
    before = [Seed(list(s.messages)) for s in tlv_corpus]
    run_campaign(CampaignConfig(target="toy-tlv", corpus=tlv_corpus, state_vars=["conn_state"], max_execs=200))
    assert tlv_corpus == before


@pytest.mark.parametrize("kwargs", [
    dict(max_execs=None, max_seconds=None),
    dict(max_execs=-1),
    dict(max_seconds=-1.0),
    dict(epsilon=1.5),
    dict(stats_interval=0),
    dict(corpus="/nonexistent/corpus.bin"),
    dict(corpus=[]),
    dict(target="no-such-target"),
    dict(state_vars=["no_such_var"]),
    dict(grammar="/nonexistent/grammar.json"),
])
def test_config_errors(kwargs):
    with pytest.raises(ConfigError):
        run_campaign(CampaignConfig(**{"max_execs": 10, **kwargs}))


def test_tlv_crash_replays():
    tlv = make_target("toy-tlv")
    seed = [pack(0xA1, b"client"), pack(ECHO, b"abc", length=64)]
    assert replay(tlv, seed).verdict == Verdict("crash", "len_confusion")


def test_guard_bit_flip_is_harmless(tlv_corpus):
    tlv = make_target("toy-tlv")
    crash = bytearray(pack(ECHO, b"abc", length=64))
    for bit in range(16):
        m = bytearray(crash)
        m[bit >> 3] ^= 0x80 >> (bit & 7)
        assert replay(tlv, [pack(0xA1, b"client"), bytes(m)]).verdict == OK


def test_corpus_seeds_replay_ok(ftp, tlv, ftp_corpus, tlv_corpus):
    for target, corpus in ((ftp, ftp_corpus), (tlv, tlv_corpus)):
        for s in corpus:
            assert replay(target, s).verdict == OK


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = CampaignConfig(target="toy-ftp", state_vars=["session_state"], max_execs=5000, stats_interval=500, out_dir=out)
    return run_campaign(cfg), out


def test_outputs_written(small_run):
    result, out = small_run
    assert result.execs == 5000
    rows = read_stats(out / "stats.csv")
    assert tuple(rows[0]) == STATS_COLUMNS
    idx = [int(r["exec_index"]) for r in rows]
    assert idx == sorted(idx) and idx[-1] == 5000
    for col in ("edges_covered", "vertices", "state_edges", "corpus_size", "unique_crashes"):
        vals = [int(r[col]) for r in rows]
        assert vals == sorted(vals), col
    assert all(r["wall_seconds"] == "" for r in rows)
    assert (out / "state_model.dot").read_text().startswith("digraph")
    assert [s.messages for s in load_corpus(out / "corpus.bin")] == [s.messages for s in result.corpus]
    for c in result.crashes:
        saved = load_corpus(out / "crashes" / f"{c.site_id}.bin")
        assert replay(make_target("toy-ftp"), saved[0]).verdict == Verdict("crash", c.site_id)


def test_kept_inputs_replay_without_hanging(small_run):
    result, _ = small_run
    ftp = make_target("toy-ftp")
    for s in result.corpus:
        assert replay(ftp, s).verdict.kind != "hang"


def test_identical_runs_are_identical(small_run, tmp_path):
    first, first_out = small_run
    cfg = CampaignConfig(target="toy-ftp", state_vars=["session_state"], max_execs=5000, stats_interval=500, out_dir=tmp_path)
    second = run_campaign(cfg)
    for name in ("stats.csv", "state_model.dot", "crashes.json", "corpus.bin"):
        assert (tmp_path / name).read_bytes() == (first_out / name).read_bytes(), name
    assert [c.seed for c in second.crashes] == [c.seed for c in first.crashes]


def test_stop_on_and_saved_crash_replays(tmp_path):
    cfg = CampaignConfig(target="toy-ftp", state_vars=["session_state"], max_execs=100_000,
                         stop_on=frozenset({"retr_overflow"}), out_dir=tmp_path)
    r = run_campaign(cfg)
    hit = r.first_crash("retr_overflow")
    assert hit is not None and r.execs < 100_000
    assert r.execs - hit.exec_index <= 1
    saved = load_corpus(tmp_path / "crashes" / "retr_overflow.bin")
    assert replay(make_target("toy-ftp"), saved[0]).verdict == Verdict("crash", "retr_overflow")


def test_rewriting_outputs_is_stable(small_run, tmp_path):
    result, out = small_run
    write_outputs(result, tmp_path)
    assert (tmp_path / "stats.csv").read_bytes() == (out / "stats.csv").read_bytes()
