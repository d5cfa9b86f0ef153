"""Command-line entry point: ``statefuzz <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path

from statefuzz.campaign import CampaignConfig, replay, run_campaign
from statefuzz.errors import ConfigError, CorpusError, FuzzError
from statefuzz.grammar import (
    HttpClient,
    OfflineClient,
    accuracy,
    classify_fields,
    learn_grammar,
    load_fields,
)
from statefuzz.harness import fixture_path, make_target
from statefuzz.message import load_corpus, save_grammar
from statefuzz.state_model import StateModel, export_dot
from statefuzz.varminer import FilterConfig, calibrate, emit_report, filter_vars, load_selection

log = logging.getLogger("statefuzz")


def _corpus(target: str, path: str | None):
    try:
        return load_corpus(path or fixture_path(target, "corpus.bin"))
    except FileNotFoundError as exc:
        raise ConfigError(f"corpus not found: {exc.filename}") from exc


def cmd_fuzz(args: argparse.Namespace) -> int:
    if args.vars:
        try:
            state_vars = load_selection(args.vars)
        except FileNotFoundError as exc:
            raise ConfigError(f"variable selection not found: {args.vars}") from exc
    else:
        state_vars = None
    cfg = CampaignConfig(
        target=args.target,
        corpus=args.corpus,
        grammar=args.grammar,
        state_vars=state_vars,
        epsilon=args.epsilon,
        rng_seed=args.seed,
        max_execs=args.execs,
        max_seconds=args.seconds,
        state_feedback=not args.no_state_feedback,
        field_mutations=not args.no_field_mutations,
        deterministic=not args.no_deterministic,
        wall_timing=args.wall_timing,
        out_dir=args.out,
    )
    result = run_campaign(cfg)
    n_vertices, n_edges = result.model.stats()
    print(f"execs={result.execs} corpus={len(result.corpus)} states={n_vertices} "
          f"transitions={n_edges} unique_crashes={len(result.crashes)}")
    for c in result.crashes:
        print(f"crash {c.site_id} at exec {c.exec_index}")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    target = make_target(args.target)
    var_names = args.vars.split(",") if args.vars else list(target.VARIABLES[:1])
    for path in args.inputs:
        for i, seed in enumerate(_corpus(args.target, path)):
            out = replay(target, seed, var_names)
            states = " ".join(s.label() for s in out.state_seq)
            print(f"{path}[{i}]: {out.verdict} after {out.messages_sent} messages; states: {states}")
    return 0


def cmd_analyze_vars(args: argparse.Namespace) -> int:
    target = make_target(args.target)
    corpus = _corpus(args.target, args.corpus)
    traces = calibrate(target, corpus, args.execs, random.Random(args.seed))
    cfg = FilterConfig(force_include=tuple(args.force_include or ()))
    selected = filter_vars(traces, cfg)
    emit_report(traces, selected, args.out)
    print("selected:", ", ".join(target.VARIABLES[i] for i in selected) or "(none)")
    return 0


def cmd_learn_grammar(args: argparse.Namespace) -> int:
    if args.offline:
        client = OfflineClient(args.offline)
    elif args.endpoint:
        client = HttpClient(args.endpoint, args.model, token_env=args.token_env)
    else:
        raise ConfigError("give --offline DIR or --endpoint URL")
    seeds = _corpus(args.target, args.corpus)
    grammar = learn_grammar(client, args.protocol or args.target, seeds, args.attempts)
    save_grammar(grammar, args.out)
    print(f"{len(grammar.fields)} fields learned -> {args.out}")
    return 0


def cmd_eval_grammar(args: argparse.Namespace) -> int:
    try:
        hyp = load_fields(args.hypothesis)
        truth = load_fields(args.truth)
    except FileNotFoundError as exc:
        raise ConfigError(f"file not found: {exc.filename}") from exc
    report = classify_fields(hyp, truth)
    print(json.dumps({**report.to_json(), **accuracy(report)}, indent=2))
    return 0


def cmd_export_state_model(args: argparse.Namespace) -> int:
    try:
        obj = json.loads(Path(args.model).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"state model not found: {args.model}") from exc
    text = StateModel.dot_from_json(obj)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="statefuzz", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fuzz", help="run a fuzzing campaign")
    f.add_argument("--target", default="toy-ftp")
    f.add_argument("--corpus", help="corpus file or directory (default: the target's shipped seeds)")
    f.add_argument("--grammar", help="field grammar JSON")
    f.add_argument("--vars", help="analyze-vars report or JSON list of variable names")
    f.add_argument("--epsilon", type=float, default=0.5)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--execs", type=int, default=100_000)
    f.add_argument("--seconds", type=float, help="wall-clock budget instead of executions")
    f.add_argument("--no-state-feedback", action="store_true")
    f.add_argument("--no-field-mutations", action="store_true")
    f.add_argument("--no-deterministic", action="store_true")
    f.add_argument("--wall-timing", action="store_true", help="fill timing columns of stats.csv")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fuzz)

    r = sub.add_parser("replay", help="re-execute corpus or crash files")
    r.add_argument("inputs", nargs="+")
    r.add_argument("--target", default="toy-ftp")
    r.add_argument("--vars", help="comma-separated state variables to print")
    r.set_defaults(func=cmd_replay)

    a = sub.add_parser("analyze-vars", help="calibration run + state-variable filter")
    a.add_argument("--target", default="toy-ftp")
    a.add_argument("--corpus")
    a.add_argument("--execs", type=int, default=10_000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--force-include", action="append")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze_vars)

    lg = sub.add_parser("learn-grammar", help="ask an LLM for the field layout of seed messages")
    lg.add_argument("--target", default="toy-tlv")
    lg.add_argument("--corpus")
    lg.add_argument("--protocol")
    lg.add_argument("--offline", help="directory of recorded transcripts")
    lg.add_argument("--endpoint", help="chat-completions URL")
    lg.add_argument("--model", default="default")
    lg.add_argument("--token-env", default="STATEFUZZ_LLM_TOKEN")
    lg.add_argument("--attempts", type=int, default=3)
    lg.add_argument("--out", required=True)
    lg.set_defaults(func=cmd_learn_grammar)

    e = sub.add_parser("eval-grammar", help="score a field list against ground truth")
    e.add_argument("--hypothesis", required=True)
    e.add_argument("--truth", required=True)
    e.set_defaults(func=cmd_eval_grammar)

    x = sub.add_parser("export-state-model", help="render a state_model.json as DOT")
    x.add_argument("model")
    x.add_argument("--out")
    x.set_defaults(func=cmd_export_state_model)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CorpusError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FuzzError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
