"""Learn a field grammar for the toy TLV protocol and use it to find a length confusion bug.

The grammar comes from recorded LLM answers, so this runs offline. The
crash needs the type and length fields changed together behind a 16-bit
magic check, which field-aware mutations reach and byte-level ones rarely do.

    python3 demos/tlv_field_mutations.py [--runs N]
"""

import argparse

from statefuzz.campaign import CampaignConfig, run_campaign
from statefuzz.grammar import OfflineClient, learn_grammar
from statefuzz.harness import fixture_path
from statefuzz.message import bits_to_hex, load_corpus

BUDGET = 100_000


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--runs", type=int, default=3)
    args = p.parse_args()

    corpus = load_corpus(fixture_path("toy-tlv", "corpus.bin"))
    grammar = learn_grammar(OfflineClient(fixture_path("toy-tlv", "llm")), "toy-tlv", corpus)
    print("learned fields:")
    for f in grammar.fields:
        values = ", ".join(bits_to_hex(v) for v in grammar.dictionary.get(f.name, [])[:4])
        print(f"  {f.name:<8} bits {f.bit_start:>3}..{f.bit_end:<3} seen: {values}")

    for fm in (True, False):
        hits = []
        for seed in range(args.runs):
            cfg = CampaignConfig(target="toy-tlv", corpus=corpus, grammar=grammar, state_vars=["conn_state"],
                                 rng_seed=seed, max_execs=BUDGET, field_mutations=fm,
                                 stop_on=frozenset({"len_confusion"}))
            hit = run_campaign(cfg).first_crash("len_confusion")
            hits.append(hit.exec_index if hit else None)
        print(f"field mutations {'on ' if fm else 'off'}: first len_confusion at {hits}")


if __name__ == "__main__":
    main()
