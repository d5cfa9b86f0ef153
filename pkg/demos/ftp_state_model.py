"""Fuzz the toy FTP server and watch the state model grow.

Runs the variable miner to pick state variables, fuzzes with state feedback
on, and prints how the inferred state machine and coverage evolve.

    python3 demos/ftp_state_model.py [--execs N] [--seed S]
"""

import argparse

from statefuzz.campaign import CampaignConfig, run_campaign


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--execs", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    result = run_campaign(CampaignConfig(target="toy-ftp", rng_seed=args.seed, max_execs=args.execs,
                                         stats_interval=5_000))
    print("state variables chosen by calibration:", result.state_vars)
    print(f"{'execs':>8} {'edges':>6} {'states':>6} {'transitions':>11} {'corpus':>6} {'crashes':>7}")
    for row in result.stats:
        print(f"{row['exec_index']:>8} {row['edges_covered']:>6} {row['vertices']:>6} "
              f"{row['state_edges']:>11} {row['corpus_size']:>6} {row['unique_crashes']:>7}")
    for c in result.crashes:
        print(f"crash {c.site_id} first hit at exec {c.exec_index}: {c.seed.messages}")
    print()
    print(result.model.to_dot())


if __name__ == "__main__":
    main()
