"""Compare executions needed to reach the FTP RETR overflow with and without state feedback.

    python3 demos/feedback_ablation.py [--runs N]
"""

import argparse
import statistics

from statefuzz.campaign import CampaignConfig, run_campaign

BUDGET = 100_000


def execs_to_crash(seed: int, feedback: bool) -> int:
    cfg = CampaignConfig(target="toy-ftp", state_vars=["session_state"], rng_seed=seed, max_execs=BUDGET,
                         state_feedback=feedback, stop_on=frozenset({"retr_overflow"}))
    hit = run_campaign(cfg).first_crash("retr_overflow")
    return hit.exec_index if hit else BUDGET


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--runs", type=int, default=10)
    args = p.parse_args()
    for feedback in (True, False):
        execs = [execs_to_crash(s, feedback) for s in range(args.runs)]
        label = "with state feedback" if feedback else "without          "
        print(f"{label}: median {statistics.median(execs):>8.0f}  runs {execs}")


if __name__ == "__main__":
    main()
