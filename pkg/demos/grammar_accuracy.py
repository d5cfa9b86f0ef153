"""Score an inferred DNS header/record layout against the true one.

    python3 demos/grammar_accuracy.py
"""

from statefuzz.grammar import accuracy, classify_fields, load_fields
from statefuzz.harness import fixture_path


def main() -> None:
    hyp = load_fields(fixture_path("dns-layout", "hypothesis.json"))
    truth = load_fields(fixture_path("dns-layout", "truth.json"))
    report = classify_fields(hyp, truth)
    acc = accuracy(report)
    print(f"exact matches         {report.g_l}")
    print(f"merged truth fields   {report.l_mg}")
    print(f"split truth fields    {report.ml_g}")
    print(f"mismatches            {report.mismatch}")
    print(f"total                 {report.total}")
    print(f"exact accuracy        {100 * acc['exact_acc']:.2f}%")
    print(f"multi-field accuracy  {100 * acc['multi_acc']:.2f}%")


if __name__ == "__main__":
    main()
