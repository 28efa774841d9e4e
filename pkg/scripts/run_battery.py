#!/usr/bin/env python3
"""Run the standard battery and print the agreement matrix as a table."""

import argparse
import sys
import time

from neflab.battery import agreement_matrix, run_battery
from neflab.verifier import ClassifyConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=25)
    ap.add_argument("--threads", type=int, default=None, help="defaults to NEFLAB_THREADS or 1")
    args = ap.parse_args()

    start = time.perf_counter()
    rows = run_battery(config=ClassifyConfig(points_per_axis=args.grid), threads=args.threads)
    elapsed = time.perf_counter() - start

    print(f"{'family':28s} {'beta':>16s}  P1    P2    P3    agree")
    for rec in agreement_matrix(rows):
        beta = rec["beta"] if isinstance(rec["beta"], str) else ",".join(f"{b:g}" for b in rec["beta"])
        print(f"{rec['family']:28s} {beta:>16s}  {rec['P1']:5s} {rec['P2']:5s} {rec['P3']:5s} {rec['agreement']}")
    print()
    for row in rows:
        verdict = "pass" if row.report.passed else "fail"
        flag = "" if row.matches_expectation else "  <-- unexpected"
        print(f"{row.entry.key:28s} {verdict}  ({row.entry.note}){flag}")
    agree = all(r.report.agreement for r in rows)
    print(f"\nagreement: {agree}   runtime: {elapsed:.1f} s")
    return 0 if agree else 3


if __name__ == "__main__":
    sys.exit(main())
