#!/usr/bin/env python3
"""Run every named case across refinement levels and write reports.

Usage: python scripts/run_full_suite.py [--out-dir reports] [--levels 2,3,4]
"""

import argparse
import pathlib
import sys

from lorentzlab.pipeline import CASE_NAMES, RunConfig, run_suite, report_to_json


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out-dir", default="reports")
    parser.add_argument("--levels", default="2,3,4")
    parser.add_argument("--samples", type=int, default=8)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    levels = [int(x) for x in args.levels.split(",")]
    cases = [c for c in CASE_NAMES if c != "custom-spec-file"]
    base = RunConfig(case=cases[0], samples=args.samples, seed=args.seed)

    reports, summary = run_suite(cases, levels, base)
    for report in reports:
        name = f"{report.config['case']}_level{report.config['level']}.json"
        (out / name).write_text(report_to_json(report), encoding="utf-8")
    for row in summary["rows"]:
        print(
            f"{row['case']:24s} level {row['level']}: lambda1={row['lambda1']:.8f} "
            f"rel_err={row['lambda1_rel_error']:.2e} verdict={row['verdict']}"
        )
    print(f"suite verdict: {summary['verdict']} (reports in {out}/)")
    return 0 if summary["verdict"] == "pass" else 1


if __name__ == "__main__":
    sys.exit(main())
