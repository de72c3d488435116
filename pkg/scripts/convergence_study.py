#!/usr/bin/env python3
"""Refinement sweep for one case: eigenvalue error and identity residuals.

Usage: python scripts/convergence_study.py [--case counterexample] [--levels 2,3,4,5]
"""

import argparse

from lorentzlab.pipeline import RunConfig, run_case


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--case", default="counterexample")
    parser.add_argument("--n", type=int, default=2)
    parser.add_argument("--levels", default="2,3,4,5")
    parser.add_argument("--samples", type=int, default=4)
    args = parser.parse_args()

    levels = [int(x) for x in args.levels.split(",")]
    print(f"case={args.case} n={args.n}")
    print(f"{'level':>5s} {'lambda1':>13s} {'rel_err':>10s} {'minkowski':>10s} {'beltrami':>10s} {'eq_resid(axis)':>14s}")
    for level in levels:
        report = run_case(RunConfig(case=args.case, n=args.n, level=level, samples=args.samples))
        eq = report.equality[0]["residual_rel"]
        bel = report.identities.get("beltrami_l2", float("nan"))
        print(
            f"{level:5d} {report.lambda1['value']:13.9f} {report.lambda1['rel_error']:10.2e} "
            f"{report.identities['minkowski_residual_rel']:10.2e} {bel:10.2e} {eq:14.4f}"
        )


if __name__ == "__main__":
    main()
