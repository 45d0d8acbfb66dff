#!/usr/bin/env python3
"""Coverage and F1 of a method as the budget grows, averaged over RNG seeds."""

import argparse
import logging

from kgcoreset.experiments import BenchmarkConfig, budget_sweep, build_benchmark


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--method", default="corekg")
    ap.add_argument("--fractions", default="0.01,0.05,0.10,0.25")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--data-seed", type=int, default=0)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.ERROR)

    bench = build_benchmark(BenchmarkConfig(rng_seed=args.data_seed))
    fractions = [float(x) for x in args.fractions.split(",")]
    result = budget_sweep(bench, fractions, range(args.seeds), method=args.method)
    print(f"{'budget':>8}{'coverage':>10}{'f1':>8}")
    for frac, (cov, f1) in result.items():
        print(f"{100 * frac:>7.0f}%{100 * cov:>10.2f}{100 * f1:>8.2f}")


if __name__ == "__main__":
    main()
