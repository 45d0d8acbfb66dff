#!/usr/bin/env python3
"""Generate the skewed synthetic benchmark and run every method on it through the CLI.

Each method gets its own run directory under --out; the closing table is
produced from their aggregate files by compare_runs.py.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from compare_runs import main as compare  # noqa: E402
from kgcoreset.cli import main as cli  # noqa: E402
from kgcoreset.pipeline import METHODS  # noqa: E402


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("runs/ablation"))
    ap.add_argument("--budget", default="5%")
    ap.add_argument("--rng-seed", type=int, default=0)
    ap.add_argument("--data-seed", type=int, default=0)
    args = ap.parse_args(argv)

    data = args.out / "data"
    if cli(["gen-synthetic", "--out", str(data), "--rng-seed", str(args.data_seed)]) != 0:
        return 1
    common = ["--dataset", str(data / "dataset.nt"), "--workload", str(data / "workload.txt"),
              "--prefixes", str(data / "prefixes.txt"), "--budget", args.budget, "--rng-seed", str(args.rng_seed)]
    runs = []
    for method in METHODS:
        run = args.out / method
        code = cli(["summarize", *common, "--method", method, "--out", str(run)])
        if code != 0:
            print(f"{method}: exit {code}", file=sys.stderr)
            continue
        runs.append(str(run))
    compare(runs)
    return 0


if __name__ == "__main__":
    sys.exit(main())
