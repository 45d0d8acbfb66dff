#!/usr/bin/env python3
"""Side-by-side table of several run directories (reads each aggregate.csv).

    python3 scripts/compare_runs.py runs/corekg runs/corekg-global ...
"""

import argparse
import csv
import json
from pathlib import Path


def load(run: Path) -> dict:
    with open(run / "aggregate.json", encoding="utf-8") as fh:
        agg = json.load(fh)
    with open(run / "aggregate.csv", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return {"name": run.name, "method": agg["method"], "users": agg["evaluated_users"],
            "coverage": agg["coverage"], "f1": agg["f1"], "rows": rows}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("runs", nargs="+", type=Path)
    args = ap.parse_args(argv)
    print(f"{'run':<24}{'method':<20}{'users':>6}{'coverage':>10}{'f1':>8}")
    for run in args.runs:
        r = load(run)
        print(f"{r['name']:<24}{r['method']:<20}{r['users']:>6}{100 * r['coverage']:>10.2f}{100 * r['f1']:>8.2f}")


if __name__ == "__main__":
    main()
