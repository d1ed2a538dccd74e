#!/usr/bin/env python3
"""Run every scenario in scripts/configs through the CLI and tabulate verdicts.

    python3 scripts/run_experiments.py [--out results] [--only noether,stationarity]
"""

import argparse
import json
import sys
import time
from pathlib import Path

from hpstoch.cli import main

HERE = Path(__file__).resolve().parent
VERBS = {"simulate": "simulate", "convergence": "convergence"}


def run(config: Path, out: Path) -> tuple[int, float, dict]:
    verb = VERBS.get(config.stem, "verify")
    start = time.perf_counter()
    status = main([verb, "--config", str(config), "--out", str(out)])
    elapsed = time.perf_counter() - start
    summary = json.loads((out / "manifest.json").read_text())["summary"] if status != 2 else {}
    return status, elapsed, summary


def cli():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--only", help="comma list of config stems")
    args = ap.parse_args()
    configs = sorted((HERE / "configs").glob("*.ini"))
    if args.only:
        wanted = set(args.only.split(","))
        configs = [c for c in configs if c.stem in wanted]
    worst = 0
    for config in configs:
        status, elapsed, summary = run(config, Path(args.out) / config.stem)
        worst = max(worst, status)
        print(f"{config.stem:20s} exit={status} {elapsed:6.2f}s "
              f"{summary.get('n_passed', 0)}/{summary.get('n_seeds', 0)} seeds passed")
    return worst


if __name__ == "__main__":
    sys.exit(cli())
