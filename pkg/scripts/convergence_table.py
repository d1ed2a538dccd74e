#!/usr/bin/env python3
"""Deterministic-limit error table for the harmonic oscillator and free particle.

    python3 scripts/convergence_table.py [--levels 100,1000,10000]
"""

import argparse

from hpstoch.cli import ScenarioConfig, convergence_sweep

ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
ap.add_argument("--levels", default="100,1000,10000")
args = ap.parse_args()
levels = [int(x) for x in args.levels.split(",")]

for system in ("harmonic_oscillator", "free_particle"):
    sweep = convergence_sweep(ScenarioConfig(system=system), levels)
    print(f"\n{system}")
    print(f"{'steps':>8} {'dt':>10} {'error':>12}")
    for row in sweep["rows"]:
        print(f"{row['steps']:>8} {row['dt']:>10.2e} {row['error']:>12.3e}")
    if sweep["exact"]:
        print("errors at rounding level (exact)")
    else:
        print(f"fitted order {sweep['order']:.4f}")
