"""CSV writers and readers for paths and reports (17 significant digits)."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .integrators import PontryaginPath
from .paths import SamplePath, TimeGrid

FMT = "%.17g"


def _fmt(x) -> str:
    return FMT % x


def write_sample_path(path: SamplePath, file) -> Path:
    file = Path(file)
    header = ["t"] + [f"x{j}" for j in range(path.d)]
    with file.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, row in zip(path.times, path.values):
            w.writerow([_fmt(t)] + [_fmt(x) for x in row])
    return file


def read_sample_path(file) -> SamplePath:
    data = np.loadtxt(file, delimiter=",", skiprows=1, ndmin=2)
    return SamplePath(TimeGrid(data[:, 0]), data[:, 1:])


def write_pontryagin_path(path: PontryaginPath, file) -> Path:
    file = Path(file)
    n = path.n
    header = (
        ["t"]
        + [f"q_{i}" for i in range(n)]
        + [f"v_{i}" for i in range(n)]
        + [f"p_{i}" for i in range(n)]
        + ["fp_iters", "residual"]
    )
    N = len(path.grid)
    # diagnostics are per step; node 0 has none
    iters = np.zeros(N, dtype=int)
    resid = np.zeros(N)
    if path.iterations is not None:
        iters[1:] = path.iterations
        resid[1:] = path.residuals
    with file.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for j in range(N):
            row = [path.grid.nodes[j], *path.q[j], *path.v[j], *path.p[j]]
            w.writerow([_fmt(x) for x in row] + [str(iters[j]), _fmt(resid[j])])
    return file


def read_pontryagin_path(file) -> PontryaginPath:
    data = np.loadtxt(file, delimiter=",", skiprows=1, ndmin=2)
    n = (data.shape[1] - 3) // 3
    grid = TimeGrid(data[:, 0])
    return PontryaginPath(
        grid,
        data[:, 1 : 1 + n],
        data[:, 1 + n : 1 + 2 * n],
        data[:, 1 + 2 * n : 1 + 3 * n],
        iterations=data[1:, -2].astype(int),
        residuals=data[1:, -1],
    )


REPORT_COLUMNS = ["field_id", "g_kind", "direction", "K_kind", "derivative"]


def write_field_report(rows, file, summary: dict | None = None) -> Path:
    """Per-field rows plus an optional summary row (field_id = 'summary')."""
    file = Path(file)
    with file.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([r["field_id"], r["g_kind"], r["direction"], r["K_kind"], _fmt(r["derivative"])])
        if summary is not None:
            w.writerow(["summary", summary.get("g_kind", ""), summary.get("direction", ""),
                        summary.get("K_kind", ""), _fmt(summary["derivative"])])
    return file


def read_field_report(file):
    with Path(file).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    body = [r for r in rows if r["field_id"] != "summary"]
    summary = next((r for r in rows if r["field_id"] == "summary"), None)
    return body, summary


def write_charge(charge: SamplePath, file) -> Path:
    file = Path(file)
    with file.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "charge"])
        for t, c in zip(charge.times, charge.values[:, 0]):
            w.writerow([_fmt(t), _fmt(c)])
    return file


def write_table(rows: list[dict], file) -> Path:
    file = Path(file)
    with file.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in r.items()})
    return file
