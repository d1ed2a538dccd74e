"""Scenario runner: ``hpstoch {simulate,verify,convergence} --config FILE``.

Configs are INI files. Sections and keys (defaults in brackets):

    [system]      name = <catalog name>; any other key is a system parameter
    [noise]       components = time, brownian:1.0, ...   [time + k x brownian:1]
    [grid]        horizon [1.0], steps [1000]
    [run]         experiment, seeds [0..0], out [results], workers [1],
                  q0, p0 (comma lists)                  [catalog defaults]
    [stationarity]      n_fields [200], T [horizon], eps0 [0.01],
                        tolerance [5e-3], control_bump [0.1], control_min [5e-2]
    [noether]           generator [rotation | translation:<i>], tolerance [1e-6],
                        control = key=value, ... (system overrides) [anisotropy=1.0],
                        control_min [1e-2]
    [fundamental-lemma] region [none | ball x,y r | box lo1,lo2 hi1,hi2],
                        n_fields [50], T [horizon], tolerance [5e-3],
                        control_bump [0.1], control_min [1e-2]
    [hp-equivalence]    tolerance [1e-9]
    [convergence]       levels [100, 1000, 10000], order_lo [1.8], order_hi [2.2]

Exit status: 0 when every verdict passes, 1 when any fails or a seed errors,
2 on configuration errors (nothing is written in that case).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys as _sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, catalog, io
from .errors import ConfigError, IntegratorStepError, InvalidArgument, SingularLegendreError
from .integrators import hp_equivalence_check, integrate_hamiltonian, integrate_implicit_el
from .paths import Ball, Box, Brownian, NoiseSpec, Time, Zero, make_uniform_grid, sample_noise
from .variational import (
    bump_perturbed,
    charge_drift,
    el_residual_process,
    fundamental_lemma_test,
    noether_charge,
    rotation_generator,
    stationarity_test,
)

log = logging.getLogger("hpstoch")

EXPERIMENTS = ("simulate", "stationarity", "noether", "fundamental-lemma", "hp-equivalence", "convergence")
VERIFY_EXPERIMENTS = ("stationarity", "noether", "fundamental-lemma", "hp-equivalence")

DEFAULT_INITIAL = {
    "free_particle": ([0.0], [1.0]),
    "harmonic_oscillator": ([1.0], [0.0]),
    "planar_central_potential": ([1.0, 0.0], [0.0, 1.0]),
    "cosh_lagrangian": ([1.0], [0.0]),
}

DEFAULT_KNOBS = {
    "stationarity": dict(n_fields=200, eps0=1e-2, tolerance=5e-3, control_bump=0.1, control_min=5e-2),
    "noether": dict(generator="rotation", tolerance=1e-6, control="anisotropy=1.0", control_min=1e-2),
    "fundamental-lemma": dict(region="none", n_fields=50, tolerance=5e-3, control_bump=0.1, control_min=1e-2),
    "hp-equivalence": dict(tolerance=1e-9),
    "convergence": dict(levels="100, 1000, 10000", order_lo=1.8, order_hi=2.2),
    "simulate": dict(legendre_tolerance=1e-10),
}


@dataclass
class ScenarioConfig:
    system: str
    system_params: dict = field(default_factory=dict)
    noise: list = field(default_factory=list)
    horizon: float = 1.0
    steps: int = 1000
    seeds: list = field(default_factory=lambda: [0])
    experiment: str = "simulate"
    knobs: dict = field(default_factory=dict)
    q0: list | None = None
    p0: list | None = None
    out: str = "results"
    workers: int = 1

    def validate(self):
        """Raise ConfigError for anything a run would trip over."""
        try:
            return self._validate()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def _validate(self):
        if self.system not in catalog.CATALOG:
            raise ConfigError(f"unknown system {self.system!r}")
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if not self.horizon > 0 or self.steps < 2:
            raise ConfigError("grid needs horizon > 0 and steps >= 2")
        if not self.seeds:
            raise ConfigError("no seeds given")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        sys = self.build_system()
        if self.noise and len(self.noise) != sys.k + 1:
            raise ConfigError(f"{self.system} needs {sys.k + 1} noise components, got {len(self.noise)}")
        self.noise_spec(sys)
        q0, p0 = self.initial()
        if len(q0) != sys.n or len(p0) != sys.n:
            raise ConfigError(f"q0 and p0 need {sys.n} entries")
        for key in ("n_fields", "tolerance", "control_min", "eps0", "control_bump"):
            if key in self.knobs and not float(self.knobs[key]) > 0:
                raise ConfigError(f"{key} must be positive")
        if self.knobs.get("T") is not None and not 0 < float(self.knobs["T"]) <= self.horizon:
            raise ConfigError("T must lie in (0, horizon]")
        # parse everything a seed will need, so failures happen before any output exists
        if self.experiment == "noether":
            _generator(self.knob("generator", str))
            self.build_system(**_parse_overrides(self.knob("control", str)))
        elif self.experiment == "fundamental-lemma":
            _parse_region(self.knob("region", str))
        elif self.experiment == "convergence":
            _floats(self.knob("levels", str))
            self.knob("order_lo"), self.knob("order_hi")
        return self

    def build_system(self, **overrides):
        return catalog.build(self.system, **{**self.system_params, **overrides})

    def noise_spec(self, sys) -> NoiseSpec:
        if not self.noise:
            return NoiseSpec.standard(sys.k)
        return NoiseSpec(tuple(_parse_component(c) for c in self.noise))

    def initial(self):
        q0, p0 = DEFAULT_INITIAL[self.system]
        if self.system == "free_particle":
            n = int(self.system_params.get("n", 1))
            q0, p0 = q0 * n, p0 * n
        return (self.q0 or q0), (self.p0 or p0)

    def knob(self, key, cast=float):
        default = DEFAULT_KNOBS.get(self.experiment, {}).get(key)
        value = self.knobs.get(key, default)
        return None if value is None else cast(value)


def _parse_component(text: str):
    kind, _, arg = text.strip().partition(":")
    kind = kind.strip().lower()
    if kind == "time":
        return Time()
    if kind == "zero":
        return Zero()
    if kind == "brownian":
        return Brownian(float(arg) if arg else 1.0)
    raise ConfigError(f"unknown noise component {text!r}")


def _scalar(text: str):
    t = text.strip()
    if t.lower() in ("true", "false"):
        return t.lower() == "true"
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        return t


def _floats(text: str) -> list:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def parse_seeds(text: str) -> list:
    """'3' -> [3]; 'a..b' -> a..b inclusive; '1, 4, 7' -> list."""
    text = text.strip()
    try:
        if ".." in text:
            a, b = text.split("..")
            a, b = int(a), int(b)
            if b < a:
                raise ConfigError(f"empty seed range {text!r}")
            return list(range(a, b + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad seed spec {text!r}") from None


def load_config(file) -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(file) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {file}: {exc}") from None
    if not parser.has_section("system") or "name" not in parser["system"]:
        raise ConfigError("config needs [system] name = ...")
    sysec = dict(parser["system"])
    name = sysec.pop("name").strip()
    run = parser["run"] if parser.has_section("run") else {}
    grid = parser["grid"] if parser.has_section("grid") else {}
    experiment = run.get("experiment", "simulate").strip()
    try:
        cfg = ScenarioConfig(
            system=name,
            system_params={k: _scalar(v) for k, v in sysec.items()},
            noise=[c for c in parser.get("noise", "components", fallback="").split(",") if c.strip()],
            horizon=float(grid.get("horizon", 1.0)),
            steps=int(grid.get("steps", 1000)),
            seeds=parse_seeds(run.get("seeds", "0")),
            experiment=experiment,
            knobs=dict(parser[experiment]) if parser.has_section(experiment) else {},
            q0=_floats(run["q0"]) if "q0" in run else None,
            p0=_floats(run["p0"]) if "p0" in run else None,
            out=run.get("out", "results"),
            workers=int(run.get("workers", 1)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _parse_region(text: str):
    parts = text.split()
    if not parts or parts[0] == "none":
        return None
    try:
        if parts[0] == "ball":
            return Ball(_floats(parts[1]), float(parts[2]))
        if parts[0] == "box":
            return Box(_floats(parts[1]), _floats(parts[2]))
    except (IndexError, ValueError, InvalidArgument) as exc:
        raise ConfigError(f"bad region {text!r}: {exc}") from None
    raise ConfigError(f"unknown region kind {parts[0]!r}")


def _parse_overrides(text: str) -> dict:
    out = {}
    for item in text.split(","):
        if item.strip():
            k, _, v = item.partition("=")
            out[k.strip()] = _scalar(v)
    return out


def _generator(text: str):
    kind, _, arg = text.partition(":")
    if kind.strip() == "rotation":
        return rotation_generator
    if kind.strip() == "translation":
        i = int(arg or 0)

        def translation(q):
            e = np.zeros(np.shape(q))
            e[..., i] = 1.0
            return e

        return translation
    raise ConfigError(f"unknown symmetry generator {text!r}")


# -- per-seed experiments -------------------------------------------------------


def _run_seed(cfg: ScenarioConfig, seed: int, out: Path) -> dict:
    sys = cfg.build_system()
    grid = make_uniform_grid(cfg.horizon, cfg.steps)
    noise = sample_noise(cfg.noise_spec(sys), grid, seed)
    q0, p0 = cfg.initial()
    exp = cfg.experiment
    res: dict = {"seed": seed, "files": [], "metrics": {}, "passed": True}

    def keep(file):
        res["files"].append(str(Path(file).name))

    if exp == "hp-equivalence":
        tol = cfg.knob("tolerance")
        path = integrate_implicit_el(sys, noise, q0, p0)
        ham = integrate_hamiltonian(sys, noise, q0, p0)
        d_ham = float(max(np.abs(ham.q - path.q).max(), np.abs(ham.p - path.p).max()))
        d_op = hp_equivalence_check(sys, noise, q0, p0)
        keep(io.write_table(
            [{"route": "hamiltonian", "discrepancy": d_ham}, {"route": "hp_operator", "discrepancy": d_op}],
            out / f"hp_equivalence_seed{seed}.csv",
        ))
        res["metrics"] = {"hamiltonian": d_ham, "hp_operator": d_op}
        res["passed"] = d_ham <= tol and d_op <= tol
        return res

    path = integrate_implicit_el(sys, noise, q0, p0)
    keep(io.write_pontryagin_path(path, out / f"path_seed{seed}.csv"))

    if exp == "simulate":
        resid = path.legendre_residual(sys)
        res["metrics"] = {"legendre_residual": resid, "max_fp_iters": int(path.iterations.max())}
        res["passed"] = resid <= cfg.knob("legendre_tolerance")
    elif exp == "stationarity":
        n_fields = cfg.knob("n_fields", int)
        T = cfg.knob("T") or cfg.horizon
        eps0 = cfg.knob("eps0")
        rep = stationarity_test(sys, noise, path, n_fields, seed, T, eps0=eps0)
        control = bump_perturbed(path, cfg.knob("control_bump"))
        rep_c = stationarity_test(sys, noise, control, n_fields, seed, T, eps0=eps0)
        keep(io.write_field_report(list(rep.rows()), out / f"stationarity_seed{seed}.csv",
                                   {"derivative": rep.max_abs}))
        keep(io.write_field_report(list(rep_c.rows()), out / f"stationarity_control_seed{seed}.csv",
                                   {"derivative": rep_c.max_abs}))
        res["metrics"] = {"max_abs_derivative": rep.max_abs, "control_max_abs_derivative": rep_c.max_abs}
        res["passed"] = rep.max_abs <= cfg.knob("tolerance") and rep_c.max_abs >= cfg.knob("control_min")
    elif exp == "noether":
        gen = _generator(cfg.knob("generator", str))
        charge = noether_charge(sys, path, gen)
        control_sys = cfg.build_system(**_parse_overrides(cfg.knob("control", str)))
        control_path = integrate_implicit_el(control_sys, noise, q0, p0)
        control_charge = noether_charge(control_sys, control_path, gen)
        keep(io.write_charge(charge, out / f"charge_seed{seed}.csv"))
        keep(io.write_charge(control_charge, out / f"charge_control_seed{seed}.csv"))
        drift, cdrift = charge_drift(charge), charge_drift(control_charge)
        res["metrics"] = {"drift": drift, "control_drift": cdrift}
        res["passed"] = drift <= cfg.knob("tolerance") and cdrift >= cfg.knob("control_min")
    elif exp == "fundamental-lemma":
        region = _parse_region(cfg.knob("region", str))
        T = cfg.knob("T") or cfg.horizon
        n_fields = cfg.knob("n_fields", int)
        control = bump_perturbed(path, cfg.knob("control_bump"))
        rep = fundamental_lemma_test(el_residual_process(sys, noise, path), path, region, T, n_fields, seed)
        rep_c = fundamental_lemma_test(el_residual_process(sys, noise, control), control, region, T, n_fields, seed)
        for tag, r in (("", rep), ("_control", rep_c)):
            rows = [{"field_id": i, **f.describe(), "derivative": float(x)}
                    for i, (f, x) in enumerate(zip(r.fields, r.pairings))]
            keep(io.write_field_report(rows, out / f"fundamental_lemma{tag}_seed{seed}.csv",
                                       {"derivative": r.max_pairing}))
        res["metrics"] = {
            "max_pairing": rep.max_pairing,
            "control_max_pairing": rep_c.max_pairing,
            "vacuous": rep.vacuous,
            "window": list(rep.index_window) if rep.index_window else None,
        }
        # a vacuous window cannot discriminate, so the control criterion is waived
        res["passed"] = rep.max_pairing <= cfg.knob("tolerance") and (
            rep.vacuous or rep_c.max_pairing >= cfg.knob("control_min")
        )
    return res


def _safe_run_seed(cfg, seed, out):
    try:
        return _run_seed(cfg, seed, out)
    except (IntegratorStepError, SingularLegendreError) as exc:
        return {"seed": seed, "files": [], "metrics": {}, "passed": False, "error": str(exc)}


# -- convergence ---------------------------------------------------------------


def _closed_form(cfg: ScenarioConfig, t: float):
    sys = cfg.build_system()
    q0, p0 = (np.asarray(a, float) for a in cfg.initial())
    prm = sys.params
    if sys.name == "free_particle":
        return q0 + p0 / prm["mass"] * t, p0
    if sys.name == "harmonic_oscillator":
        m, k = prm["mass"], prm["stiffness"]
        w = np.sqrt(k / m)
        q = q0 * np.cos(w * t) + p0 / (m * w) * np.sin(w * t)
        p = -m * w * q0 * np.sin(w * t) + p0 * np.cos(w * t)
        return q, p
    raise InvalidArgument(f"no closed-form deterministic solution for {sys.name}")


def convergence_sweep(cfg: ScenarioConfig, levels) -> dict:
    """Deterministic-limit errors (X^0 = t, X^i = 0) at each step count and the fitted order."""
    levels = [int(x) for x in levels]
    if len(levels) < 3 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise InvalidArgument("need at least 3 strictly increasing step counts")
    sys = cfg.build_system()
    q0, p0 = cfg.initial()
    q_exact, p_exact = _closed_form(cfg, cfg.horizon)
    spec = NoiseSpec((Time(),) + (Zero(),) * sys.k)
    rows = []
    for steps in levels:
        grid = make_uniform_grid(cfg.horizon, steps)
        path = integrate_implicit_el(sys, sample_noise(spec, grid, 0), q0, p0)
        err = float(max(np.abs(path.q[-1] - q_exact).max(), np.abs(path.p[-1] - p_exact).max()))
        rows.append({"steps": steps, "dt": cfg.horizon / steps, "error": err})
    errs = np.array([r["error"] for r in rows])
    scale = 1.0 + float(max(np.abs(q_exact).max(), np.abs(p_exact).max()))
    if np.all(errs <= 1e-12 * scale * np.array(levels) ** 0.5):
        return {"rows": rows, "order": None, "exact": True}
    dts = np.array([r["dt"] for r in rows])
    order = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    return {"rows": rows, "order": order, "exact": False}


# -- driver ---------------------------------------------------------------------


def run(cfg: ScenarioConfig) -> tuple[dict, int]:
    """Execute a validated scenario; returns (manifest, exit status)."""
    cfg.validate()
    out = Path(cfg.out)
    if cfg.experiment == "convergence":
        levels = [int(x) for x in _floats(cfg.knob("levels", str))]
        try:
            sweep = convergence_sweep(cfg, levels)
        except InvalidArgument as exc:
            raise ConfigError(str(exc)) from None
        out.mkdir(parents=True, exist_ok=True)
        table = io.write_table(sweep["rows"], out / "convergence.csv")
        lo, hi = cfg.knob("order_lo"), cfg.knob("order_hi")
        passed = sweep["exact"] or (lo <= sweep["order"] <= hi)
        results = [{"seed": None, "files": [table.name], "passed": passed,
                    "metrics": {"order": sweep["order"], "exact": sweep["exact"]}}]
    else:
        out.mkdir(parents=True, exist_ok=True)
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as pool:
                results = list(pool.map(_safe_run_seed, [cfg] * len(cfg.seeds), cfg.seeds, [out] * len(cfg.seeds)))
        else:
            results = [_safe_run_seed(cfg, s, out) for s in cfg.seeds]
    manifest = {
        "tool": "hpstoch",
        "version": __version__,
        "config": asdict(cfg),
        "results": results,
        "summary": _summarize(results),
        "passed": all(r["passed"] for r in results),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))
    return manifest, 0 if manifest["passed"] else 1


def _summarize(results):
    summary = {"n_seeds": len(results), "n_passed": sum(r["passed"] for r in results)}
    keys = {k for r in results for k, v in r["metrics"].items() if isinstance(v, (int, float)) and not isinstance(v, bool)}
    for k in sorted(keys):
        vals = [r["metrics"][k] for r in results if isinstance(r["metrics"].get(k), (int, float))]
        summary[k] = {"min": min(vals), "max": max(vals), "mean": float(np.mean(vals))}
    return summary


def _csv_column(file, name):
    with open(file, newline="") as fh:
        return [float(r[name]) for r in csv.DictReader(fh) if r.get("field_id", "") != "summary"]


def recompute_verdicts(out) -> dict:
    """Re-derive every per-seed verdict from the CSV files named in manifest.json."""
    out = Path(out)
    manifest = json.loads((out / "manifest.json").read_text())
    cfg = ScenarioConfig(**manifest["config"])
    verdicts = {}
    for r in manifest["results"]:
        if "error" in r:
            verdicts[r["seed"]] = False
            continue
        files = {f: out / f for f in r["files"]}
        s = r["seed"]
        exp = cfg.experiment
        if exp == "hp-equivalence":
            ok = max(_csv_column(out / f"hp_equivalence_seed{s}.csv", "discrepancy")) <= cfg.knob("tolerance")
        elif exp == "stationarity":
            sol = max(map(abs, _csv_column(out / f"stationarity_seed{s}.csv", "derivative")))
            ctl = max(map(abs, _csv_column(out / f"stationarity_control_seed{s}.csv", "derivative")))
            ok = sol <= cfg.knob("tolerance") and ctl >= cfg.knob("control_min")
        elif exp == "noether":
            drift = lambda c: max(abs(x - c[0]) for x in c)
            ok = drift(_csv_column(out / f"charge_seed{s}.csv", "charge")) <= cfg.knob("tolerance") and (
                drift(_csv_column(out / f"charge_control_seed{s}.csv", "charge")) >= cfg.knob("control_min")
            )
        elif exp == "fundamental-lemma":
            sol = _csv_column(out / f"fundamental_lemma_seed{s}.csv", "derivative")
            ctl = _csv_column(out / f"fundamental_lemma_control_seed{s}.csv", "derivative")
            vacuous = not sol
            ok = max(map(abs, sol), default=0.0) <= cfg.knob("tolerance") and (
                vacuous or max(map(abs, ctl), default=0.0) >= cfg.knob("control_min")
            )
        elif exp == "convergence":
            errs = np.array(_csv_column(out / "convergence.csv", "error"))
            dts = np.array(_csv_column(out / "convergence.csv", "dt"))
            if r["metrics"]["exact"]:
                ok = True
            else:
                order = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
                ok = cfg.knob("order_lo") <= order <= cfg.knob("order_hi")
        else:
            path = io.read_pontryagin_path(files[f"path_seed{s}.csv"])
            ok = path.legendre_residual(cfg.build_system()) <= cfg.knob("legendre_tolerance")
        verdicts[s] = bool(ok)
    return verdicts


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="hpstoch", description=__doc__.splitlines()[0])
    ap.add_argument("verb", choices=["simulate", "verify", "convergence"])
    ap.add_argument("--config", required=True)
    ap.add_argument("--out")
    ap.add_argument("--seeds", help="a..b (inclusive) or a comma list")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.out = args.out
        if args.seeds:
            cfg.seeds = parse_seeds(args.seeds)
        if args.verb == "simulate":
            cfg.experiment = "simulate"
        elif args.verb == "convergence":
            cfg.experiment = "convergence"
        elif cfg.experiment not in VERIFY_EXPERIMENTS:
            raise ConfigError(f"verify needs one of {VERIFY_EXPERIMENTS}, config has {cfg.experiment!r}")
        manifest, status = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2
    for r in manifest["results"]:
        tag = "PASS" if r["passed"] else "FAIL"
        log.info("%s seed=%s %s", tag, r["seed"], r.get("error") or r["metrics"])
    print(f"{'PASS' if manifest['passed'] else 'FAIL'}: {manifest['summary']['n_passed']}"
          f"/{manifest['summary']['n_seeds']} -> {Path(cfg.out) / 'manifest.json'}")
    return status


if __name__ == "__main__":
    raise SystemExit(main())
