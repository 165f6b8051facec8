"""Command-line front end: config parsing, orchestration, reproducible outputs.

Subcommands: check | simulate | experiment | gronwall.  Exit codes: 0 pass,
1 condition/verdict failure, 2 config error, 3 precondition refusal.

Configs are TOML with one section per module; unknown sections or keys are
rejected with field diagnostics.  Every run emits a manifest (config hash,
seed, version, wall clock, verdicts); reruns with identical manifest inputs
reproduce all CSV outputs byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__, conditions, noise as noise_mod, operators, solver, \
    spaces, svgplot, verify
from .conditions import AuditConfig
from .noise import NoiseSpec, NoiseStream
from .operators import EquationSpec
from .solver import SolverConfig
from .spaces import SpectralField, WaveGrid

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_REFUSED = 3


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = problems if isinstance(problems, list) else [problems]
        super().__init__("; ".join(self.problems))


# ---------------------------------------------------------------------------
# schema


_NUM = (int, float)
_SCHEMA = {
    "run": {"seed": int, "output_dir": str},
    "grid": {"dimension": int, "modes_per_axis": int, "period": _NUM},
    "equation": {
        "variant": str, "f_coeffs": list, "fbar_coeffs": list, "fbar_dirs": list,
        "a": (int, float, list), "a0": _NUM, "a1": _NUM, "rho": _NUM,
        "rho1": _NUM, "rho2": _NUM, "rho3": _NUM, "taming_level": _NUM,
        "phi_const": _NUM,
    },
    "noise": {"modes": int, "kind": str, "power": int, "coeffs_norm2": _NUM,
              "decay": _NUM, "profile": str, "b": list},
    "solver": {"dt": _NUM, "horizon": _NUM, "scheme": str,
               "blowup_h_threshold": _NUM, "blowup_v_integral_threshold": _NUM,
               "record_stride": int},
    "initial": {"kind": str, "amplitude": _NUM, "k": list, "band": int},
    "conditions": {"eta": _NUM, "mode": str, "samples": int, "amp_lo": _NUM,
                   "amp_hi": _NUM, "amp_count": int, "band": int,
                   "phi_sq": _NUM, "tol_rel": _NUM},
    "experiment": {"kind": str, "paths": int, "scales": list, "deltas": list,
                   "gammas": list, "quantile_levels": list, "eta": _NUM,
                   "min_exceedances": int, "decrease_factor": _NUM},
    "gronwall": {"family": str, "C": _NUM, "eta": _NUM, "T": _NUM,
                 "f_const": _NUM, "x0": _NUM, "mu": _NUM, "sigma": _NUM,
                 "steps": int, "gammas": list, "R_values": list, "paths": int},
}
_REQUIRED = {"check": ("grid", "equation"), "simulate": ("grid", "equation", "solver"),
             "experiment": ("grid", "equation", "solver", "experiment"),
             "gronwall": ("gronwall",)}


def load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(p, "rb") as fh:
            cfg = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc
    problems = []
    for section, content in cfg.items():
        key = section
        if section not in _SCHEMA or section == "noise":
            # noise lives under [equation.noise], never at top level
            problems.append(f"unknown section [{section}]")
            continue
        if not isinstance(content, dict):
            problems.append(f"[{section}] must be a table")
            continue
        for k, v in content.items():
            if section == "equation" and k == "noise":
                _check_keys("equation.noise", v, _SCHEMA["noise"], problems)
                continue
            allowed = _SCHEMA[key]
            _check_one(f"{section}.{k}", k, v, allowed, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def _check_keys(prefix, table, allowed, problems):
    if not isinstance(table, dict):
        problems.append(f"[{prefix}] must be a table")
        return
    for k, v in table.items():
        _check_one(f"{prefix}.{k}", k, v, allowed, problems)


def _check_one(label, key, value, allowed, problems):
    if key not in allowed:
        problems.append(f"unknown key {label}")
        return
    want = allowed[key]
    if want is list:
        if not isinstance(value, list):
            problems.append(f"{label}: expected a list")
    elif want is str:
        if not isinstance(value, str):
            problems.append(f"{label}: expected a string")
    elif want is int:
        if not isinstance(value, int) or isinstance(value, bool):
            problems.append(f"{label}: expected an integer")
    else:
        if isinstance(value, bool) or not isinstance(value, want):
            problems.append(f"{label}: wrong type {type(value).__name__}")


# ---------------------------------------------------------------------------
# builders


def build_grid(cfg: dict, variant: str) -> WaveGrid:
    g = cfg.get("grid", {})
    d = g.get("dimension", 1)
    comp = d if variant == "tamed_ns" else 1
    return WaveGrid(dimension=d, modes_per_axis=g.get("modes_per_axis", 16),
                    period=g.get("period", spaces.TWO_PI), components=comp)


def build_noise(cfg: dict, grid: WaveGrid) -> NoiseSpec:
    if "noise" not in cfg.get("equation", {}):
        raise ConfigError("equation.noise section is required")
    n = cfg["equation"]["noise"]
    modes = n.get("modes", 16)
    kind = n.get("kind", "none")
    b = n.get("b")
    if b is not None:
        b = np.asarray(b, dtype=float)
    coeffs = None
    if kind in ("additive", "poly"):
        coeffs = noise_mod.l2_profile(modes, n.get("coeffs_norm2", 1.0),
                                      n.get("decay", 1.0))
    return NoiseSpec(mode_count=modes, b=b, g_kind=kind, g_coeffs=coeffs,
                     g_power=n.get("power", 1), g_profile=n.get("profile", "constant"))


def build_spec(cfg: dict) -> EquationSpec:
    eq = cfg.get("equation", {})
    if "variant" not in eq:
        raise ConfigError("equation.variant is required")
    variant = eq["variant"]
    if variant not in operators.VARIANTS:
        raise ConfigError(f"equation.variant: unknown variant {variant!r}")
    grid = build_grid(cfg, variant)
    nspec = build_noise(cfg, grid)
    try:
        if variant == "cahn_hilliard":
            return operators.make_cahn_hilliard(
                grid, nspec, f_coeffs=eq.get("f_coeffs", (0.0, -1.0, 0.0, 1.0)),
                rho=eq.get("rho"))
        if variant == "tamed_ns":
            return operators.make_tamed_ns(grid, nspec,
                                           taming_level=eq.get("taming_level", 1.0))
        if variant == "second_order":
            return operators.make_second_order(
                grid, nspec, a=eq.get("a", 1.0), f_coeffs=eq.get("f_coeffs"),
                fbar_coeffs=eq.get("fbar_coeffs"), fbar_dirs=eq.get("fbar_dirs"),
                rho1=eq.get("rho1"), rho2=eq.get("rho2"), rho3=eq.get("rho3"))
        if variant == "allen_cahn":
            return operators.make_allen_cahn(
                grid, nspec, f_coeffs=eq.get("f_coeffs", (0.0, 1.0, 0.0, -1.0)))
        if variant == "quasilinear_1d":
            return operators.make_quasilinear_1d(
                grid, nspec, a0=eq.get("a0", 1.0), a1=eq.get("a1", 0.0),
                f_coeffs=eq.get("f_coeffs", (0.0,)))
        return operators.make_swift_hohenberg(
            grid, nspec, f_coeffs=eq.get("f_coeffs", (0.0, 1.0, 0.0, -1.0)),
            rho=eq.get("rho"))
    except ValueError as exc:
        raise ConfigError(f"equation: {exc}") from exc


def build_solver(cfg: dict) -> SolverConfig:
    s = cfg.get("solver", {})
    try:
        return SolverConfig(
            dt=s.get("dt", 1e-3), horizon=s.get("horizon", 0.1),
            scheme=s.get("scheme", "imex_euler"),
            blowup_h_threshold=s.get("blowup_h_threshold", 1e6),
            blowup_v_integral_threshold=s.get("blowup_v_integral_threshold", 1e9),
            record_stride=s.get("record_stride", 1))
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc


def build_initial(cfg: dict, spec: EquationSpec, seed: int) -> SpectralField:
    init = cfg.get("initial", {})
    kind = init.get("kind", "gaussian")
    amp = init.get("amplitude", 1.0)
    grid = spec.grid
    if kind == "zero":
        u0 = spaces.constant_field(grid, 0.0)
    elif kind == "constant":
        u0 = spaces.constant_field(grid, amp)
    elif kind == "mode":
        k = init.get("k", [1] + [0] * (grid.dimension - 1))
        u0 = spaces.single_mode_field(grid, k, amp)
    elif kind == "gaussian":
        rng = np.random.default_rng(seed + 0x1234)
        band = init.get("band", max(grid.dealias_limit // 2, 1))
        u0 = spaces.random_band_field(grid, rng, band=band)
        nrm = float(spaces.sobolev_norm(u0, spec.triple.s_H))
        u0 = SpectralField(grid, u0.coeffs * (amp / nrm if nrm > 0 else 0.0))
    else:
        raise ConfigError(f"initial.kind: unknown kind {kind!r}")
    if spec.project_noise:
        u0 = operators.helmholtz_project(u0)
    return u0


def build_audit_config(cfg: dict, seed: int) -> AuditConfig:
    c = cfg.get("conditions", {})
    return AuditConfig(samples=c.get("samples", 2000),
                       amp_lo=c.get("amp_lo", 1e-3), amp_hi=c.get("amp_hi", 1e3),
                       amp_count=c.get("amp_count", 13), band=c.get("band"),
                       seed=seed, phi_sq=c.get("phi_sq"),
                       tol_rel=c.get("tol_rel", 1e-8))


# ---------------------------------------------------------------------------
# serialization helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, SpectralField):
        return {"grid": dataclasses.asdict(obj.grid),
                "coeffs_re": obj.coeffs.real.tolist(),
                "coeffs_im": obj.coeffs.imag.tolist()}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def write_json(path: Path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(v) for v in row) + "\n")


def _csv_cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def config_hash(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out: Path, cfg_path: str, seed: int, t0: float, verdicts: dict,
                   outputs):
    write_json(out / "manifest.json", {
        "config_sha256": config_hash(cfg_path),
        "seed": seed,
        "tool_version": __version__,
        "wallclock_s": round(time.time() - t0, 3),
        "verdicts": verdicts,
        "outputs": sorted(str(o) for o in outputs),
    })


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(cfg: dict, cfg_path: str, seed: int, out: Path, plot: bool) -> int:
    t0 = time.time()
    spec = build_spec(cfg)
    ccfg = cfg.get("conditions", {})
    eta = ccfg.get("eta", 1e-2)
    mode = ccfg.get("mode", "eta_positive")
    audit_cfg = build_audit_config(cfg, seed)

    report = {}
    ok = True

    crit = conditions.check_subcriticality(spec.params)
    report["subcriticality"] = {
        "entries": [{"slot": p.slot, "rho": str(e.rho), "beta": str(e.beta),
                     "slack": str(e.slack), "status": e.status}
                    for p, e in zip(spec.params, crit.entries)],
        "passed": crit.all_admissible,
    }
    ok = ok and crit.all_admissible

    rho_rows = []
    rho_ok = True
    slot_map = {"f": "f", "fbar": "fbar", "g": "g"}
    for p in spec.params:
        try:
            interval = conditions.admissible_rho(spec.variant, spec.grid.dimension,
                                                 slot_map.get(p.slot, p.slot))
        except conditions.NotParameterized:
            continue
        inside = interval.contains(p.rho)
        rho_ok = rho_ok and inside
        rho_rows.append({"slot": p.slot, "rho": str(p.rho),
                         "interval": str(interval), "admissible": inside})
    report["admissible_rho"] = {"entries": rho_rows, "passed": rho_ok}
    ok = ok and rho_ok

    par = conditions.check_parabolicity(spec)
    report["parabolicity"] = {"condition": par.condition, "margin": par.margin,
                              "nu_hat": par.nu_hat, "passed": par.passed,
                              "note": par.note}
    ok = ok and par.passed

    audit = conditions.audit_coercivity(spec, eta, audit_cfg, mode=mode)
    report["coercivity"] = {
        "mode": audit.mode, "passed": audit.passed,
        "min_margin": audit.sampled_min_margin, "theta": audit.theta,
        "M": audit.M_const, "eta": audit.eta, "samples": audit.sample_count,
        "phi_sq": audit.phi_sq, "witness": audit.witness_label or None,
        "witness_coeffs": (_jsonable(audit.failure_witness)
                           if audit.failure_witness is not None else None),
    }
    ok = ok and audit.passed

    if mode == "eta_zero":
        qg = conditions.check_quadratic_growth(spec, audit_cfg)
        report["quadratic_growth"] = _jsonable(qg)
        ok = ok and qg.passed

    report["passed"] = ok
    write_json(out / "check_report.json", report)
    write_manifest(out, cfg_path, seed, t0, {"check": "pass" if ok else "fail"},
                   [out / "check_report.json"])
    print(f"check: {'pass' if ok else 'FAIL'} (report at {out/'check_report.json'})")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_simulate(cfg: dict, cfg_path: str, seed: int, out: Path, plot: bool,
                 n_paths: int) -> int:
    t0 = time.time()
    spec = build_spec(cfg)
    scfg = build_solver(cfg)
    u0 = build_initial(cfg, spec, seed)
    rows = []
    statuses = []
    snapshots = {}
    for p in range(n_paths):
        traj = solver.simulate_path(spec, u0, scfg, NoiseStream(seed, p))
        statuses.append(traj.status)
        for n, h in enumerate(traj.h_norm_series):
            v_run = traj.v_energy_running[min(n, len(traj.v_energy_running) - 1)]
            rows.append((p, n, n * scfg.dt, h, v_run, traj.status))
        snapshots[f"path{p}_times"] = traj.times
        snapshots[f"path{p}_coeffs"] = np.stack([s.coeffs for s in traj.snapshots])
    csv_path = out / "norms.csv"
    write_csv(csv_path, ("path", "step", "time", "h_norm", "v_integral_running",
                         "status"), rows)
    snap_path = out / "snapshots.npz"
    np.savez_compressed(snap_path, **snapshots)
    if plot:
        series = []
        for p in range(min(n_paths, 6)):
            sel = [(r[2], r[3]) for r in rows if r[0] == p]
            series.append(([x for x, _ in sel], [y for _, y in sel], f"path {p}"))
        svgplot.line_plot(str(out / "h_norm.svg"), series, title="H-norm",
                          xlabel="t", ylabel="|u|_H")
    write_manifest(out, cfg_path, seed, t0,
                   {"simulate": {"statuses": statuses}}, [csv_path, snap_path])
    print(f"simulate: {n_paths} path(s), statuses {set(statuses)}")
    return EXIT_PASS


def cmd_experiment(cfg: dict, cfg_path: str, seed: int, out: Path, plot: bool,
                   n_paths_override) -> int:
    t0 = time.time()
    spec = build_spec(cfg)
    scfg = build_solver(cfg)
    u0 = build_initial(cfg, spec, seed)
    e = cfg.get("experiment", {})
    kind = e.get("kind")
    if kind not in ("apriori", "tail", "contdep", "ito", "ito_refine"):
        raise ConfigError(f"experiment.kind: unknown kind {kind!r}")
    paths = n_paths_override or e.get("paths", 128)
    eta = e.get("eta", 1e-2)
    audit_cfg = build_audit_config(cfg, seed)
    outputs = []
    try:
        if kind == "apriori":
            rep = verify.apriori_experiment(spec, u0, e.get("scales", [0, 1, 2, 4]),
                                            paths, scfg, seed, eta=eta,
                                            audit_cfg=audit_cfg)
            rows = zip(rep.scales, rep.x_values, rep.lhs, rep.lhs_se, rep.residuals)
            write_csv(out / "apriori.csv",
                      ("scale", "e_u0_h_sq", "lhs", "lhs_se", "fit_residual"), rows)
            outputs.append(out / "apriori.csv")
            if plot:
                svgplot.line_plot(str(out / "apriori.svg"),
                                  [(rep.x_values, rep.lhs, "estimate"),
                                   (rep.x_values,
                                    rep.slope * rep.x_values + rep.intercept, "fit")],
                                  title="energy vs E|u0|_H^2",
                                  xlabel="E|u0|_H^2", ylabel="E[sup|u|^2+int|u|_V^2]")
        elif kind == "tail":
            rep = verify.tail_experiment(
                spec, u0, paths, scfg, seed, eta=eta,
                gammas=e.get("gammas"),
                quantile_levels=tuple(e.get("quantile_levels",
                                            (0.5, 0.6, 0.7, 0.8, 0.875, 0.925,
                                             0.96, 0.98))),
                min_exceedances=e.get("min_exceedances", 20), audit_cfg=audit_cfg)
            rows = zip(rep.gammas, rep.probs, rep.se,
                       rep.c_fit / np.log(rep.gammas))
            write_csv(out / "tail.csv", ("gamma", "p_hat", "se", "fitted_bound"),
                      rows)
            outputs.append(out / "tail.csv")
            if plot:
                svgplot.line_plot(str(out / "tail.svg"),
                                  [(rep.gammas, rep.probs, "empirical"),
                                   (rep.gammas, rep.c_fit / np.log(rep.gammas),
                                    "c/log gamma")],
                                  title="tail of sup |u|_H", xlabel="gamma",
                                  ylabel="P", logx=True, logy=True)
        elif kind == "contdep":
            deltas = e.get("deltas", [2.0 ** -n for n in range(7)] + [0.0])
            rep = verify.continuous_dependence_experiment(
                spec, u0, u0, deltas, paths, scfg, seed, eta=eta,
                decrease_factor=e.get("decrease_factor", 1.5), audit_cfg=audit_cfg)
            rows = zip(rep.deltas, rep.median_z, rep.q90_z, rep.mean_z,
                       rep.excluded_fraction)
            write_csv(out / "contdep.csv",
                      ("delta", "median_z", "q90_z", "mean_z", "excluded"), rows)
            outputs.append(out / "contdep.csv")
            if plot:
                pos = rep.deltas > 0
                svgplot.line_plot(str(out / "contdep.svg"),
                                  [(rep.deltas[pos], rep.median_z[pos], "median Z")],
                                  title="continuous dependence", xlabel="delta",
                                  ylabel="Z", logx=True, logy=True)
        elif kind == "ito":
            rep = verify.ito_residual_experiment(spec, u0, paths, scfg, seed)
            write_csv(out / "ito.csv", ("mean_cumulative", "se", "within_4se"),
                      [(rep.mean_cumulative, rep.se_cumulative, rep.within_4se)])
            outputs.append(out / "ito.csv")
        else:
            rep = verify.ito_refinement_experiment(spec, u0, paths, scfg, seed)
            write_csv(out / "ito_refine.csv",
                      ("mean_coarse", "mean_fine", "ratio", "within_tolerance"),
                      [(rep.mean_coarse, rep.mean_fine, rep.ratio,
                        rep.within_tolerance)])
            outputs.append(out / "ito_refine.csv")
    except verify.PreconditionError as exc:
        print(f"experiment refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED

    passed = bool(getattr(rep, "passed", getattr(rep, "within_4se",
                                                 getattr(rep, "within_tolerance", True))))
    summary_path = out / "summary.json"
    write_json(summary_path, {"kind": kind, "report": rep, "passed": passed})
    outputs.append(summary_path)
    write_manifest(out, cfg_path, seed, t0,
                   {kind: "pass" if passed else "fail"}, outputs)
    print(f"experiment {kind}: {'pass' if passed else 'FAIL'}")
    return EXIT_PASS if passed else EXIT_FAIL


def cmd_gronwall(cfg: dict, cfg_path: str, seed: int, out: Path, plot: bool,
                 n_paths_override) -> int:
    t0 = time.time()
    g = cfg.get("gronwall", {})
    if "family" not in g:
        raise ConfigError("gronwall.family is required")
    try:
        inst = verify.GronwallInstance(
            family=g["family"], C=g.get("C", 1.0), eta=g.get("eta", 0.0),
            T=g.get("T", 1.0), f_const=g.get("f_const", 1.0), x0=g.get("x0", 1.0),
            mu=g.get("mu", 0.0), sigma=g.get("sigma", 0.5),
            steps=g.get("steps", 512), gammas=tuple(g.get("gammas", (2.0, 4.0, 8.0))),
            R_values=tuple(g.get("R_values", (g.get("f_const", 1.0) * g.get("T", 1.0),))))
    except ValueError as exc:
        raise ConfigError(f"gronwall: {exc}") from exc
    paths = n_paths_override or g.get("paths", 10000)
    verdict = verify.gronwall_harness(inst, paths, seed)
    rows = [(r[0], r[1], r[2], r[3], r[4], r[5], r[6]) for r in verdict.tail_rows]
    write_csv(out / "gronwall.csv",
              ("gamma", "R", "p_hat", "se", "bound", "ok", "slack"), rows)
    write_json(out / "gronwall.json", {"instance": inst, "verdict": verdict})
    if plot and verdict.tail_rows:
        gam = [r[0] for r in verdict.tail_rows]
        svgplot.line_plot(str(out / "gronwall.svg"),
                          [(gam, [r[2] for r in verdict.tail_rows], "empirical"),
                           (gam, [r[4] for r in verdict.tail_rows], "bound")],
                          title="Gronwall tail bound", xlabel="gamma", ylabel="P",
                          logx=True, logy=True)
    write_manifest(out, cfg_path, seed, t0,
                   {"gronwall": "pass" if verdict.passed else "fail"},
                   [out / "gronwall.csv", out / "gronwall.json"])
    print(f"gronwall ({inst.family}): {'pass' if verdict.passed else 'FAIL'}")
    return EXIT_PASS if verdict.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="torusspde",
        description="Spectral SPDE simulation and condition verification on the torus")
    parser.add_argument("command", choices=("check", "simulate", "experiment",
                                            "gronwall"))
    parser.add_argument("--config", required=True, help="TOML config file")
    parser.add_argument("--seed", type=int, default=None, help="override run.seed")
    parser.add_argument("--paths", type=int, default=None,
                        help="override the path count")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--plot", action="store_true", help="emit SVG plots")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG

    run = cfg.get("run", {})
    seed = args.seed if args.seed is not None else run.get("seed", 0)
    out = Path(args.out or run.get("output_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)

    try:
        if args.command == "check":
            return cmd_check(cfg, args.config, seed, out, args.plot)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.config, seed, out, args.plot,
                                args.paths or 1)
        if args.command == "experiment":
            return cmd_experiment(cfg, args.config, seed, out, args.plot, args.paths)
        return cmd_gronwall(cfg, args.config, seed, out, args.plot, args.paths)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
