"""Monte-Carlo experiment harness for the energy, tail, and stability bounds.

Every estimator carries a standard error (and bootstrap CIs where asserted);
verdicts are of the form "bound >= estimate - 3 stderr".  Constants are never
tested, only functional form: affinity of the energy in E||u0||_H^2, 1/log
tail decay, quantile decrease under initial-data perturbations, and the
Gronwall tail inequality on generator families that satisfy its hypothesis
by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from . import conditions, noise as noise_mod, operators, solver, spaces
from .conditions import AuditConfig, CoercivityAudit
from .operators import EquationSpec
from .solver import EnsembleRun, SolverConfig
from .spaces import SpectralField


class PreconditionError(RuntimeError):
    """An experiment was requested on a spec that fails its audit gate."""


def standard_error(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    if x.size <= 1:
        return float("inf")
    return float(np.std(x, ddof=1) / np.sqrt(x.size))


def bootstrap_halfwidth(x: np.ndarray, n_boot: int = 400, seed: int = 0,
                        level: float = 0.99) -> float:
    """Half-width of the percentile bootstrap CI of the mean."""
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    means = np.mean(rng.choice(x, size=(n_boot, x.size), replace=True), axis=1)
    lo, hi = np.quantile(means, [(1 - level) / 2, (1 + level) / 2])
    return float(0.5 * (hi - lo))


@dataclass
class EnsembleResult:
    """Aggregate Monte-Carlo statistics of one ensemble."""

    path_count: int
    sup_h_sq: np.ndarray
    v_int: np.ndarray
    status: np.ndarray
    e_sup_h_sq: float
    se_sup_h_sq: float
    e_v_int: float
    se_v_int: float
    sup_t_e_h_sq: float
    blowup_fraction: float
    tail_gammas: Optional[np.ndarray] = None
    tail_probs: Optional[np.ndarray] = None
    tail_se: Optional[np.ndarray] = None

    @classmethod
    def from_run(cls, run: EnsembleRun, gammas=None) -> "EnsembleResult":
        res = cls(
            path_count=run.n_paths,
            sup_h_sq=run.sup_h_sq, v_int=run.v_int, status=run.status,
            e_sup_h_sq=float(np.mean(run.sup_h_sq)),
            se_sup_h_sq=standard_error(run.sup_h_sq),
            e_v_int=float(np.mean(run.v_int)),
            se_v_int=standard_error(run.v_int),
            sup_t_e_h_sq=float(np.max(run.mean_h_sq_series)),
            blowup_fraction=run.blowup_fraction,
        )
        if gammas is not None:
            sups = np.sqrt(run.sup_h_sq)
            gammas = np.asarray(gammas, dtype=float)
            probs = np.array([np.mean(sups >= g) for g in gammas])
            se = np.sqrt(np.maximum(probs * (1 - probs), 1e-12) / run.n_paths)
            res.tail_gammas, res.tail_probs, res.tail_se = gammas, probs, se
        return res


def require_audit(spec: EquationSpec, eta: float, mode: str = "eta_positive",
                  audit_cfg: AuditConfig = None,
                  audit: CoercivityAudit = None) -> CoercivityAudit:
    """Gatekeeper: experiments on specs failing their audit are refused."""
    if audit is None:
        audit = conditions.audit_coercivity(spec, eta, audit_cfg or AuditConfig(),
                                            mode=mode)
    if not audit.passed:
        raise PreconditionError(
            f"coercivity audit ({audit.mode}) failed: min margin "
            f"{audit.sampled_min_margin:.3e} at {audit.witness_label}")
    return audit


# ---------------------------------------------------------------------------
# a priori energy bound: affinity in E||u0||_H^2


@dataclass
class AprioriReport:
    scales: np.ndarray
    x_values: np.ndarray          # E||u0||_H^2 per scale (exact)
    lhs: np.ndarray               # estimated E[sup||u||_H^2 + int||u||_V^2]
    lhs_se: np.ndarray
    lhs_boot: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    residuals: np.ndarray
    residual_ok: bool
    blowups: int
    passed: bool
    failing_scale: Optional[float] = None


def apriori_experiment(spec: EquationSpec, u0_profile: SpectralField,
                       scales: Sequence[float], paths_per_scale: int,
                       cfg: SolverConfig, seed: int, eta: float = 1e-2,
                       audit_cfg: AuditConfig = None,
                       audit: CoercivityAudit = None) -> AprioriReport:
    """Affine fit of the terminal energy against the initial energy."""
    require_audit(spec, eta, "eta_positive", audit_cfg, audit)
    profile_h_sq = float(spaces.sobolev_norm_sq(u0_profile, spec.triple.s_H))
    xs, lhs, ses, boots = [], [], [], []
    blowups = 0
    failing = None
    for i, c in enumerate(scales):
        u0 = SpectralField(spec.grid, u0_profile.coeffs * c)
        run = solver.simulate_ensemble(spec, u0, cfg, seed + 1000 * i,
                                       paths_per_scale)
        nb = int(np.sum(run.status != solver.STATUS_COMPLETED))
        blowups += nb
        if nb and failing is None:
            failing = float(c)
        per_path = run.sup_h_sq + run.v_int
        xs.append(c * c * profile_h_sq)
        lhs.append(float(np.mean(per_path)))
        ses.append(standard_error(per_path))
        boots.append(bootstrap_halfwidth(per_path, seed=seed + i))
    xs, lhs = np.array(xs), np.array(lhs)
    ses, boots = np.array(ses), np.array(boots)
    slope, intercept = np.polyfit(xs, lhs, 1)
    pred = slope * xs + intercept
    ss_res = float(np.sum((lhs - pred) ** 2))
    ss_tot = float(np.sum((lhs - np.mean(lhs)) ** 2))
    r_sq = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    residuals = lhs - pred
    residual_ok = bool(np.all(np.abs(residuals) <= 3.0 * boots + 1e-12))
    finite = bool(np.isfinite(slope) and np.isfinite(intercept)
                  and np.all(np.isfinite(lhs)))
    return AprioriReport(np.array(scales, dtype=float), xs, lhs, ses, boots,
                         float(slope), float(intercept), float(r_sq), residuals,
                         residual_ok, blowups, passed=finite and blowups == 0,
                         failing_scale=failing)


# ---------------------------------------------------------------------------
# logarithmic tail bound


@dataclass
class TailReport:
    gammas: np.ndarray
    probs: np.ndarray
    se: np.ndarray
    c_fit: float
    fit_region: np.ndarray        # bool mask of gammas used for the fit
    check_region: np.ndarray
    bound_ok: bool
    inconclusive: bool
    sup_t_e_h_sq: float
    decay_exponent: float
    blowup_fraction: float
    passed: bool


def tail_experiment(spec: EquationSpec, u0: SpectralField, paths: int,
                    cfg: SolverConfig, seed: int, eta: float = 0.0,
                    gammas: Sequence[float] = None,
                    quantile_levels: Sequence[float] = (0.5, 0.6, 0.7, 0.8,
                                                        0.875, 0.925, 0.96, 0.98),
                    min_exceedances: int = 20,
                    audit_cfg: AuditConfig = None,
                    audit: CoercivityAudit = None) -> TailReport:
    """Empirical P(sup_t ||u||_H >= gamma) against a fitted c / log(gamma).

    The envelope constant c = max p_hat * log(gamma) is fitted on the
    small-gamma two-thirds of the grid; the decay form is then checked on
    the large-gamma remainder: empirical tail <= c/log(gamma) + 3 stderr.
    Grids with too few exceedances come back inconclusive.
    """
    require_audit(spec, eta, "eta_zero", audit_cfg, audit)
    run = solver.simulate_ensemble(spec, u0, cfg, seed, paths)
    sups = np.sqrt(run.sup_h_sq)
    if gammas is None:
        qs = np.quantile(sups, quantile_levels)
        gammas = np.maximum(qs, np.nextafter(1.0, 2.0))
        gammas = np.unique(gammas)
    gammas = np.asarray(gammas, dtype=float)
    if np.any(gammas <= 1.0):
        raise ValueError("tail bound requires gamma > 1")
    result = EnsembleResult.from_run(run, gammas=gammas)
    probs, se = result.tail_probs, result.tail_se
    counts = probs * paths

    n_fit = max((2 * len(gammas) + 2) // 3, 2)
    fit_region = np.zeros(len(gammas), dtype=bool)
    fit_region[:n_fit] = True
    check_region = ~fit_region
    c_fit = float(np.max(probs[fit_region] * np.log(gammas[fit_region])))

    checkable = check_region & (counts >= min_exceedances)
    inconclusive = not np.any(checkable)
    bound_ok = bool(np.all(
        probs[checkable] <= c_fit / np.log(gammas[checkable]) + 3.0 * se[checkable]))

    pos = probs > 0
    decay = 0.0
    if np.sum(pos) >= 3:
        decay = float(-np.polyfit(np.log(np.log(gammas[pos])),
                                  np.log(probs[pos]), 1)[0])
    return TailReport(gammas, probs, se, c_fit, fit_region, check_region,
                      bound_ok, inconclusive, result.sup_t_e_h_sq, decay,
                      run.blowup_fraction,
                      passed=inconclusive or bound_ok)


# ---------------------------------------------------------------------------
# continuous dependence on initial data (coupled noise)


@dataclass
class ContdepReport:
    deltas: np.ndarray
    median_z: np.ndarray
    q90_z: np.ndarray
    mean_z: np.ndarray            # E[Z^q] with q = 1
    excluded_fraction: np.ndarray
    floor: float
    zero_delta_exact: bool
    monotone_ok: bool
    passed: bool


def continuous_dependence_experiment(spec: EquationSpec, u0: SpectralField,
                                     perturbation: SpectralField,
                                     deltas: Sequence[float], paths: int,
                                     cfg: SolverConfig, seed: int,
                                     eta: float = 1e-2,
                                     decrease_factor: float = 1.5,
                                     floor_delta: float = 2.0 ** -30,
                                     audit_cfg: AuditConfig = None,
                                     audit: CoercivityAudit = None) -> ContdepReport:
    """Coupled-noise distance Z = sup_t||u-u_d||_H + ||u-u_d||_{L2(V)} vs delta."""
    require_audit(spec, eta, "eta_positive", audit_cfg, audit)
    grid = spec.grid

    def _coupled(delta: float):
        u0_b = SpectralField(grid, u0.coeffs + delta * perturbation.coeffs)
        return solver.simulate_coupled(spec, u0, u0_b, cfg, seed, paths)

    med, q90, mean, excl = [], [], [], []
    zero_exact = True
    for d in deltas:
        cr = _coupled(float(d))
        z = cr.z_distance[cr.valid]
        excl.append(1.0 - float(np.mean(cr.valid)))
        if d == 0.0:
            zero_exact = bool(np.all(cr.z_distance == 0.0))
        if z.size == 0:
            med.append(np.nan)
            q90.append(np.nan)
            mean.append(np.nan)
            continue
        med.append(float(np.median(z)))
        q90.append(float(np.quantile(z, 0.9)))
        mean.append(float(np.mean(z)))
    floor_run = _coupled(floor_delta)
    floor = float(np.median(floor_run.z_distance[floor_run.valid])) \
        if np.any(floor_run.valid) else np.nan

    med_arr = np.array(med)
    deltas_arr = np.asarray(deltas, dtype=float)
    pos = deltas_arr > 0
    order = np.argsort(-deltas_arr[pos])
    m = med_arr[pos][order]
    monotone_ok = True
    for i in range(len(m) - 1):
        at_floor = m[i] <= 10.0 * floor if np.isfinite(floor) else False
        if not at_floor and not m[i + 1] <= m[i] / decrease_factor:
            monotone_ok = False
            break
    return ContdepReport(deltas_arr, med_arr, np.array(q90), np.array(mean),
                         np.array(excl), floor, zero_exact, monotone_ok,
                         passed=zero_exact and monotone_ok)


# ---------------------------------------------------------------------------
# discrete Ito ledger experiments


@dataclass
class ItoReport:
    mean_cumulative: float
    se_cumulative: float
    within_4se: bool
    paths: int


def ito_residual_experiment(spec: EquationSpec, u0: SpectralField, paths: int,
                            cfg: SolverConfig, seed: int) -> ItoReport:
    """Ensemble mean of the cumulative Ito defect, with its 4-sigma test."""
    run = solver.simulate_ensemble(spec, u0, cfg, seed, paths, record_ledger=True)
    mean = float(np.mean(run.ledger_cumsum))
    se = standard_error(run.ledger_cumsum)
    return ItoReport(mean, se, bool(abs(mean) <= 4.0 * se), paths)


@dataclass
class ItoRefinementReport:
    mean_coarse: float
    mean_fine: float
    ratio: float                 # fine / coarse, expected ~ 1/2
    within_tolerance: bool


def ito_refinement_experiment(spec: EquationSpec, u0: SpectralField, paths: int,
                              cfg: SolverConfig, seed: int,
                              rel_tol: float = 0.2) -> ItoRefinementReport:
    """Cumulative Ito defect at dt and dt/2 on shared Brownian paths."""
    coarse = solver.simulate_ensemble(spec, u0, cfg, seed, paths,
                                      noise_refine=2, record_ledger=True)
    fine_cfg = SolverConfig(dt=cfg.dt / 2, horizon=cfg.horizon, scheme=cfg.scheme,
                            blowup_h_threshold=cfg.blowup_h_threshold,
                            blowup_v_integral_threshold=cfg.blowup_v_integral_threshold)
    fine = solver.simulate_ensemble(spec, u0, fine_cfg, seed, paths,
                                    noise_refine=1, record_ledger=True)
    mc = float(np.mean(coarse.ledger_cumsum))
    mf = float(np.mean(fine.ledger_cumsum))
    ratio = mf / mc if mc != 0 else np.inf
    return ItoRefinementReport(mc, mf, ratio,
                               bool(abs(ratio - 0.5) <= rel_tol * 0.5))


# ---------------------------------------------------------------------------
# stochastic Gronwall lemma: bound evaluator and empirical harness


def gronwall_bound(C: float, eta: float, R: float, gamma: float, EX0: float):
    """(4C/gamma) e^{4CR} (EX0 + eta); returns (value, overflowed flag).

    Evaluated in log space so moderate C*R cannot overflow prematurely.
    """
    if C < 1:
        raise ValueError("C must be >= 1")
    if gamma <= 0 or R < 0 or eta < 0 or EX0 < 0:
        raise ValueError("need gamma > 0, R >= 0, eta >= 0, EX0 >= 0")
    base = EX0 + eta
    if base == 0.0:
        return 0.0, False
    log_val = math.log(4.0 * C) + 4.0 * C * R + math.log(base) - math.log(gamma)
    if log_val > 700.0:
        return float("inf"), True
    return math.exp(log_val), False


def deterministic_corollary_bound(C: float, int_f: float, X0: float) -> float:
    """X(tau) <= 4C e^{4C int f} X(0), the deterministic specialization."""
    val, _ = gronwall_bound(C, 0.0, int_f, 1.0, X0)
    return val


@dataclass(frozen=True)
class GronwallInstance:
    """A generator family satisfying the integrated comparison hypothesis.

    family:
      'deterministic'  X(t) = x0 e^{f t}, Y = 0 (hypothesis holds with C = 1)
      'sup_gbm'        X(t) = running sup of a geometric Brownian motion
                       (exact Brownian-bridge maxima; closed-form tail)
      'eta_driven'     X(t) = eta * U * (e^{f t} - 1), U ~ Uniform[1/2, 1]
    """

    family: str
    C: float = 1.0
    eta: float = 0.0
    T: float = 1.0
    f_const: float = 1.0
    x0: float = 1.0
    mu: float = 0.0
    sigma: float = 0.5
    steps: int = 512
    gammas: tuple = (2.0, 4.0, 8.0)
    R_values: tuple = (1.0,)

    def __post_init__(self):
        if self.family not in ("deterministic", "sup_gbm", "eta_driven"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.C < 1 or self.eta < 0:
            raise ValueError("need C >= 1 and eta >= 0")

    def int_f(self) -> float:
        return self.f_const * self.T

    def spot_times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, 5)


def _simulate_gronwall(inst: GronwallInstance, paths: int, seed: int):
    """Per-path X at the spot times and at T; exact where closed forms exist."""
    times = inst.spot_times()
    if inst.family == "deterministic":
        spot = np.tile(inst.x0 * np.exp(inst.f_const * times), (paths, 1))
        return spot, spot[:, -1]
    if inst.family == "eta_driven":
        u = 0.5 + 0.5 * noise_mod.counter_uniforms(seed, noise_mod.STREAM_GRONWALL,
                                                   np.arange(paths), 0, 1)[:, 0]
        growth = np.exp(inst.f_const * times) - 1.0
        spot = inst.eta * u[:, None] * growth[None, :]
        return spot, spot[:, -1]
    # sup_gbm: log-walk with exact bridge maxima per step
    dt = inst.T / inst.steps
    nu = inst.mu - 0.5 * inst.sigma ** 2
    pid = np.arange(paths)
    log_l = np.full(paths, np.log(inst.x0))
    run_max = log_l.copy()
    spot = np.empty((paths, len(times)))
    spot[:, 0] = np.exp(run_max)
    spot_idx = {int(round(t / dt)): j for j, t in enumerate(times) if t > 0}
    for n in range(inst.steps):
        draws = noise_mod.counter_uniforms(seed, noise_mod.STREAM_GRONWALL,
                                           pid, n, 2)
        xi = ndtri(draws[:, 0])
        u_bridge = draws[:, 1]
        b = log_l + nu * dt + inst.sigma * np.sqrt(dt) * xi
        gap_sq = (b - log_l) ** 2 - 2.0 * inst.sigma ** 2 * dt * np.log(u_bridge)
        bridge_max = 0.5 * (log_l + b + np.sqrt(gap_sq))
        run_max = np.maximum(run_max, bridge_max)
        log_l = b
        if (n + 1) in spot_idx:
            spot[:, spot_idx[n + 1]] = np.exp(run_max)
    return spot, spot[:, -1]


def gronwall_exact_tail(inst: GronwallInstance, gamma: float) -> Optional[float]:
    """Closed-form P(X(T) >= gamma) for the oracle families."""
    if inst.family == "deterministic":
        return 1.0 if inst.x0 * np.exp(inst.int_f()) >= gamma else 0.0
    if inst.family == "eta_driven":
        g = inst.eta * (np.exp(inst.int_f()) - 1.0)
        if g <= 0:
            return 0.0
        u = gamma / g
        return float(np.clip((1.0 - u) / 0.5, 0.0, 1.0))
    # running sup of GBM: reflection formula in log space
    a = np.log(gamma / inst.x0)
    if a <= 0:
        return 1.0
    nu = inst.mu - 0.5 * inst.sigma ** 2
    s = inst.sigma * np.sqrt(inst.T)
    term1 = 1.0 - ndtr((a - nu * inst.T) / s)
    term2 = np.exp(2.0 * nu * a / inst.sigma ** 2) * (1.0 - ndtr((a + nu * inst.T) / s))
    return float(term1 + term2)


@dataclass
class GronwallVerdict:
    hypothesis_ok: bool
    hypothesis_margins: np.ndarray       # rhs - lhs per spot pair (>= -3 se)
    tail_rows: list                      # (gamma, R, p_hat, se, bound, ok, slack)
    bound_ok: bool
    oracle_ok: Optional[bool]
    oracle_max_err: Optional[float]
    passed: bool


def gronwall_harness(inst: GronwallInstance, paths: int, seed: int = 0,
                     oracle_tol_se: float = 4.0) -> GronwallVerdict:
    """Spot-verify the hypothesis, then test the tail bound on a (gamma, R) grid."""
    spot, x_T = _simulate_gronwall(inst, paths, seed)
    times = inst.spot_times()

    margins = []
    hyp_ok = True
    for i in range(len(times) - 1):
        lam, Lam = times[i], times[i + 1]
        lhs = spot[:, i + 1]
        rhs = (inst.C * (spot[:, i] + inst.eta)
               + (spot[:, i + 1] + inst.eta) * inst.f_const * (Lam - lam))
        diff = rhs - lhs
        margin = float(np.mean(diff))
        margins.append(margin)
        if margin < -3.0 * standard_error(diff):
            hyp_ok = False
    if not hyp_ok:
        return GronwallVerdict(False, np.array(margins), [], False, None, None,
                               passed=False)

    int_f = inst.int_f()
    ex0 = float(np.mean(spot[:, 0]))
    rows = []
    bound_ok = True
    for gamma in inst.gammas:
        p_hat = float(np.mean(x_T >= gamma))
        se = float(np.sqrt(max(p_hat * (1 - p_hat), 1e-12) / paths))
        for R in inst.R_values:
            val, overflow = gronwall_bound(inst.C, inst.eta, R, gamma, ex0)
            p_f_exceeds = 1.0 if int_f > R else 0.0
            rhs = val + p_f_exceeds + 3.0 * se
            ok = bool(p_hat <= rhs) and not overflow
            slack = rhs / p_hat if p_hat > 0 else np.inf
            rows.append((float(gamma), float(R), p_hat, se, val, ok, slack))
            bound_ok = bound_ok and ok

    oracle_ok = None
    max_err = None
    errs = []
    for gamma in inst.gammas:
        p_exact = gronwall_exact_tail(inst, float(gamma))
        if p_exact is None:
            continue
        p_hat = float(np.mean(x_T >= gamma))
        se = float(np.sqrt(max(p_exact * (1 - p_exact), 1e-12) / paths))
        errs.append(abs(p_hat - p_exact) / max(se, 1e-12))
    if errs:
        max_err = float(np.max(errs))
        oracle_ok = bool(max_err <= oracle_tol_se)
    return GronwallVerdict(True, np.array(margins), rows, bound_ok, oracle_ok,
                           max_err, passed=bound_ok and (oracle_ok is not False))
