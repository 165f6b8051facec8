"""Semi-implicit Euler-Maruyama time stepping with energy ledger and blow-up monitor.

The stepper solves (I + dt L) u_{n+1} = u_n + dt N(t, u_n) + B(t, u_n) dW,
where L is the constant-coefficient leading symbol inverted mode-wise and N
collects the nonlinear remainder.  The quasilinear equation freezes the grid
mean of a(u_n) in L at each step.

Paths are integrated in vectorized batches; per-path increment streams are
counter-based, so results are independent of how a batch is split.  The
monitor halts a path when ||u||_H^2 or the running V-integral crosses its
threshold (the discrete shadow of localization by stopping times), or when
coefficients overflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import noise as noise_mod
from . import operators, spaces
from .operators import EquationSpec
from .spaces import SpectralField

STATUS_COMPLETED = 0
STATUS_BLOWN_UP = 1
STATUS_OVERFLOW = 2
STATUS_NAMES = {STATUS_COMPLETED: "completed", STATUS_BLOWN_UP: "blown_up",
                STATUS_OVERFLOW: "overflow"}


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    horizon: float
    scheme: str = "imex_euler"
    blowup_h_threshold: float = 1e6      # on ||u||_H^2
    blowup_v_integral_threshold: float = 1e9
    record_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0 or self.horizon <= 0 or self.dt > self.horizon + 1e-15:
            raise ValueError("need 0 < dt <= horizon")
        if self.scheme not in ("imex_euler", "explicit_euler"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.blowup_h_threshold <= 0 or self.blowup_v_integral_threshold <= 0:
            raise ValueError("blow-up thresholds must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class LedgerRow:
    step: int
    delta_half_h_sq: float
    energy_drain: float      # -E_u(t_n) * dt
    martingale: float        # (B(t,u_n)^* u_n, dW)_U
    residual: float          # delta + E dt - martingale


@dataclass
class Trajectory:
    times: np.ndarray
    snapshots: List[SpectralField]
    h_norm_series: np.ndarray
    v_energy_running: np.ndarray
    ledger: List[LedgerRow]
    status: str
    blowup_step: Optional[int] = None

    @property
    def v_energy_total(self) -> float:
        return float(self.v_energy_running[-1])


@dataclass
class EnsembleRun:
    """Vectorized per-path outcome of an ensemble integration."""

    n_paths: int
    n_steps: int
    dt: float
    sup_h_sq: np.ndarray
    v_int: np.ndarray
    terminal_h_sq: np.ndarray
    status: np.ndarray
    blowup_step: np.ndarray          # -1 when not triggered
    mean_h_sq_series: np.ndarray     # ensemble mean of ||u||_H^2 per time node
    h_series: Optional[np.ndarray] = None          # (steps+1, P) if recorded
    ledger_cumsum: Optional[np.ndarray] = None     # (P,) sum of residuals
    ledger_rows: Optional[np.ndarray] = None       # (steps, P, 4) if recorded
    terminal_coeffs: Optional[np.ndarray] = None

    @property
    def blowup_fraction(self) -> float:
        return float(np.mean(self.status != STATUS_COMPLETED))


def _batch_u0(spec: EquationSpec, u0: SpectralField, n_paths: int) -> np.ndarray:
    base = u0.coeffs
    want = (n_paths,) + spec.grid.field_shape
    if base.shape == want:
        return base.copy()
    if base.shape == spec.grid.field_shape:
        return np.broadcast_to(base, want).copy()
    raise ValueError(f"initial data shape {base.shape} incompatible with {want}")


def _inv_multiplier(spec: EquationSpec, dt: float, u: SpectralField = None):
    sym = operators.implicit_symbol(spec, u)
    denom = 1.0 + dt * sym
    if np.min(denom) <= 0.0:
        raise ValueError("implicit multiplier not invertible; reduce dt")
    return sym, 1.0 / denom


def step(spec: EquationSpec, u: SpectralField, t: float,
         dW: noise_mod.WienerIncrement, cfg: SolverConfig) -> SpectralField:
    """One time step from u at time t; batched when u/dW carry path axes."""
    ws = spaces.StepWorkspace(u)
    diff = noise_mod.apply_diffusion(spec, t, u, dW, ws)
    drift_u = operators.drift(spec, t, u, ws)
    if cfg.scheme == "explicit_euler":
        return SpectralField(spec.grid, u.coeffs + cfg.dt * drift_u.coeffs + diff.coeffs)
    sym, inv = _inv_multiplier(spec, cfg.dt, u if spec.symbol_depends_on_state else None)
    remainder = drift_u.coeffs + sym * u.coeffs
    return SpectralField(spec.grid, (u.coeffs + cfg.dt * remainder + diff.coeffs) * inv)


def simulate_ensemble(spec: EquationSpec, u0: SpectralField, cfg: SolverConfig,
                      seed: int, n_paths: int, path_ids=None, noise_refine: int = 1,
                      record_h_series: bool = False, record_ledger: bool = False,
                      keep_terminal: bool = False) -> EnsembleRun:
    """Integrate n_paths independent paths in one vectorized batch.

    Per-path increments depend only on (seed, path_id, step), so any split
    of the batch reproduces identical paths.  Frozen (blown-up/overflowed)
    paths stop updating; their statistics keep the values at the freeze.
    """
    grid = spec.grid
    triple = spec.triple
    n_steps = cfg.n_steps
    if path_ids is None:
        path_ids = np.arange(n_paths)
    path_ids = np.asarray(path_ids)

    coeffs = _batch_u0(spec, u0, n_paths)
    u = SpectralField(grid, coeffs)
    s_H, s_V = triple.s_H, triple.s_V

    h_sq = spaces.sobolev_norm_sq(u, s_H)
    v_sq = spaces.sobolev_norm_sq(u, s_V)
    sup_h_sq = h_sq.copy()
    v_int = np.zeros(n_paths)
    status = np.full(n_paths, STATUS_COMPLETED, dtype=np.int64)
    blow_step = np.full(n_paths, -1, dtype=np.int64)
    active = np.ones(n_paths, dtype=bool)

    mean_series = np.empty(n_steps + 1)
    mean_series[0] = np.mean(h_sq)
    h_series = None
    if record_h_series:
        h_series = np.empty((n_steps + 1, n_paths))
        h_series[0] = np.sqrt(h_sq)
    ledger_cumsum = np.zeros(n_paths) if record_ledger else None
    ledger_rows = (np.empty((n_steps, n_paths, 4)) if record_ledger else None)

    static_symbol = not spec.symbol_depends_on_state
    sym = inv = None
    if cfg.scheme == "imex_euler" and static_symbol:
        sym, inv = _inv_multiplier(spec, cfg.dt)

    bshape = (n_paths,) + (1,) * (grid.dimension + 1)
    for n in range(n_steps):
        t = n * cfg.dt
        w = noise_mod.batch_increments(seed, path_ids, n, cfg.dt,
                                       spec.noise.mode_count, refine=noise_refine)
        dW = noise_mod.WienerIncrement(dt=cfg.dt, values=w)
        ws = spaces.StepWorkspace(u)
        diff = noise_mod.apply_diffusion(spec, t, u, dW, ws)
        drift_u = operators.drift(spec, t, u, ws)
        if cfg.scheme == "explicit_euler":
            new_coeffs = u.coeffs + cfg.dt * drift_u.coeffs + diff.coeffs
        else:
            if not static_symbol:
                sym, inv = _inv_multiplier(spec, cfg.dt, u)
            remainder = drift_u.coeffs + sym * u.coeffs
            new_coeffs = (u.coeffs + cfg.dt * remainder + diff.coeffs) * inv

        if record_ledger:
            energy = operators.energy_functional(spec, t, u, drift_u=drift_u,
                                                 ws=ws)
            mart = spaces.duality_pairing(diff, u, triple)

        mask = active.reshape(bshape)
        new_coeffs = np.where(mask, new_coeffs, u.coeffs)
        u_new = SpectralField(grid, new_coeffs)

        h_sq_new = spaces.sobolev_norm_sq(u_new, s_H)
        v_sq_new = spaces.sobolev_norm_sq(u_new, s_V)
        v_int = np.where(active, v_int + 0.5 * cfg.dt * (v_sq + v_sq_new), v_int)

        if record_ledger:
            delta = 0.5 * (h_sq_new - h_sq)
            resid = np.where(active, delta + energy * cfg.dt - mart, 0.0)
            ledger_cumsum += resid
            ledger_rows[n, :, 0] = np.where(active, delta, 0.0)
            ledger_rows[n, :, 1] = np.where(active, -energy * cfg.dt, 0.0)
            ledger_rows[n, :, 2] = np.where(active, mart, 0.0)
            ledger_rows[n, :, 3] = resid

        finite = np.isfinite(h_sq_new) & np.isfinite(v_sq_new)
        overflowed = active & ~finite
        crossed = active & finite & ((h_sq_new > cfg.blowup_h_threshold)
                                     | (v_int > cfg.blowup_v_integral_threshold))
        status[overflowed] = STATUS_OVERFLOW
        status[crossed] = STATUS_BLOWN_UP
        blow_step[overflowed | crossed] = n + 1
        active = active & finite & ~crossed

        # freeze overflowed paths at the previous finite state
        if np.any(overflowed):
            mask_of = overflowed.reshape(bshape)
            u_new = SpectralField(grid, np.where(mask_of, u.coeffs, u_new.coeffs))
            h_sq_new = np.where(overflowed, h_sq, h_sq_new)
            v_sq_new = np.where(overflowed, v_sq, v_sq_new)

        u, h_sq, v_sq = u_new, h_sq_new, v_sq_new
        sup_h_sq = np.maximum(sup_h_sq, h_sq)
        mean_series[n + 1] = np.mean(h_sq)
        if record_h_series:
            h_series[n + 1] = np.sqrt(h_sq)

    return EnsembleRun(
        n_paths=n_paths, n_steps=n_steps, dt=cfg.dt,
        sup_h_sq=sup_h_sq, v_int=v_int, terminal_h_sq=h_sq, status=status,
        blowup_step=blow_step, mean_h_sq_series=mean_series, h_series=h_series,
        ledger_cumsum=ledger_cumsum, ledger_rows=ledger_rows,
        terminal_coeffs=u.coeffs if keep_terminal else None,
    )


def energy_ledger_step(spec: EquationSpec, u_n: SpectralField,
                       u_np1: SpectralField, t: float,
                       dW: noise_mod.WienerIncrement, eta: float = 0.0,
                       step_index: int = 0) -> LedgerRow:
    """One row of the discrete Ito ledger for consecutive states.

    Records Delta(1/2 ||u||_H^2), -E_u(t_n) dt, the martingale increment
    (B(t,u_n)^* u_n, dW)_U, and the residual r_n = Delta + E dt - mart, the
    discrete Ito defect.  ``eta`` shifts the drain to the (1/2+eta)-weighted
    functional used by the coercivity condition; the residual always uses
    the Ito weight eta = 0.
    """
    triple = spec.triple
    dt = dW.dt
    h_old = float(np.sum(spaces.sobolev_norm_sq(u_n, triple.s_H)))
    h_new = float(np.sum(spaces.sobolev_norm_sq(u_np1, triple.s_H)))
    delta = 0.5 * (h_new - h_old)
    energy = float(np.sum(operators.energy_functional(spec, t, u_n)))
    diff = noise_mod.apply_diffusion(spec, t, u_n, dW)
    mart = float(np.sum(spaces.duality_pairing(diff, u_n, triple)))
    hs_sq = float(np.sum(noise_mod.hilbert_schmidt_sq(spec, t, u_n)))
    drain = -(energy + eta * hs_sq) * dt
    return LedgerRow(step=step_index, delta_half_h_sq=delta,
                     energy_drain=drain, martingale=mart,
                     residual=delta + energy * dt - mart)


def simulate_path(spec: EquationSpec, u0: SpectralField, cfg: SolverConfig,
                  stream: noise_mod.NoiseStream,
                  record_ledger: bool = False) -> Trajectory:
    """Integrate one path, recording norm series, strided snapshots, ledger.

    Arithmetic is identical to simulate_ensemble with this path id, so the
    trajectory matches the ensemble member bit for bit.
    """
    grid, triple = spec.grid, spec.triple
    n_steps = cfg.n_steps
    stride = max(cfg.record_stride, 1)
    pid = np.array([stream.path_index])

    u = SpectralField(grid, _batch_u0(spec, u0, 1))
    h_sq = float(spaces.sobolev_norm_sq(u, triple.s_H)[0])
    v_sq = float(spaces.sobolev_norm_sq(u, triple.s_V)[0])
    h_series = [np.sqrt(h_sq)]
    v_running = [0.0]
    snapshots = [SpectralField(grid, u.coeffs[0].copy())]
    snap_times = [0.0]
    ledger: List[LedgerRow] = []
    status = STATUS_COMPLETED
    blowup_step = None

    static_symbol = not spec.symbol_depends_on_state
    sym = inv = None
    if cfg.scheme == "imex_euler" and static_symbol:
        sym, inv = _inv_multiplier(spec, cfg.dt)

    for n in range(n_steps):
        t = n * cfg.dt
        w = noise_mod.batch_increments(stream.master_seed, pid, n, cfg.dt,
                                       spec.noise.mode_count)
        dW = noise_mod.WienerIncrement(cfg.dt, w)
        ws = spaces.StepWorkspace(u)
        diff = noise_mod.apply_diffusion(spec, t, u, dW, ws)
        drift_u = operators.drift(spec, t, u, ws)
        if cfg.scheme == "explicit_euler":
            new_coeffs = u.coeffs + cfg.dt * drift_u.coeffs + diff.coeffs
        else:
            if not static_symbol:
                sym, inv = _inv_multiplier(spec, cfg.dt, u)
            remainder = drift_u.coeffs + sym * u.coeffs
            new_coeffs = (u.coeffs + cfg.dt * remainder + diff.coeffs) * inv
        u_new = SpectralField(grid, new_coeffs)
        h_sq_new = float(spaces.sobolev_norm_sq(u_new, triple.s_H)[0])
        v_sq_new = float(spaces.sobolev_norm_sq(u_new, triple.s_V)[0])

        if record_ledger:
            energy = float(operators.energy_functional(spec, t, u,
                                                       drift_u=drift_u,
                                                       ws=ws)[0])
            mart = float(spaces.duality_pairing(diff, u, triple)[0])
            delta = 0.5 * (h_sq_new - h_sq)
            ledger.append(LedgerRow(step=n, delta_half_h_sq=delta,
                                    energy_drain=-energy * cfg.dt, martingale=mart,
                                    residual=delta + energy * cfg.dt - mart))

        if not (np.isfinite(h_sq_new) and np.isfinite(v_sq_new)):
            status, blowup_step = STATUS_OVERFLOW, n + 1
            break
        v_running.append(v_running[-1] + 0.5 * cfg.dt * (v_sq + v_sq_new))
        u, h_sq, v_sq = u_new, h_sq_new, v_sq_new
        h_series.append(np.sqrt(h_sq))
        if (n + 1) % stride == 0 or n + 1 == n_steps:
            snapshots.append(SpectralField(grid, u.coeffs[0].copy()))
            snap_times.append((n + 1) * cfg.dt)
        if h_sq > cfg.blowup_h_threshold or v_running[-1] > cfg.blowup_v_integral_threshold:
            status, blowup_step = STATUS_BLOWN_UP, n + 1
            break

    return Trajectory(times=np.array(snap_times), snapshots=snapshots,
                      h_norm_series=np.array(h_series),
                      v_energy_running=np.array(v_running),
                      ledger=ledger, status=STATUS_NAMES[status],
                      blowup_step=blowup_step)


@dataclass
class CoupledRun:
    """Coupled-noise pair statistics for continuous-dependence experiments."""

    sup_h_diff: np.ndarray       # per path: sup_t ||u - u_tilde||_H
    v_int_diff: np.ndarray       # per path: int ||u - u_tilde||_V^2 dt
    status_a: np.ndarray
    status_b: np.ndarray

    @property
    def z_distance(self) -> np.ndarray:
        return self.sup_h_diff + np.sqrt(self.v_int_diff)

    @property
    def valid(self) -> np.ndarray:
        return (self.status_a == STATUS_COMPLETED) & (self.status_b == STATUS_COMPLETED)


def simulate_coupled(spec: EquationSpec, u0_a: SpectralField, u0_b: SpectralField,
                     cfg: SolverConfig, seed: int, n_paths: int) -> CoupledRun:
    """Evolve two ensembles under identical increment streams, tracking the gap."""
    grid = spec.grid
    triple = spec.triple
    n_steps = cfg.n_steps
    path_ids = np.arange(n_paths)

    ua = SpectralField(grid, _batch_u0(spec, u0_a, n_paths))
    ub = SpectralField(grid, _batch_u0(spec, u0_b, n_paths))

    def _diff_norms(x, y):
        d = SpectralField(grid, x.coeffs - y.coeffs)
        return (spaces.sobolev_norm_sq(d, triple.s_H),
                spaces.sobolev_norm_sq(d, triple.s_V))

    h_sq, v_sq = _diff_norms(ua, ub)
    sup_h = np.sqrt(h_sq)
    v_int = np.zeros(n_paths)
    status_a = np.full(n_paths, STATUS_COMPLETED, dtype=np.int64)
    status_b = np.full(n_paths, STATUS_COMPLETED, dtype=np.int64)
    active = np.ones(n_paths, dtype=bool)
    bshape = (n_paths,) + (1,) * (grid.dimension + 1)

    for n in range(n_steps):
        t = n * cfg.dt
        w = noise_mod.batch_increments(seed, path_ids, n, cfg.dt, spec.noise.mode_count)
        dW = noise_mod.WienerIncrement(cfg.dt, w)
        na = step(spec, ua, t, dW, cfg)
        nb = step(spec, ub, t, dW, cfg)
        mask = active.reshape(bshape)
        ua = SpectralField(grid, np.where(mask, na.coeffs, ua.coeffs))
        ub = SpectralField(grid, np.where(mask, nb.coeffs, ub.coeffs))

        ha = spaces.sobolev_norm_sq(ua, triple.s_H)
        hb = spaces.sobolev_norm_sq(ub, triple.s_H)
        fa, fb = np.isfinite(ha), np.isfinite(hb)
        ba = active & (~fa | (ha > cfg.blowup_h_threshold))
        bb = active & (~fb | (hb > cfg.blowup_h_threshold))
        status_a[ba] = np.where(fa[ba], STATUS_BLOWN_UP, STATUS_OVERFLOW)
        status_b[bb] = np.where(fb[bb], STATUS_BLOWN_UP, STATUS_OVERFLOW)
        active = active & ~ba & ~bb

        h_new, v_new = _diff_norms(ua, ub)
        v_int = np.where(active, v_int + 0.5 * cfg.dt * (v_sq + v_new), v_int)
        sup_h = np.where(active, np.maximum(sup_h, np.sqrt(h_new)), sup_h)
        h_sq, v_sq = h_new, v_new

    return CoupledRun(sup_h_diff=sup_h, v_int_diff=v_int,
                      status_a=status_a, status_b=status_b)
