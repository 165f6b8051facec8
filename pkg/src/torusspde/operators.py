"""The six model equations as quadruples (A0, B0, F, G) with drift assembly.

Each equation is carried by an ``EquationSpec`` bundling the Gelfand triple,
coefficient data, noise structure, and declared (rho_j, beta_j) pairs.  The
sign convention throughout: the time stepper integrates

    du = drift(t, u) dt + diffusion(t, u) dW,

so ``drift`` returns -A(t,u) = -A0(t,u)u + F(t,u).  The stiff constant-
coefficient part of -A0 is exposed as a mode-wise implicit symbol for the
IMEX stepper.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import noise as noise_mod
from . import spaces
from .noise import NoiseSpec
from .spaces import GelfandTriple, SpectralField, WaveGrid

VARIANTS = ("cahn_hilliard", "tamed_ns", "second_order", "allen_cahn",
            "quasilinear_1d", "swift_hohenberg")

TRIPLE_OF_VARIANT = {
    "cahn_hilliard": GelfandTriple.fourth_order,
    "swift_hohenberg": GelfandTriple.fourth_order,
    "second_order": GelfandTriple.weak,
    "tamed_ns": GelfandTriple.strong,
    "allen_cahn": GelfandTriple.strong,
    "quasilinear_1d": GelfandTriple.strong,
}


def critical_beta(rho) -> Fraction:
    """The exponent with equality in 2*beta = 1 + 1/(rho+1)."""
    rho = Fraction(rho)
    return (rho + 2) / (2 * (rho + 1))


class RhoBeta(NamedTuple):
    slot: str
    rho: Fraction
    beta: Fraction


@dataclass(frozen=True)
class TamingFunction:
    """Smooth cutoff: 0 on [0, N], x - N beyond N + 1, quintic bridge between.

    The bridge p(t) = 6t^3 - 8t^4 + 3t^5 matches value/derivative (0, 0) at
    t = 0 and (1, 1) at t = 1 with zero curvature at both ends; its slope
    peaks at 1.512, inside the required band 0 <= phi' <= 2.
    """

    level: float

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("taming level must be >= 0")

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValueError("taming argument must be >= 0")
        t = np.clip(x - self.level, 0.0, 1.0)
        bridge = t ** 3 * (6.0 - 8.0 * t + 3.0 * t * t)
        return np.where(x >= self.level + 1.0, x - self.level, bridge)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValueError("taming argument must be >= 0")
        t = np.clip(x - self.level, 0.0, 1.0)
        bridge = t * t * (18.0 - 32.0 * t + 15.0 * t * t)
        return np.where(x >= self.level + 1.0, 1.0, bridge)


def taming_eval(level: float, x):
    return TamingFunction(level).eval(x)


def taming_deriv(level: float, x):
    return TamingFunction(level).deriv(x)


def helmholtz_project(u: SpectralField) -> SpectralField:
    """Mode-wise projection u_hat -> u_hat - k (k . u_hat)/|k|^2 (k = 0 kept)."""
    grid = u.grid
    if grid.components != grid.dimension:
        raise ValueError("Helmholtz projection expects a d-component vector field")
    ksq = grid.k_sq.copy()
    zero = (0,) * grid.dimension
    ksq[zero] = 1.0
    kdotu = None
    for j, kj in enumerate(grid.k_vectors):
        cj = u.coeffs[(Ellipsis, j) + (slice(None),) * grid.dimension]
        term = kj * cj
        kdotu = term if kdotu is None else kdotu + term
    scale = kdotu / ksq
    parts = []
    for j, kj in enumerate(grid.k_vectors):
        cj = u.coeffs[(Ellipsis, j) + (slice(None),) * grid.dimension]
        parts.append(cj - kj * scale)
    return SpectralField(grid, np.stack(parts, axis=-grid.dimension - 1))


@dataclass(frozen=True)
class EquationSpec:
    """One of the six model equations with its coefficient data.

    f_coeffs      ascending polynomial coefficients of the reaction f(y)
    fbar_coeffs   polynomial of the flux function; fbar_j(y) = fbar_dirs[j]*p(y)
    a             scalar or (d, d) SPD matrix of the second-order diffusion
    a_fn          ('tanh', a0, a1): state-dependent a(y) = a0 + a1*tanh(y)
    taming        taming function for the tamed Navier-Stokes cutoff
    params        declared (slot, rho_j, beta_j) tuples, rational
    """

    variant: str
    grid: WaveGrid
    triple: GelfandTriple
    noise: NoiseSpec
    f_coeffs: Optional[np.ndarray] = None
    fbar_coeffs: Optional[np.ndarray] = None
    fbar_dirs: Optional[np.ndarray] = None
    a: object = 1.0
    a_fn: Optional[tuple] = None
    taming: Optional[TamingFunction] = None
    params: tuple = ()
    project_noise: bool = False
    phi_const: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        expected = TRIPLE_OF_VARIANT[self.variant]()
        if self.triple != expected:
            raise ValueError(
                f"{self.variant} requires triple {expected}, got {self.triple}")
        for p in self.params:
            if p.rho < 0:
                raise ValueError(f"rho must be >= 0 in slot {p.slot}")
            if not (Fraction(1, 2) < p.beta < 1):
                raise ValueError(f"beta must lie in (1/2, 1) in slot {p.slot}")
        if self.noise.b is not None and self.noise.b.shape[1] != self.grid.dimension:
            raise ValueError("transport coefficients b must have d columns")

    @property
    def symbol_depends_on_state(self) -> bool:
        return self.variant == "quasilinear_1d"

    def declared_pairs(self, slots: Sequence[str] = None):
        if slots is None:
            return list(self.params)
        return [p for p in self.params if p.slot in slots]


# ---------------------------------------------------------------------------
# factories


def _params_with_critical(entries) -> tuple:
    out = []
    for slot, rho, beta in entries:
        rho = Fraction(rho)
        if beta is None:
            # critical exponent, except rho = 0 where it would hit beta = 1
            beta = critical_beta(rho) if rho > 0 else Fraction(3, 4)
        else:
            beta = Fraction(beta)
        out.append(RhoBeta(slot, rho, beta))
    return tuple(out)


def make_cahn_hilliard(grid: WaveGrid, noise: NoiseSpec,
                       f_coeffs=(0.0, -1.0, 0.0, 1.0), rho=None) -> EquationSpec:
    """du = (-Lap^2 u + Lap f(u)) dt + sum_n g_n(u) dw^n; default double well."""
    if grid.components != 1:
        raise ValueError("cahn_hilliard is scalar")
    f_coeffs = np.asarray(f_coeffs, dtype=float)
    if rho is None:
        rho = max(len(f_coeffs) - 2, 0)
    params = _params_with_critical([("f", rho, None), ("g", 0, Fraction(3, 4))])
    return EquationSpec("cahn_hilliard", grid, GelfandTriple.fourth_order(),
                        noise, f_coeffs=f_coeffs, params=params)


def make_tamed_ns(grid: WaveGrid, noise: NoiseSpec, taming_level: float = 1.0
                  ) -> EquationSpec:
    """Tamed Navier-Stokes with transport noise, Helmholtz-projected modes."""
    if grid.components != grid.dimension or grid.dimension not in (2, 3):
        raise ValueError("tamed_ns needs a velocity field on T^2 or T^3")
    params = _params_with_critical([
        ("f", 1, Fraction(5, 8)),
        ("fbar", 0, Fraction(5, 8)),
        ("g", 0, Fraction(7, 8)),
    ])
    return EquationSpec("tamed_ns", grid, GelfandTriple.strong(), noise,
                        taming=TamingFunction(taming_level), params=params,
                        project_noise=True)


def make_second_order(grid: WaveGrid, noise: NoiseSpec, a=1.0,
                      f_coeffs=None, fbar_coeffs=None, fbar_dirs=None,
                      rho1=None, rho2=None, rho3=None) -> EquationSpec:
    """du = (div(a grad u) + f(u) + div fbar(u)) dt + ((b_n.grad)u + g_n(u)) dw^n."""
    if grid.components != 1:
        raise ValueError("second_order is scalar")
    d = grid.dimension
    a_arr = np.asarray(a, dtype=float)
    if a_arr.ndim == 2 and a_arr.shape != (d, d):
        raise ValueError("matrix a must be (d, d)")
    f_coeffs = None if f_coeffs is None else np.asarray(f_coeffs, dtype=float)
    fbar_coeffs = None if fbar_coeffs is None else np.asarray(fbar_coeffs, dtype=float)
    if fbar_coeffs is not None:
        fbar_dirs = np.ones(d) if fbar_dirs is None else np.asarray(fbar_dirs, dtype=float)
    entries = []
    if f_coeffs is not None:
        entries.append(("f", max(len(f_coeffs) - 2, 0) if rho1 is None else rho1, None))
    if fbar_coeffs is not None:
        entries.append(("fbar", max(len(fbar_coeffs) - 2, 0) if rho2 is None else rho2, None))
    if noise.g_kind == "poly":
        entries.append(("g", max(noise.g_power - 1, 0) if rho3 is None else rho3, None))
    elif noise.g_kind == "additive":
        entries.append(("g", 0, None))
    return EquationSpec("second_order", grid, GelfandTriple.weak(), noise,
                        f_coeffs=f_coeffs, fbar_coeffs=fbar_coeffs,
                        fbar_dirs=fbar_dirs, a=a_arr if a_arr.ndim else float(a_arr),
                        params=_params_with_critical(entries))


def make_allen_cahn(grid: WaveGrid, noise: NoiseSpec,
                    f_coeffs=(0.0, 1.0, 0.0, -1.0)) -> EquationSpec:
    """du = (Lap u + f(u)) dt + ((b_n.grad)u + g_n(u)) dw^n, strong setting."""
    if grid.components != 1:
        raise ValueError("allen_cahn is scalar")
    if grid.dimension > 4:
        raise ValueError("allen_cahn supports d <= 4")
    params = _params_with_critical([("f", 2, Fraction(2, 3)),
                                    ("g", 1, Fraction(3, 4))])
    return EquationSpec("allen_cahn", grid, GelfandTriple.strong(), noise,
                        f_coeffs=np.asarray(f_coeffs, dtype=float), params=params)


def make_quasilinear_1d(grid: WaveGrid, noise: NoiseSpec, a0: float = 1.0,
                        a1: float = 0.0, f_coeffs=(0.0,)) -> EquationSpec:
    """du = (a(u) u'' + f(u)) dt + (b_n u' + g_n(u)) dw^n on the circle.

    a(y) = a0 + a1 tanh(y); the coefficient-frozen IMEX solve uses the grid
    mean of a(u_n) per step.  f must vanish at 0.
    """
    if grid.dimension != 1 or grid.components != 1:
        raise ValueError("quasilinear_1d lives on the 1-torus, scalar")
    f_coeffs = np.asarray(f_coeffs, dtype=float)
    if f_coeffs.size and f_coeffs[0] != 0.0:
        raise ValueError("quasilinear_1d requires f(0) = 0")
    params = _params_with_critical([("f", 0, Fraction(3, 4)),
                                    ("g", 0, Fraction(3, 4))])
    return EquationSpec("quasilinear_1d", grid, GelfandTriple.strong(), noise,
                        f_coeffs=f_coeffs, a_fn=("tanh", float(a0), float(a1)),
                        params=params)


def make_swift_hohenberg(grid: WaveGrid, noise: NoiseSpec,
                         f_coeffs=(0.0, 1.0, 0.0, -1.0), rho=None) -> EquationSpec:
    """du = (-Lap^2 u - 2 Lap u + f(u)) dt + sum_n g_n(u) dw^n."""
    if grid.components != 1:
        raise ValueError("swift_hohenberg is scalar")
    f_coeffs = np.asarray(f_coeffs, dtype=float)
    if rho is None:
        rho = max(len(f_coeffs) - 2, 0)
    entries = [("f", rho, None)]
    if noise.g_kind == "poly":
        entries.append(("g", max(noise.g_power - 1, 0), None))
    elif noise.g_kind == "additive":
        entries.append(("g", 0, Fraction(3, 4)))
    return EquationSpec("swift_hohenberg", grid, GelfandTriple.fourth_order(),
                        noise, f_coeffs=f_coeffs,
                        params=_params_with_critical(entries))


# ---------------------------------------------------------------------------
# state-dependent coefficient of the quasilinear example


def a_fn_values(spec: EquationSpec, u_vals: np.ndarray) -> np.ndarray:
    kind, a0, a1 = spec.a_fn
    if kind != "tanh":
        raise ValueError(f"unknown a_fn kind {kind!r}")
    return a0 + a1 * np.tanh(u_vals)


def a_fn_lipschitz(spec: EquationSpec) -> float:
    _, _, a1 = spec.a_fn
    return abs(a1)


# ---------------------------------------------------------------------------
# implicit symbol and drift assembly


def second_order_symbol(grid: WaveGrid, a) -> np.ndarray:
    a_arr = np.asarray(a, dtype=float)
    if a_arr.ndim == 0:
        return float(a_arr) * grid.k_sq
    sym = np.zeros(grid.shape)
    for j in range(grid.dimension):
        for k in range(grid.dimension):
            sym = sym + a_arr[j, k] * grid.k_vectors[j] * grid.k_vectors[k]
    return sym


def implicit_symbol(spec: EquationSpec, u: Optional[SpectralField] = None):
    """Mode-wise symbol L with drift = -L u + remainder; batched for quasilinear."""
    grid = spec.grid
    v = spec.variant
    if v == "cahn_hilliard":
        return grid.k_sq ** 2
    if v == "swift_hohenberg":
        return grid.k_sq ** 2 - 2.0 * grid.k_sq
    if v in ("tamed_ns", "allen_cahn"):
        return grid.k_sq
    if v == "second_order":
        return second_order_symbol(grid, spec.a)
    # quasilinear: freeze the grid mean of a(u)
    if u is None:
        a_mean = a_fn_values(spec, np.zeros(1))[0]
        return a_mean * grid.k_sq
    vals = u.values()
    ax = tuple(range(-grid.dimension - 1, 0))
    a_mean = np.mean(a_fn_values(spec, vals), axis=ax)
    shape = np.shape(a_mean) + (1,) * (grid.dimension + 1)
    return np.reshape(a_mean, shape) * grid.k_sq


def _padded_state(u: SpectralField, ws) -> np.ndarray:
    if ws is not None:
        return ws.padded_values()
    return spaces.values_of(u.grid, spaces.pad_coeffs(u.grid, u.coeffs))


def _convection(u: SpectralField, ws=None) -> SpectralField:
    """(u . grad) u for a vector field, dealiased quadratic product."""
    grid = u.grid
    d = grid.dimension
    u_vals = _padded_state(u, ws)
    big_axes = tuple(range(-d, 0))
    out_vals = np.zeros_like(u_vals)
    for j in range(d):
        cj = u.coeffs * (1j * grid.k_vectors[j])
        dj_vals = spaces.values_of(grid, spaces.pad_coeffs(grid, cj))
        uj = u_vals[(Ellipsis, slice(j, j + 1)) + (slice(None),) * d]
        out_vals += uj * dj_vals
    big = np.fft.fftn(out_vals, axes=big_axes, norm="forward")
    coeffs = spaces.unpad_coeffs(grid, big) * grid.nyquist_keep * grid.dealias_keep
    return SpectralField(grid, coeffs)


def _taming_term(spec: EquationSpec, u: SpectralField, ws=None) -> SpectralField:
    """phi_N(|u|^2) u on the padded grid (no further truncation)."""
    grid = u.grid
    d = grid.dimension
    u_vals = _padded_state(u, ws)
    ssq = np.sum(u_vals ** 2, axis=-d - 1, keepdims=True)
    out_vals = spec.taming.eval(ssq) * u_vals
    big = np.fft.fftn(out_vals, axes=tuple(range(-d, 0)), norm="forward")
    return SpectralField(grid, spaces.unpad_coeffs(grid, big) * grid.nyquist_keep)


def semilinear_part(spec: EquationSpec, t: float, u: SpectralField,
                    ws=None) -> SpectralField:
    """The semi-linear part F(t, u) of the structure split A = A0 u - F."""
    grid = spec.grid
    v = spec.variant

    def _poly(coeffs):
        if ws is not None:
            return spaces.apply_on_padded(grid, coeffs, ws.padded_values(), True)
        return spaces.pointwise_apply(coeffs, u)

    if v == "cahn_hilliard":
        return spaces.laplacian(_poly(spec.f_coeffs))
    if v == "tamed_ns":
        conv = _convection(u, ws)
        tame = _taming_term(spec, u, ws)
        return helmholtz_project(SpectralField(grid, -(conv.coeffs + tame.coeffs)))
    if v == "second_order":
        acc = None
        if spec.f_coeffs is not None:
            acc = _poly(spec.f_coeffs).coeffs
        if spec.fbar_coeffs is not None:
            p_u = _poly(spec.fbar_coeffs)
            scalar = p_u.coeffs[(Ellipsis, 0) + (slice(None),) * grid.dimension]
            div = None
            for j, kj in enumerate(grid.k_vectors):
                term = spec.fbar_dirs[j] * (1j * kj) * scalar
                div = term if div is None else div + term
            div = np.expand_dims(div, -grid.dimension - 1)
            acc = div if acc is None else acc + div
        if acc is None:
            acc = np.zeros_like(u.coeffs)
        return SpectralField(grid, acc)
    if v in ("allen_cahn", "swift_hohenberg", "quasilinear_1d"):
        if spec.f_coeffs is None or spec.f_coeffs.size == 0:
            return SpectralField(grid, np.zeros_like(u.coeffs))
        return _poly(spec.f_coeffs)
    raise AssertionError(v)


def leading_apply(spec: EquationSpec, t: float, state: SpectralField,
                  w: SpectralField, ws=None) -> SpectralField:
    """Quasi-linear leading part A0(t, state) applied to w."""
    grid = spec.grid
    v = spec.variant
    if v == "cahn_hilliard":
        return spaces.bilaplacian(w)
    if v == "swift_hohenberg":
        return SpectralField(grid, (grid.k_sq ** 2 - 2.0 * grid.k_sq) * w.coeffs)
    if v == "allen_cahn":
        return SpectralField(grid, grid.k_sq * w.coeffs)
    if v == "tamed_ns":
        return helmholtz_project(SpectralField(grid, grid.k_sq * w.coeffs))
    if v == "second_order":
        return SpectralField(grid, second_order_symbol(grid, spec.a) * w.coeffs)
    # quasilinear: A0(v)w = -a(v) w''
    d = grid.dimension
    a_vals = a_fn_values(spec, _padded_state(state, ws))
    w2 = w.coeffs * (-grid.k_sq)
    w2_vals = spaces.values_of(grid, spaces.pad_coeffs(grid, w2))
    out_vals = -a_vals * w2_vals
    big = np.fft.fftn(out_vals, axes=tuple(range(-d, 0)), norm="forward")
    return SpectralField(grid, spaces.unpad_coeffs(grid, big) * grid.nyquist_keep)


def drift(spec: EquationSpec, t: float, u: SpectralField, ws=None) -> SpectralField:
    """-A(t,u) = -A0(t,u)u + F(t,u); the stepper integrates du = drift dt + B dW.

    Overflow in nonlinearity evaluation propagates as non-finite coefficients
    and is picked up by the blow-up monitor, never raised here.
    """
    f_part = semilinear_part(spec, t, u, ws)
    if spec.variant == "quasilinear_1d":
        a0u = leading_apply(spec, t, u, u, ws)
        return SpectralField(spec.grid, f_part.coeffs - a0u.coeffs)
    sym = implicit_symbol(spec)
    return SpectralField(spec.grid, f_part.coeffs - sym * u.coeffs)


def energy_functional(spec: EquationSpec, t: float, u: SpectralField,
                      drift_u: Optional[SpectralField] = None, ws=None):
    """E_u(t) = <A(t,u), u> - 1/2 |||B(t,u)|||_H^2 (the Ito drift of 1/2||u||_H^2)."""
    if drift_u is None:
        drift_u = drift(spec, t, u, ws)
    pairing = spaces.duality_pairing(u, drift_u, spec.triple)
    return -pairing - 0.5 * noise_mod.hilbert_schmidt_sq(spec, t, u, ws)


def coercivity_functional(spec: EquationSpec, t: float, u: SpectralField,
                          eta: float):
    """<u, A(t,u)> - (1/2 + eta) |||B(t,u)|||_H^2."""
    pairing = spaces.duality_pairing(u, drift(spec, t, u), spec.triple)
    return -pairing - (0.5 + eta) * noise_mod.hilbert_schmidt_sq(spec, t, u)


# ---------------------------------------------------------------------------
# cancellation identities (divergence-free transport, x-independent flux/noise)


class CancellationPreconditionError(ValueError):
    def __init__(self, div_norms):
        self.div_norms = div_norms
        super().__init__(f"transport coefficients not divergence-free: {div_norms}")


@dataclass(frozen=True)
class CancellationResult:
    flux_residual: float
    transport_residual: float


def cancellation_check(b, fbar_coeffs, g_coeffs, u: SpectralField,
                       fbar_dirs=None, g_poly=(0.0, 0.0, 1.0),
                       div_tol: float = 1e-10) -> CancellationResult:
    """Residuals |(fbar(u), grad u)_L2| and |sum_n ((b_n.grad)u, g_n(u))_L2|.

    ``b`` is either an (M, d) array of constant vectors or a list of vector
    SpectralFields, which must be divergence-free (checked spectrally).
    ``fbar_coeffs`` is the flux polynomial, ``g_coeffs`` the per-mode noise
    amplitudes with shared polynomial ``g_poly`` (default y^2).
    """
    grid = u.grid
    d = grid.dimension
    u_scalar = u.coeffs[(Ellipsis, 0) + (slice(None),) * d]
    u_vals = spaces.values_of(grid, spaces.pad_coeffs(grid, u_scalar))
    grad_vals = [spaces.values_of(grid, spaces.pad_coeffs(grid, u_scalar * (1j * kj)))
                 for kj in grid.k_vectors]

    fbar_res = 0.0
    if fbar_coeffs is not None:
        dirs = np.ones(d) if fbar_dirs is None else np.asarray(fbar_dirs, dtype=float)
        p_vals = spaces.poly_eval(fbar_coeffs, u_vals)
        acc = 0.0
        for j in range(d):
            acc = acc + dirs[j] * np.mean(p_vals * grad_vals[j])
        fbar_res = abs(float(acc))

    transport_res = 0.0
    if b is not None and g_coeffs is not None:
        g_coeffs = np.asarray(g_coeffs, dtype=float)
        g_vals = spaces.poly_eval(np.asarray(g_poly, dtype=float), u_vals)
        if isinstance(b, np.ndarray) and b.ndim == 2:
            bw = g_coeffs @ b  # sum_n c_n b_n, shape (d,)
            acc = 0.0
            for j in range(d):
                acc = acc + bw[j] * np.mean(grad_vals[j] * g_vals)
            transport_res = abs(float(acc))
        else:
            div_norms = [float(spaces.sobolev_norm(spaces.divergence(bn), 0.0))
                         for bn in b]
            if max(div_norms) > div_tol:
                raise CancellationPreconditionError(div_norms)
            acc = 0.0
            for n, bn in enumerate(b):
                bn_vals = spaces.values_of(grid, spaces.pad_coeffs(grid, bn.coeffs))
                transp = sum(bn_vals[j] * grad_vals[j] for j in range(d))
                acc = acc + g_coeffs[n] * np.mean(transp * g_vals)
            transport_res = abs(float(acc))
    return CancellationResult(fbar_res, transport_res)
