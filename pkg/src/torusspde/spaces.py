"""Fourier-multiplier realization of the scale V_beta on the d-torus.

Real scalar or vector fields are stored as truncated Fourier coefficient
arrays (numpy ``fft`` layout, unitary "forward" normalization, so Parseval
holds with constant 1).  All differential operators act mode-wise and are
exact on the represented band; pointwise nonlinearities go through a
3/2-padded collocation grid with 2/3-rule dealiasing for polynomials.

Coefficient arrays may carry arbitrary leading batch axes; every operation
in this module is vectorized over them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np

TWO_PI = 2.0 * np.pi


class GridMismatchError(ValueError):
    """Two fields that must share a grid do not."""


@dataclass(frozen=True)
class WaveGrid:
    """Truncated Fourier grid on the d-torus.

    Wavenumbers per axis are the integers -N/2 .. N/2-1 scaled by 2*pi/L.
    The Nyquist plane (index -N/2) is excluded from the working band so that
    every represented field is exactly real and odd-order derivatives stay
    within the space; constructed fields always have zero Nyquist content.
    """

    dimension: int
    modes_per_axis: int
    period: float = TWO_PI
    components: int = 1

    def __post_init__(self):
        if self.dimension not in (1, 2, 3, 4):
            raise ValueError(f"dimension must be in 1..4, got {self.dimension}")
        if self.modes_per_axis < 4 or self.modes_per_axis % 2 != 0:
            raise ValueError("modes_per_axis must be an even integer >= 4")
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.components < 1:
            raise ValueError("components must be >= 1")

    @property
    def shape(self) -> tuple:
        return (self.modes_per_axis,) * self.dimension

    @property
    def field_shape(self) -> tuple:
        return (self.components,) + self.shape

    @property
    def dof(self) -> int:
        return self.components * self.modes_per_axis ** self.dimension

    @property
    def axes(self) -> tuple:
        """The fft axes of a (..., c, N, ..., N) coefficient array."""
        return tuple(range(-self.dimension, 0))

    @cached_property
    def k_index(self) -> np.ndarray:
        """Integer wavenumber indices along one axis, fft layout."""
        n = self.modes_per_axis
        return np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)

    @cached_property
    def k_vectors(self) -> tuple:
        """Physical wavenumber k_j broadcast to the grid shape, per axis."""
        scale = TWO_PI / self.period
        out = []
        for j in range(self.dimension):
            shp = [1] * self.dimension
            shp[j] = self.modes_per_axis
            out.append(scale * self.k_index.reshape(shp).astype(float))
        return tuple(out)

    @cached_property
    def k_sq(self) -> np.ndarray:
        ksq = np.zeros(self.shape)
        for kj in self.k_vectors:
            ksq = ksq + kj ** 2
        return ksq

    @cached_property
    def one_plus_ksq(self) -> np.ndarray:
        return 1.0 + self.k_sq

    @cached_property
    def nyquist_keep(self) -> np.ndarray:
        """Boolean mask, False exactly on the Nyquist planes."""
        n = self.modes_per_axis
        keep = np.ones(self.shape, dtype=bool)
        for j in range(self.dimension):
            idx = [slice(None)] * self.dimension
            idx[j] = n // 2
            keep[tuple(idx)] = False
        return keep

    @property
    def dealias_limit(self) -> int:
        """Per-axis 2/3-rule cutoff: modes with |k_index| > limit are zeroed."""
        return self.modes_per_axis // 3

    @cached_property
    def dealias_keep(self) -> np.ndarray:
        return self.band_keep(self.dealias_limit)

    def band_keep(self, limit: int) -> np.ndarray:
        """Boolean mask keeping modes with per-axis |k_index| <= limit."""
        keep = np.ones(self.shape, dtype=bool)
        for j in range(self.dimension):
            shp = [1] * self.dimension
            shp[j] = self.modes_per_axis
            keep = keep & (np.abs(self.k_index.reshape(shp)) <= limit)
        return keep

    @property
    def padded_modes(self) -> int:
        m = (3 * self.modes_per_axis) // 2
        return m + (m % 2)

    @cached_property
    def _pad_index(self) -> tuple:
        """Per-axis index map from this grid's fft layout into the padded one."""
        n, m = self.modes_per_axis, self.padded_modes
        src = self.k_index
        return tuple(np.where(src >= 0, src, m + src) for _ in range(self.dimension))

    def scalar(self) -> "WaveGrid":
        if self.components == 1:
            return self
        return WaveGrid(self.dimension, self.modes_per_axis, self.period, 1)

    def vector(self) -> "WaveGrid":
        if self.components == self.dimension:
            return self
        return WaveGrid(self.dimension, self.modes_per_axis, self.period, self.dimension)

    def meshgrid(self, padded: bool = False) -> tuple:
        n = self.padded_modes if padded else self.modes_per_axis
        x = np.arange(n) * (self.period / n)
        return np.meshgrid(*([x] * self.dimension), indexing="ij")


@dataclass(frozen=True)
class GelfandTriple:
    """Sobolev exponents (s_dual, s_H, s_V) of the scale V* c H c V.

    V_beta carries the multiplier exponent s(beta) = (1-beta)*s_dual +
    beta*s_V, linear in beta, so s(1/2) = s_H.
    """

    s_dual: float
    s_H: float
    s_V: float

    def __post_init__(self):
        if abs(self.s_H - 0.5 * (self.s_dual + self.s_V)) > 1e-12:
            raise ValueError("s_H must equal (s_dual + s_V)/2")

    @classmethod
    def weak(cls) -> "GelfandTriple":
        return cls(-1.0, 0.0, 1.0)

    @classmethod
    def strong(cls) -> "GelfandTriple":
        return cls(0.0, 1.0, 2.0)

    @classmethod
    def fourth_order(cls) -> "GelfandTriple":
        return cls(-2.0, 0.0, 2.0)

    def s_of_beta(self, beta: float) -> float:
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {beta}")
        return (1.0 - beta) * self.s_dual + beta * self.s_V


class SpectralField:
    """Real field on the torus stored as Fourier coefficients.

    ``coeffs`` has shape (*batch, components, N, ..., N) in fft layout.
    Fields are immutable values: arithmetic returns new instances.
    """

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: WaveGrid, coeffs: np.ndarray, enforce: bool = False):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape[-grid.dimension - 1:] != grid.field_shape:
            raise ValueError(
                f"coefficient shape {coeffs.shape} does not end in {grid.field_shape}"
            )
        if enforce:
            coeffs = hermitianize(grid, coeffs)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, name, value):
        raise AttributeError("SpectralField is immutable")

    @property
    def batch_shape(self) -> tuple:
        return self.coeffs.shape[: -self.grid.dimension - 1]

    def values(self, padded: bool = False) -> np.ndarray:
        return values_of(self.grid, self.coeffs, padded=padded)

    def component(self, i: int) -> "SpectralField":
        idx = (Ellipsis, slice(i, i + 1)) + (slice(None),) * self.grid.dimension
        return SpectralField(self.grid.scalar(), self.coeffs[idx])

    def __add__(self, other):
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def is_finite(self) -> Union[bool, np.ndarray]:
        """True where all coefficients are finite (per batch element)."""
        ax = tuple(range(-self.grid.dimension - 1, 0))
        return np.isfinite(self.coeffs).all(axis=ax)


def _check_same_grid(u: SpectralField, w: SpectralField):
    if u.grid != w.grid:
        raise GridMismatchError(f"grids differ: {u.grid} vs {w.grid}")


# ---------------------------------------------------------------------------
# construction


def hermitianize(grid: WaveGrid, coeffs: np.ndarray) -> np.ndarray:
    """Project onto Hermitian-symmetric coefficients and zero Nyquist planes."""
    rev = coeffs
    for ax in grid.axes:
        rev = np.roll(np.flip(rev, axis=ax), 1, axis=ax)
    out = 0.5 * (coeffs + np.conj(rev))
    return out * grid.nyquist_keep


def field_from_values(grid: WaveGrid, vals: np.ndarray) -> SpectralField:
    vals = np.asarray(vals, dtype=float)
    if vals.ndim == grid.dimension and grid.components == 1:
        vals = vals[np.newaxis]
    coeffs = np.fft.fftn(vals, axes=grid.axes, norm="forward")
    return SpectralField(grid, coeffs * grid.nyquist_keep)


def field_from_function(grid: WaveGrid, fn: Callable) -> SpectralField:
    mesh = grid.meshgrid()
    vals = np.asarray(fn(*mesh), dtype=float)
    if vals.ndim == grid.dimension:
        vals = vals[np.newaxis]
    return field_from_values(grid, vals)


def constant_field(grid: WaveGrid, value) -> SpectralField:
    coeffs = np.zeros(grid.field_shape, dtype=np.complex128)
    value = np.atleast_1d(np.asarray(value, dtype=float))
    if value.size == 1:
        value = np.full(grid.components, value[0])
    zero = (0,) * grid.dimension
    for c in range(grid.components):
        coeffs[(c, *zero)] = value[c]
    return SpectralField(grid, coeffs)


def single_mode_field(grid: WaveGrid, k_index: Sequence[int], amplitude=1.0,
                      component: int = 0, phase: float = 0.0) -> SpectralField:
    """amplitude * cos(k.x + phase) in the given component."""
    coeffs = np.zeros(grid.field_shape, dtype=np.complex128)
    idx = tuple(int(k) % grid.modes_per_axis for k in k_index)
    neg = tuple((-int(k)) % grid.modes_per_axis for k in k_index)
    half = 0.5 * amplitude * np.exp(1j * phase)
    coeffs[(component, *idx)] += half
    coeffs[(component, *neg)] += np.conj(half)
    return SpectralField(grid, coeffs)


def random_band_field(grid: WaveGrid, rng: np.random.Generator, band: int = None,
                      decay: float = 0.0, batch: tuple = ()) -> SpectralField:
    """Gaussian random field supported on per-axis |k_index| <= band."""
    if band is None:
        band = grid.dealias_limit
    shape = batch + grid.field_shape
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    keep = grid.band_keep(band)
    if decay > 0.0:
        raw = raw * np.exp(-decay * grid.k_sq)
    coeffs = hermitianize(grid, raw * keep)
    return SpectralField(grid, coeffs)


def values_of(grid: WaveGrid, coeffs: np.ndarray, padded: bool = False) -> np.ndarray:
    if not padded:
        return np.fft.ifftn(coeffs, axes=grid.axes, norm="forward").real
    big = pad_coeffs(grid, coeffs)
    return np.fft.ifftn(big, axes=grid.axes, norm="forward").real


def pad_coeffs(grid: WaveGrid, coeffs: np.ndarray) -> np.ndarray:
    m = grid.padded_modes
    big_shape = coeffs.shape[: -grid.dimension] + (m,) * grid.dimension
    big = np.zeros(big_shape, dtype=np.complex128)
    sel = np.ix_(*grid._pad_index)
    big[(..., *sel)] = coeffs
    return big


def unpad_coeffs(grid: WaveGrid, big: np.ndarray) -> np.ndarray:
    sel = np.ix_(*grid._pad_index)
    return np.ascontiguousarray(big[(..., *sel)])


# ---------------------------------------------------------------------------
# norms and pairings


def _reduce_weighted(grid: WaveGrid, coeffs: np.ndarray, weight) -> np.ndarray:
    ax = tuple(range(-grid.dimension - 1, 0))
    return np.sum(weight * np.abs(coeffs) ** 2, axis=ax)


def sobolev_norm_sq(u: SpectralField, s: float):
    w = u.grid.one_plus_ksq ** s if s != 0.0 else 1.0
    return _reduce_weighted(u.grid, u.coeffs, w)


def sobolev_norm(u: SpectralField, s: float):
    """Bessel-multiplier norm ( sum_c sum_k (1+|k|^2)^s |u_hat|^2 )^(1/2)."""
    return np.sqrt(sobolev_norm_sq(u, s))


def norm_beta(u: SpectralField, triple: GelfandTriple, beta: float):
    """Norm of the interpolation space V_beta, beta in [0, 1]."""
    return sobolev_norm(u, triple.s_of_beta(beta))


def duality_pairing(v: SpectralField, w: SpectralField, triple: GelfandTriple):
    """Extension of the H-inner product: sum_k (1+|k|^2)^s_H v_hat conj(w_hat)."""
    _check_same_grid(v, w)
    grid = v.grid
    w_mult = grid.one_plus_ksq ** triple.s_H if triple.s_H != 0.0 else 1.0
    ax = tuple(range(-grid.dimension - 1, 0))
    return np.sum(w_mult * v.coeffs * np.conj(w.coeffs), axis=ax).real


def mean_square(u: SpectralField):
    """Collocation-grid mean of |u|^2 summed over components."""
    vals = u.values()
    comp_sq = np.sum(vals ** 2, axis=-u.grid.dimension - 1)
    return np.mean(comp_sq, axis=tuple(range(-u.grid.dimension, 0)))


# ---------------------------------------------------------------------------
# exact spectral calculus


def apply_multiplier(u: SpectralField, mult) -> SpectralField:
    return SpectralField(u.grid, u.coeffs * mult)


def differentiate(u: SpectralField, multi_index: Sequence[int]) -> SpectralField:
    """Partial derivative d^alpha u, coefficients times prod (i k_j)^alpha_j."""
    grid = u.grid
    if len(multi_index) != grid.dimension:
        raise ValueError("multi_index length must equal the dimension")
    mult = np.ones(grid.shape, dtype=np.complex128)
    for j, a in enumerate(multi_index):
        if a:
            mult = mult * (1j * grid.k_vectors[j]) ** a
    return apply_multiplier(u, mult)


def laplacian(u: SpectralField) -> SpectralField:
    return apply_multiplier(u, -u.grid.k_sq)


def bilaplacian(u: SpectralField) -> SpectralField:
    return apply_multiplier(u, u.grid.k_sq ** 2)


def gradient(u: SpectralField) -> SpectralField:
    """Gradient of a scalar field as a d-component vector field."""
    grid = u.grid
    if grid.components != 1:
        raise ValueError("gradient expects a scalar field")
    scalar = u.coeffs[(Ellipsis, 0) + (slice(None),) * grid.dimension]
    parts = [scalar * (1j * kj) for kj in grid.k_vectors]
    coeffs = np.stack(parts, axis=-grid.dimension - 1)
    return SpectralField(grid.vector(), coeffs)


def divergence(u: SpectralField) -> SpectralField:
    """Divergence of a d-component vector field (scalar result)."""
    grid = u.grid
    if grid.components != grid.dimension:
        raise ValueError("divergence expects a d-component vector field")
    acc = None
    for j, kj in enumerate(grid.k_vectors):
        cj = u.coeffs[(Ellipsis, j) + (slice(None),) * grid.dimension]
        term = cj * (1j * kj)
        acc = term if acc is None else acc + term
    return SpectralField(grid.scalar(), np.expand_dims(acc, -grid.dimension - 1))


# ---------------------------------------------------------------------------
# pointwise (collocation) evaluation

PolyCoeffs = Union[np.ndarray, Sequence[float]]


def poly_eval(coeffs: PolyCoeffs, y: np.ndarray) -> np.ndarray:
    """Evaluate sum_i coeffs[i] * y^i (ascending order) by Horner's rule."""
    c = np.asarray(coeffs, dtype=float)
    out = np.full_like(y, c[-1])
    for ci in c[-2::-1]:
        out = out * y + ci
    return out


def poly_deriv(coeffs: PolyCoeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float)
    if c.size <= 1:
        return np.zeros(1)
    return c[1:] * np.arange(1, c.size)


def pointwise_apply(f, u: SpectralField, dealias: bool = None) -> SpectralField:
    """Apply a scalar function pointwise via the 3/2-padded collocation grid.

    ``f`` is a callable of the grid values or an ascending polynomial
    coefficient sequence.  Dealiasing (2/3-rule truncation of the result)
    defaults to on for polynomials and off otherwise.  Non-finite values
    produced by ``f`` are left in place; they feed the blow-up monitor.
    """
    is_poly = not callable(f)
    if dealias is None:
        dealias = is_poly
    grid = u.grid
    vals = values_of(grid, u.coeffs, padded=True)
    return apply_on_padded(grid, f, vals, dealias)


def apply_on_padded(grid: WaveGrid, f, pad_vals: np.ndarray,
                    dealias: bool) -> SpectralField:
    """Pointwise application given precomputed padded collocation values."""
    # TODO: switch the padded transforms to rfftn to halve the last-axis cost
    out_vals = f(pad_vals) if callable(f) else poly_eval(f, pad_vals)
    big = np.fft.fftn(out_vals, axes=grid.axes, norm="forward")
    coeffs = unpad_coeffs(grid, big) * grid.nyquist_keep
    if dealias:
        coeffs = coeffs * grid.dealias_keep
    return SpectralField(grid, coeffs)


class StepWorkspace:
    """Per-step cache of collocation data shared across operator evaluations.

    Wraps one state: the padded collocation transform and the shared noise
    field are computed at most once per step.  Never reuse a workspace for a
    different state.
    """

    __slots__ = ("grid", "coeffs", "_pad_vals", "g_field")

    def __init__(self, u: SpectralField):
        self.grid = u.grid
        self.coeffs = u.coeffs
        self._pad_vals = None
        self.g_field = None

    def padded_values(self) -> np.ndarray:
        if self._pad_vals is None:
            self._pad_vals = values_of(self.grid,
                                       pad_coeffs(self.grid, self.coeffs))
        return self._pad_vals


def has_overflow(u: SpectralField):
    """Non-finite content indicator (negation of is_finite), batch-aware."""
    return np.logical_not(u.is_finite())
