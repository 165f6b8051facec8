"""Truncated l2-cylindrical Brownian increments and diffusion structures.

Increments are derived from a counter-based construction: a 64-bit mix
(splitmix64 finalizer) of (master_seed, stream, path, step, slot) feeds the
inverse normal CDF.  Draws are therefore bit-reproducible for any batch
split or evaluation order, which makes ensembles rerunnable exactly.

The diffusion applied to a field u is, per noise mode n <= M,

    mode_n(u) = (b_n . grad) u + g_n(u),

optionally Helmholtz-projected mode-wise (tamed Navier-Stokes).  The free
constructions here only see a ``NoiseSpec`` plus the grid/triple of the
equation object that carries them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri

from . import spaces
from .spaces import SpectralField, WaveGrid

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# stream ids reserved by the package
STREAM_WIENER = 0
STREAM_INITIAL = 1
STREAM_AUDIT = 2
STREAM_GRONWALL = 3


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def counter_uniforms(seed: int, stream: int, path, step: int, count: int) -> np.ndarray:
    """Open-interval uniforms indexed by (seed, stream, path, step, slot).

    ``path`` may be an integer or an integer array; the result has shape
    ``path_shape + (count,)`` and never depends on how paths are batched.
    """
    with np.errstate(over="ignore"):
        z0 = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN * np.uint64(stream + 1))
        p = np.asarray(path, dtype=np.uint64)
        zp = _mix64(z0 + _GOLDEN * (p + np.uint64(1)))
        zs = _mix64(zp + _GOLDEN * np.uint64(step + 1))
        slots = (np.arange(count, dtype=np.uint64) + np.uint64(1)) * _GOLDEN
        zi = _mix64(zs[..., np.newaxis] + slots)
    return (zi >> np.uint64(11)).astype(np.float64) * 2.0 ** -53 + 2.0 ** -54


def counter_normals(seed: int, stream: int, path, step: int, count: int) -> np.ndarray:
    return ndtri(counter_uniforms(seed, stream, path, step, count))


@dataclass
class NoiseStream:
    """Value-type cursor over the per-path Wiener increment stream."""

    master_seed: int
    path_index: int = 0
    step_index: int = 0

    def peek(self, dt: float, mode_count: int, step: int) -> "WienerIncrement":
        vals = counter_normals(self.master_seed, STREAM_WIENER,
                               self.path_index, step, mode_count) * np.sqrt(dt)
        return WienerIncrement(dt=dt, values=vals)

    def sample(self, dt: float, mode_count: int) -> "WienerIncrement":
        inc = self.peek(dt, mode_count, self.step_index)
        self.step_index += 1
        return inc


@dataclass(frozen=True)
class WienerIncrement:
    dt: float
    values: np.ndarray  # shape (M,) or (paths, M)


def sample_increments(stream: NoiseStream, dt: float, mode_count: int) -> WienerIncrement:
    """Draw M independent N(0, dt) increments; deterministic in (seed, path, step)."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return stream.sample(dt, mode_count)


def batch_increments(seed: int, paths, step: int, dt: float, mode_count: int,
                     refine: int = 1) -> np.ndarray:
    """Increments for a batch of paths in one call, shape (len(paths), M).

    With ``refine`` = r, the increment over dt is assembled as the sum of r
    sub-increments drawn at sub-steps r*step .. r*step+r-1 with variance
    dt/r each; runs at refinement r and 2r therefore share Brownian paths.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    sub = np.sqrt(dt / refine)
    total = None
    for j in range(refine):
        draw = counter_normals(seed, STREAM_WIENER, paths, refine * step + j, mode_count)
        total = draw if total is None else total + draw
    return total * sub


# ---------------------------------------------------------------------------
# diffusion structure


@dataclass(frozen=True)
class NoiseSpec:
    """Per-mode diffusion data for a truncation of l2 at M modes.

    b            transport coefficients, constant vectors of shape (M, d),
                 or None for no transport part
    g_kind       'none' | 'additive' | 'poly'
    g_coeffs     per-mode amplitudes c_n, shape (M,) (or (M, c) for additive
                 vector noise); g_n(u) = c_n * u**g_power for 'poly',
                 g_n = c_n * profile(x) for 'additive'
    g_profile    spatial profile for additive noise: 'constant' or 'cos'
    """

    mode_count: int
    b: Optional[np.ndarray] = None
    g_kind: str = "none"
    g_coeffs: Optional[np.ndarray] = None
    g_power: int = 1
    g_profile: str = "constant"

    def __post_init__(self):
        if self.mode_count < 1:
            raise ValueError("mode_count must be >= 1")
        if self.b is not None:
            b = np.atleast_2d(np.asarray(self.b, dtype=float))
            if b.shape[0] != self.mode_count:
                raise ValueError(f"b must have {self.mode_count} rows, got {b.shape}")
            object.__setattr__(self, "b", b)
        if self.g_kind not in ("none", "additive", "poly"):
            raise ValueError(f"unknown g_kind {self.g_kind!r}")
        if self.g_kind != "none":
            if self.g_coeffs is None:
                raise ValueError(f"g_kind {self.g_kind!r} requires g_coeffs")
            g = np.asarray(self.g_coeffs, dtype=float)
            if g.shape[0] != self.mode_count:
                raise ValueError(f"g_coeffs must have {self.mode_count} rows")
            object.__setattr__(self, "g_coeffs", g)
        if self.g_profile not in ("constant", "cos"):
            raise ValueError(f"unknown g_profile {self.g_profile!r}")

    @property
    def has_transport(self) -> bool:
        return self.b is not None and np.any(self.b != 0.0)

    @property
    def transport_sup_sq(self) -> float:
        """Reported truncation mass sum_n sup_x |b_n|^2 (constants: |b_n|^2)."""
        if self.b is None:
            return 0.0
        return float(np.sum(self.b ** 2))

    def sigma_matrix(self) -> np.ndarray:
        """sigma^{ij} = sum_n b_n^i b_n^j, the transport symbol, shape (d, d)."""
        if self.b is None:
            raise ValueError("no transport part")
        return self.b.T @ self.b


def zero_noise(mode_count: int = 1) -> NoiseSpec:
    return NoiseSpec(mode_count=mode_count)


def l2_profile(mode_count: int, total_sq: float, decay: float = 1.0) -> np.ndarray:
    """Amplitudes c_n ~ n^-decay normalized so that sum c_n^2 = total_sq."""
    raw = (1.0 + np.arange(mode_count)) ** -decay
    return raw * np.sqrt(total_sq / np.sum(raw ** 2))


def _additive_profile_field(noise: NoiseSpec, grid: WaveGrid) -> SpectralField:
    if noise.g_profile == "constant":
        return spaces.constant_field(grid, 1.0)
    f = spaces.single_mode_field(grid, (1,) + (0,) * (grid.dimension - 1), 1.0)
    if grid.components > 1:
        coeffs = np.concatenate([f.coeffs] * grid.components, axis=-grid.dimension - 1)
        return SpectralField(grid, coeffs)
    return f


def _field_broadcast(weights_part: np.ndarray, grid: WaveGrid) -> np.ndarray:
    """Reshape per-path weights to broadcast against (..., c, N, ..., N)."""
    return weights_part.reshape(weights_part.shape + (1,) * (grid.dimension + 1))


def _transport_coeffs(spec, u_coeffs: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Coefficients of ((sum_n w_n b_n) . grad) u for constant b; batched in w."""
    grid = spec.grid
    b = spec.noise.b  # (M, d)
    bw = np.tensordot(weights, b, axes=([-1], [0]))  # (..., d)
    out = None
    for j in range(grid.dimension):
        term = u_coeffs * (1j * grid.k_vectors[j])
        term = term * _field_broadcast(bw[..., j], grid)
        out = term if out is None else out + term
    return out


def _g_field(spec, t: float, u: SpectralField,
             ws: Optional[spaces.StepWorkspace] = None) -> Optional[SpectralField]:
    """The shared field G with g_n(u) = c_n * G; None when g_kind == 'none'."""
    noise = spec.noise
    if noise.g_kind == "none":
        return None
    if ws is not None and ws.g_field is not None:
        return ws.g_field
    if noise.g_kind == "additive":
        out = _additive_profile_field(noise, u.grid)
    elif ws is not None:
        out = spaces.apply_on_padded(u.grid, _monomial(noise.g_power),
                                     ws.padded_values(), dealias=True)
    else:
        out = spaces.pointwise_apply(_monomial(noise.g_power), u)
    if ws is not None:
        ws.g_field = out
    return out


def _monomial(power: int) -> np.ndarray:
    c = np.zeros(power + 1)
    c[power] = 1.0
    return c


def diffusion_mode(spec, t: float, u: SpectralField, n: int,
                   g_shared: Optional[SpectralField] = None) -> SpectralField:
    """Single diffusion mode mode_n(u) = (b_n . grad)u + g_n(u), projected for NS."""
    grid = u.grid
    noise = spec.noise
    out = np.zeros_like(u.coeffs)
    if noise.has_transport:
        w = np.zeros(noise.mode_count)
        w[n] = 1.0
        out = out + _transport_coeffs(spec, u.coeffs, w)
    if noise.g_kind != "none":
        g = g_shared if g_shared is not None else _g_field(spec, t, u)
        cn = np.atleast_1d(noise.g_coeffs[n])
        if cn.size == 1:
            out = out + cn[0] * g.coeffs
        else:  # per-component additive amplitudes
            shape = (grid.components,) + (1,) * grid.dimension
            out = out + g.coeffs * cn.reshape(shape)
    f = SpectralField(grid, out)
    if getattr(spec, "project_noise", False):
        from .operators import helmholtz_project
        f = helmholtz_project(f)
    return f


def apply_diffusion(spec, t: float, u: SpectralField, dW: WienerIncrement,
                    ws: Optional[spaces.StepWorkspace] = None) -> SpectralField:
    """sum_n mode_n(u) dW_n; linear in dW, batched when dW.values is (paths, M)."""
    noise = spec.noise
    w = np.asarray(dW.values, dtype=float)
    if w.shape[-1] != noise.mode_count:
        raise ValueError(
            f"increment has {w.shape[-1]} modes, spec expects {noise.mode_count}")
    grid = u.grid
    if grid != spec.grid:
        raise spaces.GridMismatchError(
            f"field grid {grid} does not match equation grid {spec.grid}")
    out = None
    if noise.has_transport:
        out = _transport_coeffs(spec, u.coeffs, w)
    if noise.g_kind != "none":
        g = _g_field(spec, t, u, ws)
        cw = np.tensordot(w, noise.g_coeffs, axes=([-1], [0]))
        if noise.g_coeffs.ndim == 1:  # scalar weight per draw
            term = g.coeffs * _field_broadcast(np.asarray(cw), grid)
        else:  # (M, c): per-component additive amplitudes
            shp = np.asarray(cw).shape + (1,) * grid.dimension
            term = g.coeffs * np.asarray(cw).reshape(shp)
        out = term if out is None else out + term
    if out is None:
        shape = np.broadcast_shapes(w.shape[:-1] + (1,) * (grid.dimension + 1),
                                    u.coeffs.shape)
        out = np.zeros(shape, dtype=np.complex128)
    f = SpectralField(grid, out)
    if getattr(spec, "project_noise", False):
        from .operators import helmholtz_project
        f = helmholtz_project(f)
    return f


def diffusion_modes_h_norm_sq(spec, t: float, u: SpectralField) -> np.ndarray:
    """Per-mode squared H-norms ||mode_n(u)||_H^2, shape (batch..., M)."""
    grid = u.grid
    triple = spec.triple
    noise = spec.noise
    g_shared = _g_field(spec, t, u)
    out = []
    for n in range(noise.mode_count):
        m = diffusion_mode(spec, t, u, n, g_shared=g_shared)
        out.append(spaces.sobolev_norm_sq(m, triple.s_H))
    return np.stack(out, axis=-1)


def hilbert_schmidt_norm_H(spec, t: float, u: SpectralField) -> np.ndarray:
    """|||B(t,u)|||_H = ( sum_n ||mode_n(u)||_H^2 )^(1/2)."""
    return np.sqrt(hilbert_schmidt_sq(spec, t, u))


def _weighted_pairing(grid: WaveGrid, a: np.ndarray, b: np.ndarray, s: float):
    w = grid.one_plus_ksq ** s if s != 0.0 else 1.0
    ax = tuple(range(-grid.dimension - 1, 0))
    return np.sum(w * a * np.conj(b), axis=ax).real


def hilbert_schmidt_sq(spec, t: float, u: SpectralField,
                       ws: Optional[spaces.StepWorkspace] = None) -> np.ndarray:
    """|||B(t,u)|||_H^2 collapsed over the per-mode structure.

    Uses sum_n ||(b_n.grad)u + c_n G||^2 = sigma_ij (d_i u, d_j u)_H
    + 2 ((sum_n c_n b_n . grad) u, G)_H + sum_n c_n^2 ||G||_H^2, which is
    M-independent; falls back to the mode loop for per-component amplitudes.
    For mode-wise projected equations this relies on (b_n.grad)u being
    divergence-free (constant b_n, div-free u).
    """
    grid = u.grid
    triple = spec.triple
    noise = spec.noise
    if noise.g_kind != "none" and noise.g_coeffs.ndim > 1:
        return np.sum(diffusion_modes_h_norm_sq(spec, t, u), axis=-1)
    out = 0.0
    g = _g_field(spec, t, u, ws)
    if g is not None and getattr(spec, "project_noise", False):
        from .operators import helmholtz_project
        g = helmholtz_project(g)
    if noise.has_transport:
        sigma = noise.sigma_matrix()
        grads = [u.coeffs * (1j * kj) for kj in grid.k_vectors]
        for i in range(grid.dimension):
            for j in range(i, grid.dimension):
                pair = _weighted_pairing(grid, grads[i], grads[j], triple.s_H)
                out = out + (1.0 if i == j else 2.0) * sigma[i, j] * pair
        if g is not None:
            cb = noise.g_coeffs @ noise.b  # (d,)
            cross = None
            for j in range(grid.dimension):
                term = _weighted_pairing(grid, grads[j], g.coeffs, triple.s_H)
                term = cb[j] * term
                cross = term if cross is None else cross + term
            out = out + 2.0 * cross
    if g is not None:
        gsq = spaces.sobolev_norm_sq(g, triple.s_H)
        out = out + float(np.sum(noise.g_coeffs ** 2)) * gsq
    return out


def adjoint_applied(spec, t: float, u: SpectralField) -> np.ndarray:
    """B(t,u)^* u in U: components (mode_n(u), u)_H, shape (batch..., M)."""
    triple = spec.triple
    g_shared = _g_field(spec, t, u)
    out = []
    for n in range(spec.noise.mode_count):
        m = diffusion_mode(spec, t, u, n, g_shared=g_shared)
        out.append(spaces.duality_pairing(m, u, triple))
    return np.stack(out, axis=-1)


def operator_norm_LUH(spec, t: float, u: SpectralField) -> float:
    """Operator norm of B(t,u) from U = l2_M to H (largest singular value)."""
    triple = spec.triple
    noise = spec.noise
    g_shared = _g_field(spec, t, u)
    modes = [diffusion_mode(spec, t, u, n, g_shared=g_shared)
             for n in range(noise.mode_count)]
    w = u.grid.one_plus_ksq ** triple.s_H if triple.s_H != 0.0 else 1.0
    gram = np.zeros((noise.mode_count, noise.mode_count))
    for i in range(noise.mode_count):
        for j in range(i, noise.mode_count):
            val = np.sum(w * modes[i].coeffs * np.conj(modes[j].coeffs)).real
            gram[i, j] = gram[j, i] = val
    eig = np.linalg.eigvalsh(gram)
    return float(np.sqrt(max(eig[-1], 0.0)))
