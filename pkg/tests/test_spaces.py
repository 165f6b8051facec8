"""Norm scale, spectral calculus, and dealiased pointwise evaluation."""

import numpy as np
import pytest

from torusspde import spaces
from torusspde.spaces import GelfandTriple, SpectralField, WaveGrid


def direct_sobolev_norm(u, s):
    """Brute-force summation oracle over the full coefficient array."""
    grid = u.grid
    total = 0.0
    it = np.ndindex(*grid.field_shape)
    for idx in it:
        kidx = idx[1:]
        ksq = sum((spaces.TWO_PI / grid.period * grid.k_index[i]) ** 2
                  for i in kidx)
        total += (1.0 + ksq) ** s * abs(u.coeffs[idx]) ** 2
    return np.sqrt(total)


class TestWaveGrid:
    def test_invariants(self):
        g = WaveGrid(2, 16)
        assert g.dof == 256
        assert set(g.k_index) == set(range(-8, 8))
        assert g.dealias_limit == 5

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            WaveGrid(5, 16)
        with pytest.raises(ValueError):
            WaveGrid(2, 15)
        with pytest.raises(ValueError):
            WaveGrid(2, 2)
        with pytest.raises(ValueError):
            WaveGrid(1, 16, period=-1.0)


class TestSobolevNorm:
    def test_constant_field_any_exponent(self):
        g = WaveGrid(2, 8)
        one = spaces.constant_field(g, 1.0)
        for s in (-1.0, 0.0, 0.7, 2.0):
            assert spaces.sobolev_norm(one, s) == pytest.approx(1.0, abs=1e-15)

    def test_cos_single_frequency(self):
        g = WaveGrid(1, 16)
        u = spaces.field_from_function(g, np.cos)
        l2 = spaces.sobolev_norm(u, 0.0)
        h1 = spaces.sobolev_norm(u, 1.0)
        assert h1 == pytest.approx(np.sqrt(2.0) * l2, rel=1e-14)

    def test_matches_direct_summation(self):
        g = WaveGrid(1, 16)
        rng = np.random.default_rng(0)
        u = spaces.random_band_field(g, rng)
        got = spaces.sobolev_norm(u, 0.7)
        want = direct_sobolev_norm(u, 0.7)
        assert got == pytest.approx(want, rel=1e-13)

    def test_monotone_in_s(self):
        g = WaveGrid(2, 12)
        rng = np.random.default_rng(1)
        u = spaces.random_band_field(g, rng)
        norms = [spaces.sobolev_norm(u, s) for s in np.linspace(-2, 2, 9)]
        assert all(a <= b + 1e-12 for a, b in zip(norms, norms[1:]))

    def test_parseval(self):
        rng = np.random.default_rng(2)
        for d in (1, 2, 3):
            g = WaveGrid(d, 12)
            u = spaces.random_band_field(g, rng)
            lhs = spaces.sobolev_norm(u, 0.0) ** 2
            rhs = spaces.mean_square(u)
            assert lhs == pytest.approx(rhs, rel=1e-12)


class TestGelfandTriple:
    def test_standard_settings(self):
        assert GelfandTriple.weak() == GelfandTriple(-1, 0, 1)
        assert GelfandTriple.strong() == GelfandTriple(0, 1, 2)
        assert GelfandTriple.fourth_order() == GelfandTriple(-2, 0, 2)
        with pytest.raises(ValueError):
            GelfandTriple(-1, 0.3, 1)

    def test_beta_exponent_linear(self):
        t = GelfandTriple.strong()
        assert t.s_of_beta(0.5) == t.s_H
        assert t.s_of_beta(0.75) == pytest.approx(1.5)
        assert t.s_of_beta(1.0) == t.s_V
        with pytest.raises(ValueError):
            t.s_of_beta(1.2)

    def test_norm_beta_weak_midpoint_is_l2(self):
        g = WaveGrid(1, 16)
        rng = np.random.default_rng(3)
        u = spaces.random_band_field(g, rng)
        assert spaces.norm_beta(u, GelfandTriple.weak(), 0.5) == pytest.approx(
            spaces.sobolev_norm(u, 0.0), rel=1e-14)

    def test_norm_beta_strong_three_quarters_is_h32(self):
        g = WaveGrid(2, 12)
        rng = np.random.default_rng(4)
        u = spaces.random_band_field(g, rng)
        assert spaces.norm_beta(u, GelfandTriple.strong(), 0.75) == pytest.approx(
            spaces.sobolev_norm(u, 1.5), rel=1e-14)

    def test_norm_beta_endpoint(self):
        g = WaveGrid(1, 16)
        rng = np.random.default_rng(5)
        u = spaces.random_band_field(g, rng)
        for triple in (GelfandTriple.weak(), GelfandTriple.fourth_order()):
            assert spaces.norm_beta(u, triple, 1.0) == pytest.approx(
                spaces.sobolev_norm(u, triple.s_V), rel=1e-14)


class TestDualityPairing:
    def test_self_pairing_is_h_norm(self):
        g = WaveGrid(2, 12)
        rng = np.random.default_rng(6)
        u = spaces.random_band_field(g, rng)
        for triple in (GelfandTriple.weak(), GelfandTriple.strong()):
            got = spaces.duality_pairing(u, u, triple)
            assert got == pytest.approx(
                spaces.sobolev_norm(u, triple.s_H) ** 2, rel=1e-13)

    def test_strong_pairing_is_l2_minus_laplacian(self):
        g = WaveGrid(2, 16)
        rng = np.random.default_rng(7)
        v = spaces.random_band_field(g, rng, band=4)
        w = spaces.random_band_field(g, rng, band=4)
        got = spaces.duality_pairing(v, w, GelfandTriple.strong())
        vv, wv = v.values(), w.values()
        lap_v = spaces.laplacian(v).values()
        want = np.mean(vv * wv) - np.mean(lap_v * wv)
        assert got == pytest.approx(want, rel=1e-12)

    def test_orthogonal_modes(self):
        g = WaveGrid(1, 16)
        a = spaces.single_mode_field(g, (2,))
        b = spaces.single_mode_field(g, (3,))
        assert abs(spaces.duality_pairing(a, b, GelfandTriple.weak())) < 1e-15

    def test_grid_mismatch_rejected(self):
        u = spaces.constant_field(WaveGrid(1, 16), 1.0)
        w = spaces.constant_field(WaveGrid(1, 32), 1.0)
        with pytest.raises(spaces.GridMismatchError):
            spaces.duality_pairing(u, w, GelfandTriple.weak())


class TestCalculus:
    def test_laplacian_of_sine(self):
        g = WaveGrid(1, 16)
        u = spaces.field_from_function(g, np.sin)
        lap = spaces.laplacian(u)
        assert np.max(np.abs(lap.coeffs + u.coeffs)) < 1e-13

    def test_div_grad_is_laplacian(self):
        rng = np.random.default_rng(8)
        for d in (1, 2, 3):
            g = WaveGrid(d, 12)
            u = spaces.random_band_field(g, rng)
            lhs = spaces.divergence(spaces.gradient(u))
            rhs = spaces.laplacian(u)
            scale = np.max(np.abs(rhs.coeffs)) + 1e-30
            assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) / scale < 1e-13

    def test_pure_mode_derivative_machine_precision(self):
        g = WaveGrid(2, 16)
        u = spaces.single_mode_field(g, (3, 2))
        du = spaces.differentiate(u, (1, 0))
        exact = spaces.field_from_function(
            g, lambda x, y: -3.0 * np.sin(3 * x + 2 * y))
        assert np.max(np.abs(du.coeffs - exact.coeffs)) < 1e-14

    def test_bilaplacian_matches_squared(self):
        g = WaveGrid(2, 12)
        rng = np.random.default_rng(9)
        u = spaces.random_band_field(g, rng)
        lhs = spaces.bilaplacian(u)
        rhs = spaces.laplacian(spaces.laplacian(u))
        assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) < 1e-12 * (
            1 + np.max(np.abs(rhs.coeffs)))

    def test_laplacian_norm_identity(self):
        # ||Lap v||^2 == sum_{j,k} ||d2_{jk} v||^2 on random fields
        rng = np.random.default_rng(10)
        g = WaveGrid(2, 16)
        for _ in range(50):
            v = spaces.random_band_field(g, rng)
            lhs = spaces.sobolev_norm(spaces.laplacian(v), 0.0) ** 2
            rhs = 0.0
            for j in range(2):
                for k in range(2):
                    alpha = [0, 0]
                    alpha[j] += 1
                    alpha[k] += 1
                    rhs += spaces.sobolev_norm(
                        spaces.differentiate(v, alpha), 0.0) ** 2
            assert lhs == pytest.approx(rhs, rel=1e-12)


class TestPointwise:
    def test_identity(self):
        g = WaveGrid(1, 16)
        rng = np.random.default_rng(11)
        u = spaces.random_band_field(g, rng)
        out = spaces.pointwise_apply(lambda y: y, u, dealias=False)
        assert np.max(np.abs(out.coeffs - u.coeffs)) < 1e-14

    def test_square_of_cosine(self):
        g = WaveGrid(1, 16)
        u = spaces.field_from_function(g, np.cos)
        sq = spaces.pointwise_apply([0.0, 0.0, 1.0], u)
        exact = spaces.field_from_function(g, lambda x: 0.5 + 0.5 * np.cos(2 * x))
        assert np.max(np.abs(sq.coeffs - exact.coeffs)) < 1e-14

    def test_cube_matches_convolution_oracle(self):
        n = 16
        g = WaveGrid(1, n)
        rng = np.random.default_rng(12)
        u = spaces.random_band_field(g, rng, band=n // 3)
        cube = spaces.pointwise_apply([0, 0, 0, 1.0], u)
        c = np.fft.fftshift(u.coeffs[0])
        full = np.convolve(np.convolve(c, c), c)
        center = 3 * (n // 2)
        for j, k in enumerate(np.fft.fftfreq(n, 1 / n).astype(int)):
            want = full[center + k] if abs(k) <= n // 3 else 0.0
            assert abs(cube.coeffs[0, j] - want) < 1e-12

    def test_dealiased_cube_exact_on_small_grids(self):
        for n in (12, 18, 24):
            g = WaveGrid(1, n)
            rng = np.random.default_rng(n)
            u = spaces.random_band_field(g, rng, band=n // 3)
            cube = spaces.pointwise_apply([0, 0, 0, 1.0], u)
            c = np.fft.fftshift(u.coeffs[0])
            full = np.convolve(np.convolve(c, c), c)
            center = 3 * (n // 2)
            for j, k in enumerate(np.fft.fftfreq(n, 1 / n).astype(int)):
                if abs(k) <= n // 3:
                    assert abs(cube.coeffs[0, j] - full[center + k]) < 1e-12

    def test_overflow_detection(self):
        g = WaveGrid(1, 16)
        u = spaces.constant_field(g, 1000.0)
        with np.errstate(over="ignore", invalid="ignore"):
            out = spaces.pointwise_apply(lambda y: np.exp(y * y), u, dealias=False)
        assert spaces.has_overflow(out)


class TestInterpolationInequality:
    def test_constant_one_on_multiplier_norms(self):
        # |u|_beta <= |u|_H^(2-2beta) |u|_V^(2beta-1) with constant exactly 1
        rng = np.random.default_rng(13)
        g = WaveGrid(2, 12)
        triples = (GelfandTriple.weak(), GelfandTriple.strong(),
                   GelfandTriple.fourth_order())
        for i in range(300):
            u = spaces.random_band_field(g, rng)
            beta = rng.uniform(0.5, 1.0)
            triple = triples[i % 3]
            lhs = spaces.norm_beta(u, triple, beta)
            h = spaces.sobolev_norm(u, triple.s_H)
            v = spaces.sobolev_norm(u, triple.s_V)
            assert lhs <= h ** (2 - 2 * beta) * v ** (2 * beta - 1) * (1 + 1e-12)

    def test_hermitian_symmetry_enforced(self):
        g = WaveGrid(1, 16)
        rng = np.random.default_rng(14)
        raw = rng.standard_normal(g.field_shape) + 1j * rng.standard_normal(g.field_shape)
        u = SpectralField(g, raw, enforce=True)
        vals = np.fft.ifftn(u.coeffs, axes=g.axes, norm="forward")
        assert np.max(np.abs(vals.imag)) < 1e-13
