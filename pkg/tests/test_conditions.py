"""Criticality arithmetic, admissible exponents, parabolicity, coercivity audit."""

from fractions import Fraction

import numpy as np
import pytest

from torusspde import conditions, noise, operators, spaces
from torusspde.conditions import (AuditConfig, NotParameterized, RhoInterval,
                                  admissible_rho, audit_coercivity,
                                  check_parabolicity, check_quadratic_growth,
                                  check_subcriticality)
from torusspde.noise import NoiseSpec
from torusspde.spaces import WaveGrid


class TestSubcriticality:
    def test_critical_pair_exact(self):
        rep = check_subcriticality([(Fraction(2), Fraction(2, 3))])
        assert rep.entries[0].status == "critical"
        assert rep.entries[0].slack == 0

    def test_subcritical_pairs(self):
        rep = check_subcriticality([(Fraction(1), Fraction(5, 8)),
                                    (Fraction(0), Fraction(3, 4))])
        assert [e.status for e in rep.entries] == ["subcritical", "subcritical"]
        assert rep.entries[0].slack == Fraction(3, 2) - Fraction(5, 4)
        assert rep.entries[1].slack == Fraction(2) - Fraction(3, 2)

    def test_inadmissible_cases(self):
        rep = check_subcriticality([(Fraction(2), Fraction(3, 4)),   # slack < 0
                                    (Fraction(1), Fraction(1, 2)),   # beta too low
                                    (Fraction(1), Fraction(1))])     # beta = 1
        assert all(e.status == "inadmissible" for e in rep.entries)
        assert not rep.all_admissible

    def test_exact_rational_no_float_drift(self):
        # 2 * 0.665 < 4/3 in floats; the rational 2/3 pair must be exactly critical
        rep = check_subcriticality([(2, Fraction(2, 3))] * 100)
        assert all(e.status == "critical" for e in rep.entries)

    def test_accepts_declared_spec_pairs(self):
        spec = operators.make_allen_cahn(WaveGrid(2, 8), noise.zero_noise())
        rep = check_subcriticality(spec.params)
        assert rep.all_admissible
        assert rep.any_critical


class TestAdmissibleRho:
    def test_fourth_order_interval(self):
        for d in (1, 2, 3, 4):
            iv = admissible_rho("cahn_hilliard", d)
            assert iv == RhoInterval(Fraction(0), Fraction(4, d))
        assert admissible_rho("cahn_hilliard", 2).contains(2)   # double well

    def test_second_order_three_way_bracket(self):
        assert admissible_rho("second_order", 1, "f") == RhoInterval(
            Fraction(0), Fraction(3))
        iv2 = admissible_rho("second_order", 2, "f")
        assert iv2.hi == Fraction(2) and iv2.hi_open
        assert not iv2.contains(2)
        assert iv2.contains(Fraction(199, 100))
        assert admissible_rho("second_order", 3, "f") == RhoInterval(
            Fraction(0), Fraction(4, 3))

    def test_second_order_flux_and_noise_slots(self):
        # columns d = 1, 2, 3 of the comparison table
        assert admissible_rho("second_order", 1, "fbar").hi == Fraction(2)
        assert admissible_rho("second_order", 2, "fbar").hi == Fraction(1)
        assert admissible_rho("second_order", 3, "fbar").hi == Fraction(2, 3)
        assert admissible_rho("second_order", 2, "g").hi == Fraction(1)

    def test_sixth_bracket(self):
        assert admissible_rho("swift_hohenberg", 1).hi == Fraction(5)
        assert admissible_rho("swift_hohenberg", 2).hi == Fraction(3)
        assert admissible_rho("swift_hohenberg", 3).hi == Fraction(7, 3)
        iv4 = admissible_rho("swift_hohenberg", 4)
        assert iv4.hi == Fraction(2) and iv4.hi_open and not iv4.contains(2)
        assert admissible_rho("swift_hohenberg", 5).hi == Fraction(8, 5)
        assert admissible_rho("swift_hohenberg", 3).contains(2)  # cubic classic

    def test_not_parameterized_variants(self):
        with pytest.raises(NotParameterized):
            admissible_rho("tamed_ns", 3)
        with pytest.raises(NotParameterized):
            admissible_rho("quasilinear_1d", 1)


class TestParabolicity:
    def test_identity_diffusion_no_noise(self):
        spec = operators.make_second_order(WaveGrid(2, 8), noise.zero_noise())
        rep = check_parabolicity(spec)
        assert rep.passed and rep.margin == pytest.approx(1.0)

    def test_allen_cahn_rank_one_exact(self):
        c = np.array([0.5, 0.3, 0.2])
        nu = float(np.sum(c ** 2))
        b = np.zeros((3, 2))
        b[:, 0] = c
        spec = operators.make_allen_cahn(WaveGrid(2, 8),
                                         NoiseSpec(mode_count=3, b=b))
        rep = check_parabolicity(spec)
        assert rep.nu_hat == pytest.approx(nu, rel=1e-14)
        assert rep.margin == pytest.approx(2.0 - nu, rel=1e-12)

    def test_tamed_ns_rescaled_pass_and_fail(self):
        rng = np.random.default_rng(0)
        b = rng.standard_normal((6, 3))
        grid = WaveGrid(3, 8, components=3)
        sigma = b.T @ b
        lam = np.linalg.eigvalsh(sigma)[-1]
        b_pass = b * np.sqrt(0.95 / lam)
        spec = operators.make_tamed_ns(grid, NoiseSpec(mode_count=6, b=b_pass))
        rep = check_parabolicity(spec)
        assert rep.passed and rep.margin == pytest.approx(0.05, abs=1e-12)
        b_fail = b * np.sqrt(1.2 / lam)
        spec2 = operators.make_tamed_ns(grid, NoiseSpec(mode_count=6, b=b_fail))
        rep2 = check_parabolicity(spec2)
        assert not rep2.passed
        assert rep2.witness_xi is not None
        # witness direction attains the violating eigenvalue
        quad = float(rep2.witness_xi @ (b_fail.T @ b_fail) @ rep2.witness_xi)
        assert quad == pytest.approx(1.2, rel=1e-12)

    def test_quasilinear_scan(self):
        ns = NoiseSpec(mode_count=2, b=np.array([[0.6], [0.3]]))
        spec = operators.make_quasilinear_1d(WaveGrid(1, 16), ns, a0=1.0, a1=0.5)
        rep = check_parabolicity(spec)
        # min of a(y) - |b|^2/2 = (1 - 0.5) - 0.225
        assert rep.margin == pytest.approx(0.5 - 0.225, abs=1e-3)
        assert rep.passed

    def test_no_transport_variants_trivial(self):
        spec = operators.make_cahn_hilliard(WaveGrid(1, 8), noise.zero_noise())
        assert check_parabolicity(spec).passed


def _heat_spec(grid=None, g_norm2=0.0):
    grid = grid or WaveGrid(1, 16)
    if g_norm2 > 0:
        ns = NoiseSpec(mode_count=4, g_kind="additive",
                       g_coeffs=noise.l2_profile(4, g_norm2), g_profile="cos")
    else:
        ns = noise.zero_noise()
    return operators.make_second_order(grid, ns, a=1.0)


def _allen_cahn_quadratic(gamma_sq, n_modes=16, grid=None):
    grid = grid or WaveGrid(2, 16)
    ns = NoiseSpec(mode_count=n_modes, g_kind="poly",
                   g_coeffs=noise.l2_profile(n_modes, gamma_sq), g_power=2)
    return operators.make_allen_cahn(grid, ns)


class TestCoercivityAudit:
    def test_heat_equation_unit_constants(self):
        audit = audit_coercivity(_heat_spec(), 1.0, AuditConfig(samples=300, seed=1))
        assert audit.passed
        assert audit.theta == pytest.approx(1.0, abs=1e-9)
        assert audit.M_const == pytest.approx(1.0, abs=1e-9)
        assert audit.sampled_min_margin >= -1e-9

    def test_allen_cahn_threshold_pass_fail(self):
        cfg = AuditConfig(samples=800, seed=2)
        ok = audit_coercivity(_allen_cahn_quadratic(1.4), 1e-3, cfg)
        assert ok.passed
        bad = audit_coercivity(_allen_cahn_quadratic(1.6), 1e-3, cfg)
        assert not bad.passed
        assert bad.failure_witness is not None
        assert bad.sampled_min_margin < 0

    def test_cahn_hilliard_double_well_small_eta(self):
        grid = WaveGrid(2, 16)
        spec = operators.make_cahn_hilliard(
            grid, NoiseSpec(mode_count=4, g_kind="additive",
                            g_coeffs=noise.l2_profile(4, 0.5), g_profile="cos"))
        audit = audit_coercivity(spec, 0.01, AuditConfig(samples=500, seed=3))
        assert audit.passed and audit.theta > 0.3

    def test_theta_envelope_monotone_in_eta(self):
        # linear multiplicative noise: the functional loses (eta'-eta)|||B|||^2
        ns = NoiseSpec(mode_count=4, g_kind="poly",
                       g_coeffs=noise.l2_profile(4, 0.8), g_power=1)
        spec = operators.make_second_order(WaveGrid(1, 16), ns)
        cfg = AuditConfig(samples=250, seed=4)
        thetas = [audit_coercivity(spec, e, cfg).theta for e in (0.0, 0.2, 0.5)]
        assert thetas[0] >= thetas[1] >= thetas[2]

    def test_homogeneity_fit_scale_invariant(self):
        spec = _heat_spec()
        a1 = audit_coercivity(spec, 0.01, AuditConfig(samples=250, seed=5,
                                                      amp_lo=1e-3, amp_hi=1e3))
        a2 = audit_coercivity(spec, 0.01, AuditConfig(samples=250, seed=5,
                                                      amp_lo=5e-3, amp_hi=5e3))
        assert a1.theta == pytest.approx(a2.theta, abs=1e-9)
        assert a1.M_const == pytest.approx(a2.M_const, abs=1e-9)

    def test_eta_zero_mode_includes_growth(self):
        audit = audit_coercivity(_allen_cahn_quadratic(1.5), 0.0,
                                 AuditConfig(samples=400, seed=6), mode="eta_zero")
        assert audit.mode == "eta_zero"
        assert audit.growth_ok is not None
        assert audit.passed

    def test_weak_variant_mode_runs(self):
        audit = audit_coercivity(_heat_spec(g_norm2=0.3), 0.5,
                                 AuditConfig(samples=250, seed=7),
                                 mode="weak_variant")
        assert audit.mode == "weak_variant"
        assert audit.passed

    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError):
            audit_coercivity(_heat_spec(), 0.1, AuditConfig(samples=50), mode="x")


class TestThresholdBisection:
    def test_brackets_quadratic_noise_threshold(self):
        cfg = AuditConfig(samples=400, seed=8)

        def make(gamma_sq):
            return _allen_cahn_quadratic(gamma_sq, grid=WaveGrid(2, 16))

        lo, hi = conditions.bisect_coercivity_threshold(make, 1.0, 2.0, 1e-3,
                                                        cfg, tol=0.05)
        assert 1.4 <= lo < hi <= 1.6

    def test_bad_endpoints_rejected(self):
        cfg = AuditConfig(samples=200, seed=9)

        def make(gamma_sq):
            return _allen_cahn_quadratic(gamma_sq)

        with pytest.raises(ValueError):
            conditions.bisect_coercivity_threshold(make, 1.7, 2.0, 1e-3, cfg)


class TestQuadraticGrowth:
    def test_allen_cahn_g_slot_boundary(self):
        # rho = 1, beta = 3/4 sits exactly on 2 beta = 1 + 1/(rho+1)
        spec = _allen_cahn_quadratic(1.0, n_modes=8)
        rep = check_quadratic_growth(spec, AuditConfig(samples=150, seed=10))
        assert rep.symbolic_ok and rep.passed
        assert rep.slot_status[0][3]

    def test_super_linear_g_slot_fails_symbolically(self):
        ns = NoiseSpec(mode_count=4, g_kind="poly",
                       g_coeffs=noise.l2_profile(4, 0.5), g_power=3)
        spec = operators.make_swift_hohenberg(WaveGrid(1, 16), ns,
                                              f_coeffs=(0, 1.0, 0, -1.0))
        rep = check_quadratic_growth(spec)
        assert not rep.symbolic_ok and not rep.passed

    def test_semilinear_transport_auto_passes(self):
        ns = NoiseSpec(mode_count=2, b=np.array([[0.4], [0.2]]))
        spec = operators.make_second_order(WaveGrid(1, 16), ns)
        rep = check_quadratic_growth(spec, AuditConfig(samples=100, seed=11))
        assert rep.b0_semilinear and rep.passed
