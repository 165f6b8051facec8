"""Monte-Carlo experiment harness and the stochastic Gronwall machinery."""

import numpy as np
import pytest

from torusspde import conditions, noise, operators, solver, spaces, verify
from torusspde.conditions import AuditConfig
from torusspde.noise import NoiseSpec
from torusspde.solver import SolverConfig
from torusspde.spaces import SpectralField, WaveGrid
from torusspde.verify import (GronwallInstance, PreconditionError,
                              apriori_experiment,
                              continuous_dependence_experiment,
                              deterministic_corollary_bound, gronwall_bound,
                              gronwall_exact_tail, gronwall_harness,
                              ito_refinement_experiment,
                              ito_residual_experiment, tail_experiment)


def heat_additive(grid=None, norm2=0.5):
    grid = grid or WaveGrid(1, 16)
    ns = NoiseSpec(mode_count=4, g_kind="additive",
                   g_coeffs=noise.l2_profile(4, norm2), g_profile="cos")
    return operators.make_second_order(grid, ns, a=1.0)


def allen_cahn_quadratic(gamma_sq, grid=None, modes=16):
    grid = grid or WaveGrid(2, 16)
    ns = NoiseSpec(mode_count=modes, g_kind="poly",
                   g_coeffs=noise.l2_profile(modes, gamma_sq), g_power=2)
    return operators.make_allen_cahn(grid, ns)


class TestAprioriExperiment:
    def test_heat_affine_fit(self):
        spec = heat_additive()
        prof = spaces.single_mode_field(spec.grid, (1,))
        cfg = SolverConfig(dt=5e-3, horizon=0.5)
        rep = apriori_experiment(spec, prof, [0.0, 1.0, 2.0, 4.0], 256, cfg,
                                 seed=1, eta=0.5,
                                 audit_cfg=AuditConfig(samples=200, seed=1))
        assert rep.passed and rep.blowups == 0
        assert rep.r_squared > 0.99
        assert rep.slope > 0
        # zero scale: LHS driven by the inhomogeneity alone, near the intercept
        assert rep.lhs[0] > 0
        assert abs(rep.lhs[0] - rep.intercept) <= 3 * rep.lhs_boot[0] + 1e-12

    def test_refused_without_passing_audit(self):
        spec = allen_cahn_quadratic(1.8)   # far above the threshold
        prof = spaces.constant_field(spec.grid, 1.0)
        cfg = SolverConfig(dt=5e-3, horizon=0.1)
        with pytest.raises(PreconditionError):
            apriori_experiment(spec, prof, [0.0, 1.0], 8, cfg, seed=2, eta=1e-3,
                               audit_cfg=AuditConfig(samples=300, seed=2))


class TestTailExperiment:
    def test_tail_report_on_boundary_spec(self):
        spec = allen_cahn_quadratic(1.5, grid=WaveGrid(2, 12), modes=8)
        rng = np.random.default_rng(3)
        u0 = spaces.random_band_field(spec.grid, rng, band=2)
        u0 = SpectralField(spec.grid, u0.coeffs
                           * (1.0 / float(spaces.sobolev_norm(u0, 1.0))))
        cfg = SolverConfig(dt=2e-3, horizon=0.25)
        rep = tail_experiment(spec, u0, 2000, cfg, seed=3, eta=0.0,
                              audit_cfg=AuditConfig(samples=300, seed=3))
        assert rep.passed
        assert rep.blowup_fraction <= 0.001
        assert np.all(np.diff(rep.probs) <= 1e-12)   # tails decrease in gamma
        assert rep.sup_t_e_h_sq > 0

    def test_gamma_grid_must_exceed_one(self):
        spec = heat_additive()
        u0 = spaces.constant_field(spec.grid, 0.0)
        cfg = SolverConfig(dt=1e-2, horizon=0.1)
        with pytest.raises(ValueError):
            tail_experiment(spec, u0, 64, cfg, seed=4, eta=0.0,
                            gammas=[0.5, 2.0],
                            audit_cfg=AuditConfig(samples=150, seed=4))


class TestContinuousDependence:
    def test_linear_equation_distance_proportional(self):
        spec = heat_additive()
        u0 = spaces.constant_field(spec.grid, 0.0)
        prof = spaces.single_mode_field(spec.grid, (2,))
        cfg = SolverConfig(dt=5e-3, horizon=0.25)
        deltas = [1.0, 0.5, 0.25, 0.125, 0.0]
        rep = continuous_dependence_experiment(
            spec, u0, prof, deltas, 16, cfg, seed=5, eta=0.5,
            audit_cfg=AuditConfig(samples=200, seed=5))
        assert rep.zero_delta_exact
        assert rep.passed
        med = rep.median_z[:-1]
        ratios = med[:-1] / med[1:]
        assert np.allclose(ratios, 2.0, rtol=1e-10)

    def test_excluded_pairs_reported(self):
        rep_fields = (np.array([1.0, 2.0]), np.array([0.5, 0.5]),
                      np.array([solver.STATUS_COMPLETED, solver.STATUS_BLOWN_UP]),
                      np.array([solver.STATUS_COMPLETED, solver.STATUS_COMPLETED]))
        cr = solver.CoupledRun(*rep_fields)
        assert cr.valid.tolist() == [True, False]


class TestItoExperiments:
    def test_additive_linear_cumulative_within_4se(self):
        spec = heat_additive(norm2=1.0)
        u0 = spaces.constant_field(spec.grid, 0.5)
        cfg = SolverConfig(dt=1e-3, horizon=0.25)
        rep = ito_residual_experiment(spec, u0, 2000, cfg, seed=6)
        assert rep.within_4se

    def test_nonlinear_residual_halves_with_dt(self):
        spec = allen_cahn_quadratic(1.0, grid=WaveGrid(2, 12), modes=8)
        rng = np.random.default_rng(7)
        u0 = spaces.random_band_field(spec.grid, rng, band=2)
        u0 = SpectralField(spec.grid, u0.coeffs
                           / float(spaces.sobolev_norm(u0, 1.0)))
        cfg = SolverConfig(dt=4e-3, horizon=0.25)
        rep = ito_refinement_experiment(spec, u0, 256, cfg, seed=7)
        assert rep.within_tolerance


class TestGronwallBound:
    def test_plugin_values(self):
        v, of = gronwall_bound(1.0, 0.0, 0.0, 4.0, 1.0)
        assert not of and v == pytest.approx(1.0)
        assert deterministic_corollary_bound(1.0, np.log(2.0) / 4.0, 1.0) == \
            pytest.approx(4.0 * 2.0 ** 0.25 * np.exp(0.0) *
                          np.exp(np.log(2.0)) / 2.0 ** 0.25, rel=1e-12)

    def test_exponential_ode_slack(self):
        # X' = f X with int f = ln2/4: true growth 2^(1/4), bound 8
        true_ratio = 2.0 ** 0.25
        bound = deterministic_corollary_bound(1.0, np.log(2.0) / 4.0, 1.0)
        assert bound == pytest.approx(8.0, rel=1e-12)
        assert true_ratio <= bound

    def test_overflow_flag(self):
        v, of = gronwall_bound(2.0, 0.0, 200.0, 1.0, 1.0)
        assert of and np.isinf(v)

    def test_validation(self):
        with pytest.raises(ValueError):
            gronwall_bound(0.5, 0.0, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            gronwall_bound(1.0, -0.1, 1.0, 1.0, 1.0)
        assert gronwall_bound(1.0, 0.0, 1.0, 1.0, 0.0) == (0.0, False)


class TestGronwallHarness:
    def test_deterministic_family_exact(self):
        x_T = np.exp(0.5)
        inst = GronwallInstance("deterministic", C=1.0, T=1.0, f_const=0.5,
                                x0=1.0, gammas=(x_T - 1e-9, x_T + 1e-9),
                                R_values=(0.5,))
        v = gronwall_harness(inst, 50, seed=1)
        assert v.passed and v.hypothesis_ok
        assert v.tail_rows[0][2] == 1.0 and v.tail_rows[1][2] == 0.0

    def test_sup_gbm_lognormal_oracle(self):
        inst = GronwallInstance("sup_gbm", C=1.2, T=1.0, f_const=0.6, x0=1.0,
                                mu=0.05, sigma=0.5, steps=256,
                                gammas=(2.0, 3.0, 4.0), R_values=(0.6,))
        v = gronwall_harness(inst, 20_000, seed=2)
        assert v.passed and v.hypothesis_ok
        assert v.oracle_ok
        assert all(r[6] >= 2.0 for r in v.tail_rows)   # >= 2x slack

    def test_eta_driven_family(self):
        inst = GronwallInstance("eta_driven", C=1.0, eta=2.0, T=1.0,
                                f_const=0.5, x0=0.0,
                                gammas=(0.4, 0.8, 1.2), R_values=(0.5,))
        v = gronwall_harness(inst, 20_000, seed=3)
        assert v.passed and v.oracle_ok
        # X(0) = 0: the bound is driven entirely by eta
        for gamma in inst.gammas:
            val, _ = gronwall_bound(inst.C, inst.eta, 0.5, gamma, 0.0)
            assert val > 0

    def test_exact_tails(self):
        inst = GronwallInstance("eta_driven", C=1.0, eta=1.0, T=1.0,
                                f_const=np.log(3.0), x0=0.0)
        # X(T) = U * (3 - 1) = 2U, U ~ Uniform[1/2, 1]
        assert gronwall_exact_tail(inst, 1.0) == pytest.approx(1.0)
        assert gronwall_exact_tail(inst, 1.5) == pytest.approx(0.5)
        assert gronwall_exact_tail(inst, 2.0) == pytest.approx(0.0)

    def test_hypothesis_violation_rejected_before_tail_testing(self):
        # strongly drifting sup-GBM with f too small to dominate its growth:
        # the (A.1) spot check fails and the instance is rejected
        bad = GronwallInstance("sup_gbm", C=1.0, T=1.0, f_const=0.01, x0=1.0,
                               mu=2.0, sigma=0.1, steps=128,
                               gammas=(2.0,), R_values=(0.01,))
        v = gronwall_harness(bad, 4000, seed=4)
        assert not v.hypothesis_ok
        assert not v.passed
        assert v.tail_rows == []


class TestEnsembleResult:
    def test_from_run_statistics(self):
        spec = heat_additive()
        u0 = spaces.constant_field(spec.grid, 1.0)
        cfg = SolverConfig(dt=5e-3, horizon=0.1)
        run = solver.simulate_ensemble(spec, u0, cfg, 9, 128)
        res = verify.EnsembleResult.from_run(run, gammas=[1.0, 1.5])
        assert res.path_count == 128
        assert res.e_sup_h_sq == pytest.approx(float(np.mean(run.sup_h_sq)))
        assert res.tail_probs is not None
        assert res.tail_probs[0] >= res.tail_probs[1]
        assert res.blowup_fraction == 0.0
