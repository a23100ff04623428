import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cchkd.asymptotics import (
    AsymptoticContext,
    InconsistentModelError,
    RiskRegime,
    asymptotic_risk,
    asymptotic_risk_over,
    asymptotic_risk_under,
    cch_correlations,
    cch_mi_gap,
    cch_verdict,
    conditional_independence_teacher,
    optimal_teacher_weight,
    sigma_bar_sq,
    small_lambda_condition,
    small_lambda_slope,
    solve_tau,
    w_bar,
)
from cchkd.gaussian_model import CorrelationSpec, PopulationModel, derive_population_model, sample_dataset
from cchkd.regression import TeacherWeights, effective_labels, fit_teacher_population
from cchkd.validation import FD_STEP, cch_grid, cch_violations, mc_minnorm_agreement

SPEC = CorrelationSpec(0.5, 0.9, 0.4, 10)
MODEL = derive_population_model(SPEC)
TEACHER = fit_teacher_population(MODEL)


def risk(model, teacher, lam, kappa=10.0):
    return asymptotic_risk(AsymptoticContext(model, kappa, teacher, lam)).total


def random_model(p, seed):
    """Generic population model from a random joint covariance."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2 * p + 1, 2 * p + 1))
    c = a @ a.T / (2 * p + 1) + 0.2 * np.eye(2 * p + 1)
    return PopulationModel(c[:p, :p], c[:p, p:2 * p], c[:p, -1], c[p:2 * p, p:2 * p], c[p:2 * p, -1],
                           float(c[-1, -1]))


def fd_gradient(f, x, h=FD_STEP):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


class TestContext:
    @pytest.mark.parametrize("kappa", [0.0, -1.0, 1.0])
    def test_bad_kappa(self, kappa):
        with pytest.raises(ValueError):
            AsymptoticContext(MODEL, kappa, TEACHER, 0.5)

    def test_bad_lambda(self):
        with pytest.raises(ValueError):
            AsymptoticContext(MODEL, 2.0, TEACHER, -0.5)


class TestEffectiveTarget:
    def test_w_bar_at_zero(self):
        np.testing.assert_allclose(w_bar(MODEL, TEACHER, 0.0), MODEL.w_star, atol=1e-14)

    def test_w_bar_large_lambda(self):
        target = np.linalg.solve(MODEL.Sigma22, MODEL.Sigma12.T @ TEACHER.w1)
        np.testing.assert_allclose(w_bar(MODEL, TEACHER, 1e6), target, rtol=1e-4)

    def test_sigma_bar_at_zero(self):
        assert sigma_bar_sq(MODEL, TEACHER, 0.0) == pytest.approx(MODEL.noise_var, rel=1e-12)

    def test_sigma_bar_zero_teacher(self):
        zero = TeacherWeights(np.zeros(SPEC.p))
        np.testing.assert_allclose(w_bar(MODEL, zero, 1.0), MODEL.w_star / 2, atol=1e-14)
        assert sigma_bar_sq(MODEL, zero, 1.0) == pytest.approx(MODEL.noise_var / 4, rel=1e-12)

    @given(st.floats(0.0, 50.0), st.integers(1, 6), st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_sigma_bar_two_forms(self, lam, p, seed):
        # E[ybar^2] - wbar' S22 wbar equals the expanded numerator over (1+lam)^2.
        m = random_model(p, seed)
        t = TeacherWeights(np.random.default_rng(seed + 1).normal(size=p))
        b = asymptotic_risk_under(AsymptoticContext(m, 3.0, t, lam))
        assert b.sigma_bar_sq == pytest.approx(sigma_bar_sq(m, t, lam), rel=1e-8, abs=1e-12)

    def test_inconsistent_model_raises(self):
        # Sigma11 too small to explain Sigma12: not a valid joint covariance.
        tiny = PopulationModel(0.01 * np.eye(2), np.eye(2), np.zeros(2), np.eye(2), np.zeros(2), 1.0)
        t = TeacherWeights(np.array([5.0, 0.0]))
        with pytest.raises(InconsistentModelError):
            sigma_bar_sq(tiny, t, 1.0)

    def test_monte_carlo_moments(self):
        spec = CorrelationSpec(0.5, 0.9, 0.4, 5)
        m = derive_population_model(spec)
        t = fit_teacher_population(m)
        ds = sample_dataset(spec, 100_000, 17)
        resid = effective_labels(ds, t, 0.7) - ds.x2 @ w_bar(m, t, 0.7)
        assert np.var(resid) == pytest.approx(sigma_bar_sq(m, t, 0.7), rel=0.02)


class TestUnderRisk:
    def test_lambda_zero(self):
        b = asymptotic_risk_under(AsymptoticContext(MODEL, 100.0, TEACHER, 0.0))
        assert b.bias_term == 0.0
        assert b.total == pytest.approx(MODEL.noise_var / 99, rel=1e-12)
        assert b.regime is RiskRegime.UNDER

    @given(st.floats(0.0, 10.0), st.floats(1.1, 50.0), st.integers(0, 1000))
    @settings(max_examples=50, deadline=None)
    def test_total_is_sum(self, lam, kappa, seed):
        m = random_model(3, seed)
        t = TeacherWeights(np.random.default_rng(seed).normal(size=3))
        b = asymptotic_risk_under(AsymptoticContext(m, kappa, t, lam))
        assert b.total == b.bias_term + b.variance_term
        assert b.bias_term >= 0 and b.variance_term >= 0 and b.sigma_bar_sq >= 0

    def test_rejects_over_regime(self):
        with pytest.raises(ValueError):
            asymptotic_risk_under(AsymptoticContext(MODEL, 0.5, TEACHER, 0.5))

    def test_optimal_teacher_dominates(self):
        kappa, lam = 10.0, 0.5
        w_opt = optimal_teacher_weight(MODEL, kappa, lam)
        r_opt = risk(MODEL, w_opt, lam, kappa)
        for w in (np.zeros(SPEC.p), MODEL.w_star, 0.5 * MODEL.w_star, 2 * MODEL.w_star):
            assert r_opt <= risk(MODEL, TeacherWeights(w), lam, kappa)


class TestOptimalTeacher:
    @staticmethod
    def ci_model(p=4, seed=0):
        """A model where x1 and y are independent given x2."""
        m = random_model(p, seed)
        s13 = m.Sigma12 @ np.linalg.solve(m.Sigma22, m.Sigma23)
        # keep the joint covariance PSD: y = w'x2 + e leaves x1 | x2 untouched
        s33 = float(m.Sigma23 @ np.linalg.solve(m.Sigma22, m.Sigma23)) + 0.5
        return PopulationModel(m.Sigma11, m.Sigma12, s13, m.Sigma22, m.Sigma23, s33)

    def test_ci_model_is_psd(self):
        m = self.ci_model()
        assert np.linalg.eigvalsh(m.joint_covariance())[0] > 0

    def test_ci_lambda_invariant_and_closed_form(self):
        m = self.ci_model()
        kappa = 5.0
        outs = [optimal_teacher_weight(m, kappa, lam).w1 for lam in (0.1, 0.5, 2.0)]
        closed = conditional_independence_teacher(m, kappa)
        # direct transcription of the closed form with an independent inverse
        s12 = m.Sigma12
        expl = s12 @ np.linalg.inv(m.Sigma22) @ s12.T
        ref = (kappa - 1) * np.linalg.inv(m.Sigma11 + (kappa - 2) * expl) @ s12 @ m.w_star
        np.testing.assert_allclose(closed, ref, atol=1e-10)
        for w in outs:
            assert np.max(np.abs(w - outs[0])) < 1e-8
            assert np.max(np.abs(w - closed)) < 1e-8

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("lam", [0.2, 1.0])
    def test_stationarity(self, seed, lam):
        m = random_model(4, seed)
        kappa = 6.0
        w = optimal_teacher_weight(m, kappa, lam).w1
        g = fd_gradient(lambda v: risk(m, TeacherWeights(v), lam, kappa), w)
        assert np.max(np.abs(g)) < 1e-6

    def test_no_signal(self):
        m = derive_population_model(CorrelationSpec(0.0, 0.0, 0.4, 3))
        np.testing.assert_allclose(optimal_teacher_weight(m, 4.0, 0.5).w1, 0.0, atol=1e-15)

    @pytest.mark.parametrize("kappa,lam", [(0.5, 0.5), (4.0, 0.0)])
    def test_preconditions(self, kappa, lam):
        with pytest.raises(ValueError):
            optimal_teacher_weight(MODEL, kappa, lam)


class TestSmallLambda:
    def test_zero_teacher(self):
        c = small_lambda_condition(MODEL, TeacherWeights(np.zeros(SPEC.p)))
        assert c.lhs == pytest.approx(-MODEL.noise_var)
        assert c.beneficial

    def test_sweep_endpoint_beneficial(self):
        m = derive_population_model(CorrelationSpec(0.7, 0.9, 0.4, 100))
        assert small_lambda_condition(m, fit_teacher_population(m)).beneficial

    @pytest.mark.parametrize("s12", [0.0, 0.2, 0.4, 0.6, 0.7])
    def test_sign_matches_finite_difference(self, s12):
        m = derive_population_model(CorrelationSpec(s12, 0.9, 0.4, 20))
        t = fit_teacher_population(m)
        h, kappa = FD_STEP, 10.0
        # risk is defined only for lam >= 0, so centre the difference at h
        fd = (risk(m, t, 2 * h, kappa) - risk(m, t, 0.0, kappa)) / (2 * h)
        lhs = small_lambda_condition(m, t).lhs
        assert np.sign(lhs) == np.sign(fd)
        assert small_lambda_slope(m, t, kappa) == pytest.approx(fd, rel=1e-3)


class TestCorrelationsAndMi:
    def test_bounds(self):
        c = cch_correlations(MODEL, TEACHER)
        for r in (c.rho_t_s, c.rho_t_y, c.rho_s_y):
            assert -1 <= r <= 1

    def test_student_label_display(self):
        c = cch_correlations(MODEL, TEACHER)
        w = MODEL.w_star
        assert c.rho_s_y == pytest.approx(math.sqrt(w @ MODEL.Sigma22 @ w / MODEL.Sigma33), rel=1e-12)

    def test_monte_carlo_correlations(self):
        spec = CorrelationSpec(0.5, 0.9, 0.4, 5)
        m = derive_population_model(spec)
        t = fit_teacher_population(m)
        ds = sample_dataset(spec, 100_000, 23)
        h1, h2 = ds.x1 @ t.w1, ds.x2 @ m.w_star
        c = cch_correlations(m, t)
        assert np.corrcoef(h1, h2)[0, 1] == pytest.approx(c.rho_t_s, abs=0.01)
        assert np.corrcoef(h1, ds.y)[0, 1] == pytest.approx(c.rho_t_y, abs=0.01)
        assert np.corrcoef(h2, ds.y)[0, 1] == pytest.approx(c.rho_s_y, abs=0.01)

    def test_gap_zero_when_correlations_equal(self):
        # choose w1 so that w1'x1 is exactly y: rho_t_s = rho_s_y
        p = 2
        s22 = np.eye(p)
        s23 = np.array([0.3, 0.4])
        s12 = np.outer([1.0, 0.0], s23)
        m = PopulationModel(np.eye(p), s12, np.array([1.0, 0.0]), s22, s23, 1.0)
        g = cch_mi_gap(m, TeacherWeights(np.array([1.0, 0.0])))
        assert g.gap == pytest.approx(0.0, abs=1e-14)
        assert g.i_ts == pytest.approx(-0.5 * math.log(1 - 0.25))

    @given(st.floats(0.01, 100.0))
    @settings(max_examples=50, deadline=None)
    def test_scale_invariance(self, c):
        base = cch_mi_gap(MODEL, TEACHER)
        scaled = cch_mi_gap(MODEL, TeacherWeights(c * TEACHER.w1))
        assert abs(scaled.i_ts - base.i_ts) < 1e-12
        assert abs(scaled.i_sy - base.i_sy) < 1e-12

    def test_zero_variance_errors(self):
        with pytest.raises(InconsistentModelError):
            cch_correlations(MODEL, TeacherWeights(np.zeros(SPEC.p)))
        assert cch_verdict(MODEL, TeacherWeights(np.zeros(SPEC.p))) == "indeterminate"

    def test_verdict_tracks_gap(self):
        assert cch_verdict(MODEL, TEACHER) == ("beneficial" if cch_mi_gap(MODEL, TEACHER).gap > 0 else "not_beneficial")
        m0 = derive_population_model(CorrelationSpec(0.0, 0.9, 0.4, 100))
        assert cch_verdict(m0, fit_teacher_population(m0)) == "not_beneficial"


class TestCchGrid:
    def test_grid_has_no_violations(self):
        grid = cch_grid()
        assert len(grid) == 20
        assert cch_violations(grid) == []
        assert any(pt.gap > 0 for pt in grid) and any(pt.gap <= 0 for pt in grid)
        for pt in grid:
            assert pt.teacher.admissible

    def test_grid_is_reproducible(self):
        a, b = cch_grid(5), cch_grid(5)
        for x, y in zip(a, b):
            assert x.spec == y.spec
            assert np.array_equal(x.teacher.w1, y.teacher.w1)


class TestTau:
    @pytest.mark.parametrize("kappa", [0.1, 0.25, 0.5, 0.9])
    def test_isotropic(self, kappa):
        assert abs(solve_tau(np.eye(40), kappa) - (1 - kappa) / kappa) < 1e-10

    def test_near_one(self):
        assert 0 < solve_tau(np.eye(10), 0.9999) < 1e-3

    @given(st.integers(0, 10_000), st.floats(0.05, 0.95))
    @settings(max_examples=40, deadline=None)
    def test_residual(self, seed, kappa):
        m = random_model(5, seed)
        tau = solve_tau(m.Sigma22, kappa)
        eigs = np.linalg.eigvalsh(m.Sigma22)
        assert tau > 0
        assert abs(np.mean(eigs / (eigs + tau)) - kappa) < 1e-12

    def test_bracket_independence(self):
        s22 = random_model(6, 3).Sigma22
        roots = [solve_tau(s22, 0.3, b) for b in ((0.0, 100.0), (1e-6, 1e3), (1e-3, 1e5))]
        assert max(roots) - min(roots) < 1e-12

    def test_bad_bracket(self):
        with pytest.raises(ValueError):
            solve_tau(np.eye(3), 0.5, (2.0, 3.0))

    @pytest.mark.parametrize("kappa", [0.0, 1.0, 1.5])
    def test_bad_kappa(self, kappa):
        with pytest.raises(ValueError):
            solve_tau(np.eye(3), kappa)


class TestOverRisk:
    def test_isotropic_ridgeless_closed_form(self):
        # Known isotropic min-norm limit: |w*|^2 (1 - kappa) + sigma^2 kappa / (1 - kappa).
        p = 50
        beta = np.full(p, 0.1)
        s33 = 1.0
        m = PopulationModel(np.eye(p), np.zeros((p, p)), np.zeros(p), np.eye(p), beta, s33)
        for kappa in (0.2, 0.5, 0.8):
            b = asymptotic_risk_over(AsymptoticContext(m, kappa, TeacherWeights(np.zeros(p)), 0.0))
            expected = (beta @ beta) * (1 - kappa) + m.noise_var * kappa / (1 - kappa)
            assert b.total == pytest.approx(expected, rel=1e-10)
            assert b.tau == pytest.approx((1 - kappa) / kappa)
            assert 0 < b.omega < 1

    @pytest.mark.parametrize("s12", [0.0, 0.3, 0.6])
    @pytest.mark.parametrize("kappa", [0.2, 0.5, 0.9])
    def test_omega_in_unit_interval(self, s12, kappa):
        m = derive_population_model(CorrelationSpec(s12, 0.9, 0.4, 40))
        b = asymptotic_risk_over(AsymptoticContext(m, kappa, fit_teacher_population(m), 0.3))
        assert 0 < b.omega < 1 and b.tau > 0 and b.regime is RiskRegime.OVER

    def test_lambda_zero_ignores_teacher(self):
        m = derive_population_model(CorrelationSpec(0.6, 0.9, 0.4, 40))
        a = asymptotic_risk_over(AsymptoticContext(m, 0.5, TeacherWeights(np.zeros(40)), 0.0)).total
        b = asymptotic_risk_over(AsymptoticContext(m, 0.5, fit_teacher_population(m), 0.0)).total
        assert a == pytest.approx(b, rel=1e-12)

    def test_exists_better_teacher(self):
        spec = CorrelationSpec(0.6, 0.9, 0.4, 100)
        m = derive_population_model(spec)
        kappa, lam = 0.5, 0.3
        base = risk(m, TeacherWeights(np.zeros(spec.p)), lam, kappa)
        rng = np.random.default_rng(0)
        pop = fit_teacher_population(m).w1
        best = min(risk(m, TeacherWeights(rng.uniform(0, 2) * pop + rng.normal(scale=0.05, size=spec.p)),
                        lam, kappa) for _ in range(1000))
        assert best < base

    @given(st.integers(0, 2000), st.floats(0.0, 3.0))
    @settings(max_examples=30, deadline=None)
    def test_nonnegative_generic(self, seed, lam):
        m = random_model(6, seed)
        t = TeacherWeights(np.random.default_rng(seed).normal(size=6) * 0.3)
        b = asymptotic_risk_over(AsymptoticContext(m, 0.5, t, lam))
        assume(np.isfinite(b.total))
        assert b.total >= -1e-10 and b.variance_term >= 0

    def test_rejects_under_regime(self):
        with pytest.raises(ValueError):
            asymptotic_risk_over(AsymptoticContext(MODEL, 2.0, TEACHER, 0.5))

    @pytest.mark.slow
    def test_monte_carlo_with_teacher(self):
        spec = CorrelationSpec(0.6, 0.9, 0.4, 400)
        m = derive_population_model(spec)
        agr = mc_minnorm_agreement(spec, 200, range(20), lam=0.3, teacher=fit_teacher_population(m))
        assert agr.passed, agr
