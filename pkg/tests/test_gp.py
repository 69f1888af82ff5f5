"""Kriging, cokriging and RRMS."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st
from scipy import optimize
from sklearn.base import clone

from fidelity_planner import (CoKrigingRegressor, Fidelity, FidelityDataset, KrigingRegressor,
                              MaternParams, fit_cokriging, fit_gp, matern32, predict, rrms)
from fidelity_planner.exceptions import (ConditioningError, InsufficientDataError,
                                         NestednessError)
from fidelity_planner.gp import _sq_diffs, correlation
from fidelity_planner.harness import sample_gp_realization


def design(n, d, seed):
    return np.random.default_rng(seed).uniform(size=(n, d))


class TestKernel:
    def test_examples(self):
        p = MaternParams((1.0,), 2.5)
        assert matern32([0.3], [0.3], p) == 2.5
        x = 1 / math.sqrt(3)
        assert matern32([0.0], [x], MaternParams((1.0,))) == pytest.approx(2 * math.exp(-1))

    def test_anisotropic_distance(self):
        x, y = np.array([0.1, 0.7]), np.array([0.4, 0.2])
        th = (2.0, 5.0)
        r = math.sqrt(2.0 * 0.3 ** 2 + 5.0 * 0.5 ** 2)
        want = (1 + math.sqrt(3) * r) * math.exp(-math.sqrt(3) * r)
        assert matern32(x, y, MaternParams(th)) == pytest.approx(want, rel=1e-14)
        # doubling theta scales the distance by sqrt 2
        r2 = math.sqrt(2) * r
        want2 = (1 + math.sqrt(3) * r2) * math.exp(-math.sqrt(3) * r2)
        assert matern32(x, y, MaternParams((4.0, 10.0))) == pytest.approx(want2, rel=1e-14)

    @given(st.lists(st.floats(-3, 3), min_size=2, max_size=2),
           st.lists(st.floats(-3, 3), min_size=2, max_size=2),
           st.floats(0.01, 100), st.floats(0.1, 10))
    def test_bounds_and_symmetry(self, x, y, th, var):
        p = MaternParams((th, th), var)
        v = matern32(x, y, p)
        assert 0 < v <= var * (1 + 1e-15) or (v == 0 and np.linalg.norm(np.subtract(x, y)) > 1)
        assert v == matern32(y, x, p)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            MaternParams((0.0,))
        with pytest.raises(ValueError):
            MaternParams((1.0,), 0.0)
        with pytest.raises(ValueError):
            MaternParams((1.0,), 1.0, -1e-3)
        with pytest.raises(ValueError):
            matern32([0.0, 1.0], [0.0], MaternParams((1.0,)))


class TestDataset:
    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            FidelityDataset([[0.0], [1e-13]], [1.0, 2.0])
        FidelityDataset([[0.0], [1e-11]], [1.0, 2.0])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            FidelityDataset([[0.0], [1.0]], [1.0, np.nan])

    def test_frozen_arrays(self):
        data = FidelityDataset([[0.0], [1.0]], [1.0, 2.0], "Low")
        assert data.fidelity is Fidelity.LOW
        with pytest.raises(ValueError):
            data.values[0] = 3.0


def dense_predictor(X, y, theta, x):
    """Kriging mean by an explicit solve of the bordered (universal) system."""
    n = len(y)
    C = correlation(X, X, theta)
    k = correlation(x, X, theta)[0]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = C
    M[:n, n] = M[n, :n] = 1.0
    lam = np.linalg.solve(M, np.append(k, 1.0))[:n]
    return lam @ y


class TestKriging:
    def test_exact_five_points(self):
        X = design(5, 2, 1)
        y = np.sin(3 * X[:, 0]) + X[:, 1]
        m = fit_gp(FidelityDataset(X, y))
        np.testing.assert_allclose(predict(m, X), y, atol=1e-8)

    @given(st.integers(2, 25), st.integers(1, 3), st.integers(0, 10 ** 6))
    @settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    def test_exactness_property(self, n, d, seed):
        X = design(n, d, seed)
        y = np.random.default_rng(seed + 1).normal(size=n) * 10 ** np.random.default_rng(seed).uniform(-3, 3)
        m = KrigingRegressor(n_starts=3, random_state=seed).fit(X, y)
        assert m.nugget_ <= 1e-8
        np.testing.assert_allclose(m.predict(X), y, atol=1e-8 * max(1.0, np.abs(y).max()))

    def test_dense_solve_oracle(self):
        X = design(12, 2, 3)
        y = np.cos(4 * X[:, 0]) * X[:, 1]
        m = KrigingRegressor().fit(X, y)
        x = np.array([[0.5, 0.5]])
        assert m.predict(x)[0] == pytest.approx(dense_predictor(X, y, m.theta_, x), abs=1e-9)

    def test_far_query_returns_mean(self):
        X = design(10, 1, 4)
        m = KrigingRegressor(theta=[50.0], optimize=False).fit(X, np.sin(6 * X[:, 0]))
        assert m.predict([[100.0]])[0] == pytest.approx(m.mean_, abs=1e-6)

    def test_linear_in_values(self):
        X = design(8, 1, 5)
        y1, y2 = np.sin(5 * X[:, 0]), X[:, 0] ** 2
        q = np.linspace(0, 1, 7)[:, None]
        fit = lambda y: KrigingRegressor(theta=[20.0], optimize=False).fit(X, y).predict(q)
        np.testing.assert_allclose(fit(2 * y1 - 3 * y2), 2 * fit(y1) - 3 * fit(y2), atol=1e-10)

    def test_known_mean(self):
        X = design(6, 1, 6)
        y = np.sin(4 * X[:, 0])
        m = KrigingRegressor(theta=[1e3], optimize=False, mean=0.25).fit(X, y)
        assert m.predict([[50.0]])[0] == pytest.approx(0.25, abs=1e-12)

    def test_constant_values(self):
        X = design(6, 2, 7)
        m = KrigingRegressor().fit(X, np.full(6, 3.0))
        np.testing.assert_allclose(m.predict(design(4, 2, 8)), 3.0)
        assert m.params_.variance <= 1e-250

    def test_gradient(self):
        X = design(15, 2, 9)
        y = np.sin(3 * X[:, 0]) + np.cos(2 * X[:, 1])
        m = KrigingRegressor()
        D = _sq_diffs(X, X)
        for lt in ([0.5, 1.5], [2.0, -1.0]):
            err = optimize.check_grad(lambda v: m._nll(v, X, y, D)[0],
                                      lambda v: m._nll(v, X, y, D)[1], np.array(lt))
            assert err < 1e-4

    def test_recovers_theta(self):
        # 50 points over about 30 correlation lengths; on [0, 1] the same
        # sample size sees only three and the estimate is far noisier
        x = np.linspace(0, 10, 50)[:, None]
        p = MaternParams((10.0,))
        hits = 0
        for seed in range(40):
            y = sample_gp_realization(x, p, seed)
            theta = KrigingRegressor(random_state=seed).fit(x, y).theta_[0]
            hits += 5.0 <= theta <= 20.0
        assert hits >= 32

    def test_predict_std(self):
        X = design(10, 1, 10)
        m = KrigingRegressor().fit(X, np.sin(5 * X[:, 0]))
        _, sd = m.predict(X, return_std=True)
        assert np.all(sd < 1e-4)
        _, sd_far = m.predict([[0.5 + 1e-3], [5.0]], return_std=True)
        assert sd_far[1] > sd_far[0]

    def test_errors(self):
        with pytest.raises(InsufficientDataError):
            KrigingRegressor().fit([[0.0]], [1.0])
        with pytest.raises(ValueError):
            KrigingRegressor(kernel="rbf").fit([[0.0], [1.0]], [1.0, 2.0])
        with pytest.raises(ValueError):
            KrigingRegressor(optimize=False).fit([[0.0], [1.0]], [1.0, 2.0])
        with pytest.raises(ConditioningError):
            KrigingRegressor(theta=[1.0], optimize=False, nugget=0.0, max_nugget=0.0).fit(
                [[0.0], [1e-11], [0.5]], [1.0, 2.0, 0.0])
        m = KrigingRegressor().fit([[0.0], [1.0]], [1.0, 2.0])
        with pytest.raises(ValueError):
            m.predict([[0.0, 1.0]])

    def test_nugget_escalation(self):
        # two points 1e-11 apart make the Gram matrix singular in double precision
        X = np.array([[0.0], [1e-11], [0.5]])
        m = KrigingRegressor(theta=[1.0], optimize=False, nugget=0.0).fit(X, [1.0, 1.0, 0.0])
        assert 0.0 < m.nugget_ <= 1e-4
        np.testing.assert_allclose(m.predict(X), [1.0, 1.0, 0.0], atol=1e-8)

    def test_sklearn_api(self):
        m = clone(KrigingRegressor(n_starts=2, kernel="exponential"))
        assert m.get_params()["n_starts"] == 2
        X = design(10, 1, 11)
        y = np.sin(5 * X[:, 0])
        assert m.fit(X, y).score(X, y) == pytest.approx(1.0)


def vf_data(seed, n_low=40, n_high=10, rho=2.0):
    rng = np.random.default_rng(seed)
    Xl = rng.uniform(size=(n_low, 1))
    Xh = Xl[np.sort(rng.choice(n_low, n_high, replace=False))]
    test = np.linspace(0, 1, 101)[:, None]
    pts = np.vstack([Xl, test])
    f = sample_gp_realization(pts, MaternParams((10.0,)), rng)
    g_pts = np.vstack([Xh, test])
    g = sample_gp_realization(g_pts, MaternParams((10.0,), 0.5), rng)
    f_low, f_test = f[:n_low], f[n_low:]
    idx = [int(np.flatnonzero(np.all(Xl == x, axis=1))[0]) for x in Xh]
    u_high = rho * f_low[idx] + g[:n_high]
    u_test = rho * f_test + g[n_high:]
    return Xl, f_low, Xh, u_high, test, u_test


class TestCoKriging:
    @given(st.integers(0, 10 ** 6), st.integers(3, 20), st.floats(0.1, 0.9))
    @settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    def test_exactness_property(self, seed, n_low, frac):
        Xl, yl, Xh, yh, _, _ = vf_data(seed, n_low, max(2, int(frac * n_low)))
        m = CoKrigingRegressor(n_starts=3).fit(Xl, yl, Xh, yh)
        np.testing.assert_allclose(m.predict(Xh), yh, atol=1e-8 * max(1.0, np.abs(yh).max()))

    def test_structure(self):
        Xl, yl, Xh, yh, test, _ = vf_data(1)
        m = CoKrigingRegressor().fit(Xl, yl, Xh, yh)
        np.testing.assert_allclose(
            m.predict(test), m.rho_ * m.low_model_.predict(test) + m.delta_model_.predict(test),
            rtol=0, atol=1e-14)

    def test_exact_linear_relation(self):
        X = design(20, 1, 2)
        y = np.sin(6 * X[:, 0])
        low = FidelityDataset(X, y, Fidelity.LOW)
        high = FidelityDataset(X[::3], 1.7 * y[::3])
        m = fit_cokriging(low, high)
        assert m.rho_ == pytest.approx(1.7, abs=1e-8)
        assert np.max(np.abs(m.delta_model_.predict(X))) < 1e-8

    def test_supplied_rho_is_kept(self):
        Xl, yl, Xh, yh, _, _ = vf_data(3)
        assert CoKrigingRegressor(rho=1.234).fit(Xl, yl, Xh, yh).rho_ == 1.234

    def test_rho_zero_is_single_fidelity(self):
        Xl, yl, Xh, yh, test, _ = vf_data(4)
        m = CoKrigingRegressor(rho=0.0).fit(Xl, yl, Xh, yh)
        single = KrigingRegressor().fit(Xh, yh)
        np.testing.assert_allclose(m.predict(test), single.predict(test), atol=1e-12)

    def test_nestedness_required(self):
        Xl = design(10, 1, 5)
        Xh = design(3, 1, 6)
        with pytest.raises(NestednessError):
            CoKrigingRegressor().fit(Xl, np.sin(Xl[:, 0]), Xh, np.cos(Xh[:, 0]))
        CoKrigingRegressor(require_nested=False).fit(Xl, np.sin(Xl[:, 0]), Xh, np.cos(Xh[:, 0]))
        CoKrigingRegressor(rho=1.0).fit(Xl, np.sin(Xl[:, 0]), Xh, np.cos(Xh[:, 0]))

    def test_too_few_high(self):
        with pytest.raises(InsufficientDataError):
            CoKrigingRegressor().fit([[0.0], [1.0]], [0.0, 1.0], [[0.0]], [0.0])

    def test_beats_high_only(self):
        wins = 0
        for seed in range(50):
            Xl, yl, Xh, yh, test, truth = vf_data(1000 + seed)
            co = CoKrigingRegressor(n_starts=4).fit(Xl, yl, Xh, yh).predict(test)
            hi = KrigingRegressor(n_starts=4).fit(Xh, yh).predict(test)
            wins += rrms(co, truth) <= rrms(hi, truth)
        assert wins >= 35


class TestRRMS:
    def test_examples(self):
        t = np.array([0.0, 1.0, 2.0])
        assert rrms(t, t) == 0.0
        assert rrms(np.full(3, t.mean()), t) == pytest.approx(1.0)
        assert rrms(t + 0.1, t) == pytest.approx(math.sqrt(3 * 0.01 / 2))

    @given(st.lists(st.floats(-100, 100), min_size=3, max_size=20), st.floats(0.1, 100),
           st.floats(-100, 100), st.integers(0, 1000))
    def test_affine_invariance(self, t, a, b, seed):
        t = np.asarray(t)
        if np.ptp(t) < 1e-3:
            return
        p = t + np.random.default_rng(seed).normal(size=len(t))
        for s in (a, -a):
            assert rrms(s * p + b, s * t + b) == pytest.approx(rrms(p, t), rel=1e-9)

    def test_errors(self):
        with pytest.raises(ZeroDivisionError):
            rrms([1.0, 2.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            rrms([1.0, 2.0], [1.0, 2.0, 3.0])
        with pytest.raises(InsufficientDataError):
            rrms([1.0], [1.0])
