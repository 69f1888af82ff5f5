"""Noiseless kriging and two-fidelity cokriging with Matern-3/2 covariance."""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import linalg, optimize
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import (ConditioningError, InsufficientDataError,
                         NestednessError)

SQRT3 = np.sqrt(3.0)
DUPLICATE_TOL = 1e-12


class Fidelity(str, Enum):
    HIGH = "High"
    LOW = "Low"


def _has_duplicates(points, tol=DUPLICATE_TOL):
    tree = cKDTree(points)
    return len(tree.query_pairs(tol, p=np.inf)) > 0


@dataclass(frozen=True)
class FidelityDataset:
    """Observations of one fidelity level."""

    points: np.ndarray
    values: np.ndarray
    fidelity: Fidelity = Fidelity.HIGH

    def __post_init__(self):
        X, y = check_X_y(self.points, self.values, y_numeric=True, ensure_min_samples=1)
        if _has_duplicates(X):
            raise ValueError("dataset contains duplicate points")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "points", X)
        object.__setattr__(self, "values", y)
        object.__setattr__(self, "fidelity", Fidelity(self.fidelity))

    @property
    def n(self):
        return len(self.values)

    @property
    def d(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class MaternParams:
    theta: tuple
    variance: float = 1.0
    nugget: float = 0.0

    def __post_init__(self):
        theta = tuple(float(t) for t in np.atleast_1d(self.theta))
        if not all(t > 0 and np.isfinite(t) for t in theta):
            raise ValueError("theta must be positive")
        if not self.variance > 0:
            raise ValueError("variance must be positive")
        if not self.nugget >= 0:
            raise ValueError("nugget must be nonnegative")
        object.__setattr__(self, "theta", theta)


def _sq_diffs(A, B):
    return (A[:, None, :] - B[None, :, :]) ** 2


def correlation(A, B, theta, kernel="matern32"):
    """Correlation matrix between the rows of ``A`` and ``B``.

    ``kernel`` is ``"matern32"`` for ``(1 + sqrt(3) r) exp(-sqrt(3) r)`` or
    ``"exponential"`` for ``exp(-r)``, with ``r = sqrt(sum theta_i (a_i - b_i)^2)``.
    """
    r = np.sqrt(_sq_diffs(A, B) @ np.asarray(theta, dtype=float))
    if kernel == "matern32":
        s = SQRT3 * r
        return (1.0 + s) * np.exp(-s)
    if kernel == "exponential":
        return np.exp(-r)
    raise ValueError(f"unknown kernel {kernel!r}")


def matern32(x, y, params):
    """Matern-3/2 covariance between two points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.shape != (len(params.theta),):
        raise ValueError("dimension mismatch")
    return float(params.variance * correlation(x[None], y[None], params.theta)[0, 0])


def _factor(C, nugget, max_nugget):
    """Cholesky factor of ``C + nugget I``, escalating the nugget tenfold on failure."""
    n = len(C)
    while True:
        try:
            L = linalg.cholesky(C + nugget * np.eye(n), lower=True)
            return L, nugget
        except linalg.LinAlgError:
            if nugget >= max_nugget:
                raise ConditioningError(
                    f"Gram matrix not positive definite with nugget {nugget:.1e}")
            nugget = min(nugget * 10.0, max_nugget) if nugget > 0 else 1e-10


def _start_points(d, n_starts, bounds, seed):
    rng = np.random.default_rng(seed)
    lo, hi = np.log(bounds[0]), np.log(bounds[1])
    return rng.uniform(lo, hi, size=(n_starts, d))


class KrigingRegressor(RegressorMixin, BaseEstimator):
    """Noiseless Gaussian-process interpolation with a constant mean.

    Parameters
    ----------
    kernel : {"matern32", "exponential"}
    theta : array-like, optional
        Inverse squared length-scales. Used as the fixed value when
        ``optimize=False``; otherwise ignored.
    optimize : bool
        Maximize the concentrated likelihood over ``log theta``.
    n_starts : int
        Number of log-uniform starting points for the optimizer.
    theta_bounds : (float, float)
    nugget, max_nugget : float
        Initial diagonal jitter and the cap of its tenfold escalation.
    mean : float, optional
        Known process mean. ``None`` estimates it by generalized least squares.
    random_state : int
        Seed of the start-point generator.
    """

    def __init__(self, kernel="matern32", theta=None, optimize=True, n_starts=8,
                 theta_bounds=(1e-2, 1e3), nugget=1e-10, max_nugget=1e-4,
                 mean=None, random_state=0):
        self.kernel = kernel
        self.theta = theta
        self.optimize = optimize
        self.n_starts = n_starts
        self.theta_bounds = theta_bounds
        self.nugget = nugget
        self.max_nugget = max_nugget
        self.mean = mean
        self.random_state = random_state

    # concentrated negative log-likelihood and gradient in log theta
    def _nll(self, log_theta, X, y, D):
        theta = np.exp(log_theta)
        n = len(y)
        r = np.sqrt(D @ theta)
        if self.kernel == "matern32":
            e = np.exp(-SQRT3 * r)
            C = (1.0 + SQRT3 * r) * e
            dC_base = -1.5 * e
        else:
            C = np.exp(-r)
            with np.errstate(divide="ignore", invalid="ignore"):
                dC_base = np.where(r > 0, -0.5 * C / r, 0.0)
        try:
            L, _ = _factor(C, self.nugget, self.max_nugget)
        except ConditioningError:
            return 1e300, np.zeros_like(log_theta)
        ones = np.ones(n)
        Ci = linalg.cho_solve((L, True), np.eye(n))
        if self.mean is None:
            Ci1 = Ci @ ones
            beta = Ci1 @ y / Ci1.sum()
        else:
            beta = float(self.mean)
        resid = y - beta
        alpha = Ci @ resid
        sigma2 = max(resid @ alpha / n, 1e-300)
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        nll = 0.5 * n * np.log(sigma2) + 0.5 * logdet
        W = np.outer(alpha, alpha) / sigma2 - Ci
        grad = np.empty(len(theta))
        for i in range(len(theta)):
            dC = dC_base * D[:, :, i] * theta[i]
            grad[i] = -0.5 * np.sum(W * dC)
        return nll, grad

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        n, d = X.shape
        if n < 2:
            raise InsufficientDataError("at least two points are required")
        if self.kernel not in ("matern32", "exponential"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        self.X_train_ = X
        self.y_train_ = y
        self.n_features_in_ = d
        lo, hi = self.theta_bounds

        if self.theta is not None:
            theta0 = np.broadcast_to(np.asarray(self.theta, dtype=float), (d,)).copy()
        else:
            theta0 = np.full(d, np.sqrt(lo * hi))

        if np.ptp(y) == 0 and self.mean is None:
            # constant data: the predictor is the constant itself
            self.theta_ = theta0
            self.nugget_ = self.nugget
            self.mean_ = float(y[0])
            self.sigma2_ = 0.0
            self.alpha_ = np.zeros(n)
            self.L_ = None
            self.constant_ = True
            return self
        self.constant_ = False

        if self.optimize:
            D = _sq_diffs(X, X)
            bounds = [(np.log(lo), np.log(hi))] * d
            best = None
            for start in _start_points(d, self.n_starts, self.theta_bounds, self.random_state):
                res = optimize.minimize(self._nll, start, args=(X, y, D), jac=True,
                                        method="L-BFGS-B", bounds=bounds)
                if best is None or res.fun < best.fun:
                    best = res
            theta = np.exp(best.x)
            self.log_likelihood_ = -float(best.fun)
        else:
            if self.theta is None:
                raise ValueError("theta is required when optimize=False")
            theta = theta0
        self._finalize(theta)
        return self

    def _finalize(self, theta):
        X, y = self.X_train_, self.y_train_
        n = len(y)
        C = correlation(X, X, theta, self.kernel)
        L, nugget = _factor(C, self.nugget, self.max_nugget)
        ones = np.ones(n)
        if self.mean is None:
            Ci1 = linalg.cho_solve((L, True), ones)
            self.mean_ = float(Ci1 @ y / Ci1.sum())
            self.Ci1_ = Ci1
        else:
            self.mean_ = float(self.mean)
            self.Ci1_ = None
        resid = y - self.mean_
        A = C + nugget * np.eye(n)
        alpha = linalg.cho_solve((L, True), resid)
        alpha += linalg.cho_solve((L, True), resid - A @ alpha)  # one refinement step
        self.alpha_ = alpha
        self.sigma2_ = float((y - self.mean_) @ self.alpha_ / n)
        self.theta_ = theta
        self.nugget_ = nugget
        self.L_ = L

    @property
    def params_(self):
        check_is_fitted(self, "theta_")
        return MaternParams(tuple(self.theta_), max(self.sigma2_, 1e-300), self.nugget_)

    def predict(self, X, return_std=False):
        check_is_fitted(self, "theta_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        if self.constant_:
            mu = np.full(len(X), self.mean_)
            return (mu, np.zeros(len(X))) if return_std else mu
        k = correlation(X, self.X_train_, self.theta_, self.kernel)
        # the nugget belongs to the kernel at zero distance, keeping interpolation exact
        k[_coincident(X, self.X_train_)] += self.nugget_
        mu = self.mean_ + k @ self.alpha_
        if not return_std:
            return mu
        v = linalg.solve_triangular(self.L_, k.T, lower=True)
        var = 1.0 - np.sum(v * v, axis=0)
        if self.Ci1_ is not None:
            # extra variance from estimating the mean
            u = 1.0 - k @ self.Ci1_
            var = var + u * u / self.Ci1_.sum()
        return mu, np.sqrt(np.clip(self.sigma2_ * var, 0.0, None))


def _coincident(A, B, tol=DUPLICATE_TOL):
    return np.max(np.abs(A[:, None, :] - B[None, :, :]), axis=2) <= tol


def _check_nested(X_high, X_low, tol=DUPLICATE_TOL):
    dist, _ = cKDTree(X_low).query(X_high, p=np.inf)
    if np.any(dist > tol):
        raise NestednessError(
            f"{int(np.sum(dist > tol))} high-fidelity points are not in the low-fidelity design")


class CoKrigingRegressor(RegressorMixin, BaseEstimator):
    """Two-fidelity model ``u = rho f + g`` with independent GPs ``f`` and ``g``.

    ``f`` is fit on the low-fidelity sample. ``rho`` is either given or
    estimated as the least-squares slope of the high-fidelity values on the
    low-fidelity predictions at the high-fidelity points, which requires a
    nested design unless ``require_nested=False``. ``g`` is fit on the
    residuals.
    """

    def __init__(self, rho=None, kernel="matern32", optimize=True, n_starts=8,
                 theta_low=None, theta_delta=None, theta_bounds=(1e-2, 1e3),
                 nugget=1e-10, max_nugget=1e-4, mean_low=None, mean_delta=None,
                 require_nested=True, random_state=0):
        self.rho = rho
        self.kernel = kernel
        self.optimize = optimize
        self.n_starts = n_starts
        self.theta_low = theta_low
        self.theta_delta = theta_delta
        self.theta_bounds = theta_bounds
        self.nugget = nugget
        self.max_nugget = max_nugget
        self.mean_low = mean_low
        self.mean_delta = mean_delta
        self.require_nested = require_nested
        self.random_state = random_state

    def _gp(self, theta, mean):
        return KrigingRegressor(kernel=self.kernel, theta=theta, optimize=self.optimize,
                                n_starts=self.n_starts, theta_bounds=self.theta_bounds,
                                nugget=self.nugget, max_nugget=self.max_nugget,
                                mean=mean, random_state=self.random_state)

    def fit(self, X_low, y_low, X_high, y_high):
        X_low, y_low = check_X_y(X_low, y_low, y_numeric=True)
        X_high, y_high = check_X_y(X_high, y_high, y_numeric=True)
        if X_low.shape[1] != X_high.shape[1]:
            raise ValueError("low and high designs differ in dimension")
        if len(y_high) < 2:
            raise InsufficientDataError("at least two high-fidelity points are required")
        if self.rho is None and self.require_nested:
            _check_nested(X_high, X_low)
        self.low_model_ = self._gp(self.theta_low, self.mean_low).fit(X_low, y_low)
        low_at_high = self.low_model_.predict(X_high)
        if self.rho is None:
            dx = low_at_high - low_at_high.mean()
            denom = dx @ dx
            self.rho_ = float(dx @ (y_high - y_high.mean()) / denom) if denom > 0 else 0.0
        else:
            self.rho_ = float(self.rho)
        resid = y_high - self.rho_ * low_at_high
        self.delta_model_ = self._gp(self.theta_delta, self.mean_delta).fit(X_high, resid)
        self.n_features_in_ = X_low.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "rho_")
        return self.rho_ * self.low_model_.predict(X) + self.delta_model_.predict(X)


def fit_gp(data, **opts):
    """Fit a :class:`KrigingRegressor` to a :class:`FidelityDataset`."""
    if data.n < 2:
        raise InsufficientDataError("at least two points are required")
    return KrigingRegressor(**opts).fit(data.points, data.values)


def predict(model, query):
    return model.predict(np.atleast_2d(np.asarray(query, dtype=float)))


def fit_cokriging(low, high, rho=None, **opts):
    """Fit a :class:`CoKrigingRegressor` to a pair of datasets."""
    return CoKrigingRegressor(rho=rho, **opts).fit(low.points, low.values,
                                                   high.points, high.values)


def rrms(pred, truth):
    """Root of squared prediction error relative to the spread of ``truth``."""
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape:
        raise ValueError("pred and truth differ in length")
    if len(truth) < 2:
        raise InsufficientDataError("rrms needs at least two points")
    spread = np.sum((truth - truth.mean()) ** 2)
    if spread == 0:
        raise ZeroDivisionError("truth is constant")
    return float(np.sqrt(np.sum((pred - truth) ** 2) / spread))
