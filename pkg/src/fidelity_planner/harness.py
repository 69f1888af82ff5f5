"""Synthetic two-fidelity data, nested designs and the RRMS experiments."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import math
import os

import numpy as np
from scipy.spatial import cKDTree
from sklearn.model_selection import KFold

from .allocation import Baseline, BudgetSpec, baseline_plan, plan
from .exceptions import InsufficientDataError
from .gp import (DUPLICATE_TOL, CoKrigingRegressor, Fidelity, FidelityDataset,
                 KrigingRegressor, MaternParams, _factor, correlation, rrms)

THREADS_ENV = "FIDELITY_PLANNER_THREADS"
_EPS_FLOOR = 1e-9  # guards floor() against products like 0.7 * 300 = 209.999...


def _floor(x):
    return int(math.floor(x + _EPS_FLOOR))


def _rng(*keys):
    return np.random.default_rng([int(k) for k in keys])


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator of ``u = rho f + g`` with independent Matern-3/2 processes on [0, 1]^d."""

    d: int
    theta_f: tuple
    theta_g: tuple
    rho: float
    seed: int = 0
    V_f: float = 1.0
    V_g: float = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be positive")
        for name in ("theta_f", "theta_g"):
            t = tuple(float(v) for v in np.broadcast_to(getattr(self, name), (self.d,)))
            if not all(v > 0 for v in t):
                raise ValueError(f"{name} must be positive")
            object.__setattr__(self, name, t)
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def params_f(self):
        return MaternParams(self.theta_f, self.V_f)

    @property
    def params_g(self):
        return MaternParams(self.theta_g, self.V_g)

    @property
    def correlation(self):
        """Correlation between ``u`` and ``f``."""
        if self.rho == 0:
            return 0.0
        return 1.0 / math.sqrt(1.0 + self.V_g / (self.V_f * self.rho ** 2))

    @classmethod
    def from_correlation(cls, d, r, theta_f, theta_g, seed=0, V_f=1.0, V_g=1.0):
        rho = math.sqrt(V_g / V_f * r * r / (1 - r * r))
        return cls(d, theta_f, theta_g, rho, seed, V_f, V_g)


@dataclass(frozen=True)
class ExperimentConfig:
    budget: float = 300.0
    cost_high: float = 5.0
    replications: int = 20
    share_grid: tuple = tuple(np.round(np.linspace(0, 1, 11), 10))
    test_size: int = 200
    folds: int = 5
    min_high: int = 5
    seed: int = 0
    threads: int = None

    def __post_init__(self):
        BudgetSpec(self.budget, self.cost_high)
        grid = tuple(float(b) for b in self.share_grid)
        if not grid:
            raise ValueError("share_grid is empty")
        if any(b < 0 or b > 1 for b in grid) or list(grid) != sorted(grid):
            raise ValueError("share_grid must be sorted within [0, 1]")
        if self.replications < 1 or self.test_size < 2 or self.folds < 2:
            raise ValueError("need replications >= 1, test_size >= 2, folds >= 2")
        object.__setattr__(self, "share_grid", grid)


@dataclass(frozen=True)
class RunResult:
    share: float
    method: str
    rrms_mean: float
    rrms_std: float
    n_high: int
    n_low: int
    replications: int
    flag: str = ""

    def as_row(self):
        return [self.share, self.method, self.n_high, self.n_low, self.rrms_mean,
                self.rrms_std, self.replications, self.flag]


def _thread_count(config):
    if config.threads is not None:
        return max(1, int(config.threads))
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _map(fn, items, threads):
    # results come back in input order regardless of scheduling
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def generate_nested_design(n_low, n_high, d, seed):
    """Uniform design of ``n_low`` points and a random ``n_high``-subset of it."""
    if n_high > n_low:
        raise ValueError("n_high must not exceed n_low")
    if n_high < 0 or d < 1:
        raise ValueError("sizes must be nonnegative and d positive")
    rng = _rng(seed)
    D_low = rng.uniform(size=(n_low, d))
    idx = np.sort(rng.choice(n_low, size=n_high, replace=False))
    return D_low, D_low[idx]


def sample_gp_realization(points, params, seed, nugget=1e-10, max_nugget=1e-4):
    """Draw a zero-mean Matern-3/2 process at ``points``."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    C = params.variance * correlation(X, X, params.theta)
    L, _ = _factor(C, nugget * params.variance, max_nugget * params.variance)
    rng = seed if isinstance(seed, np.random.Generator) else _rng(seed)
    return L @ rng.standard_normal(len(X))


def _union(*blocks):
    """Stack point blocks dropping rows already present; returns index maps."""
    rows, maps = [], []
    tree_pts = np.empty((0, blocks[0].shape[1]))
    for B in blocks:
        idx = np.empty(len(B), dtype=int)
        if len(tree_pts) and len(B):
            dist, near = cKDTree(tree_pts).query(B, p=np.inf)
        else:
            dist, near = np.full(len(B), np.inf), np.zeros(len(B), dtype=int)
        fresh = []
        for i in range(len(B)):
            if dist[i] <= DUPLICATE_TOL:
                idx[i] = near[i]
            else:
                idx[i] = len(tree_pts) + len(fresh)
                fresh.append(B[i])
        if fresh:
            tree_pts = np.vstack([tree_pts, np.array(fresh)])
        maps.append(idx)
        rows.append(B)
    return tree_pts, maps


def synth_variable_fidelity(spec, D_low, D_high, test_points):
    """Evaluate one realization of ``f`` and ``g`` on the designs and test points.

    ``f`` is drawn jointly over every distinct point and ``g`` over the
    high-fidelity design plus the test points, so ``u = rho f + g`` holds
    exactly wherever it is reported.
    """
    D_low, D_high, test_points = (np.atleast_2d(np.asarray(a, dtype=float)).reshape(-1, spec.d)
                                  for a in (D_low, D_high, test_points))
    pts, (i_low, i_high, i_test) = _union(D_low, D_high, test_points)
    f = sample_gp_realization(pts, spec.params_f, _rng(spec.seed, 0))
    g_pts, (j_high, j_test) = _union(D_high, test_points)
    g = sample_gp_realization(g_pts, spec.params_g, _rng(spec.seed, 1))
    u_high = spec.rho * f[i_high] + g[j_high]
    u_test = spec.rho * f[i_test] + g[j_test]
    low = FidelityDataset(D_low, f[i_low], Fidelity.LOW)
    high = FidelityDataset(D_high, u_high, Fidelity.HIGH)
    truth = FidelityDataset(test_points, u_test, Fidelity.HIGH)
    return low, high, truth


def share_sizes(share, config):
    n_low = _floor(share * config.budget)
    n_high = _floor((1 - share) * config.budget / config.cost_high)
    return n_high, n_low


def replication_data(spec, config, rep, n_pool):
    """Pool of ``n_pool`` design points and the test sample for one replication.

    Every share of a replication subsets the same pool and realization, so
    shares are compared under common random numbers. The first ``n`` pool
    points are a uniform random design for any ``n``, which makes the smaller
    design a subset of the larger one.
    """
    rng = _rng(config.seed, rep)
    pool = rng.uniform(size=(n_pool, spec.d))
    test = rng.uniform(size=(config.test_size, spec.d))
    rep_spec = replace(spec, seed=int(np.random.SeedSequence([config.seed, rep, spec.seed])
                                      .generate_state(1, np.uint64)[0]))
    return pool, test, rep_spec


def _fit_and_score(low, high, truth, rho_low_only, n_high, n_low, rho=None,
                   require_nested=True):
    if n_low < 2 and n_high < 2:
        raise InsufficientDataError("share leaves fewer than two points at both fidelities")
    if n_low < 2:
        model = KrigingRegressor().fit(high.points[:n_high], high.values[:n_high])
        pred = model.predict(truth.points)
    elif n_high < 2:
        model = KrigingRegressor().fit(low.points[:n_low], low.values[:n_low])
        pred = rho_low_only * model.predict(truth.points)
    else:
        model = CoKrigingRegressor(rho=rho, require_nested=require_nested).fit(
            low.points[:n_low], low.values[:n_low], high.points[:n_high], high.values[:n_high])
        pred = model.predict(truth.points)
    return rrms(pred, truth.values)


def run_share_sweep(spec, config, include_minminimax=True):
    """Mean test RRMS as a function of the low-fidelity budget share.

    The endpoints fit a single GP: high-only at share 0, and at share 1 a
    low-only GP scaled by the known ``rho``. When ``include_minminimax`` is set
    an extra row labelled ``MinMinimax`` uses :func:`allocation.plan`.
    """
    rows = [(b, "sweep") + share_sizes(b, config) for b in config.share_grid]
    if include_minminimax:
        r = spec.correlation
        p = plan(r, BudgetSpec(config.budget, config.cost_high), spec.d, config.min_high)
        rows.append((p.n_low / config.budget, Baseline.MIN_MINIMAX.value, p.n_high, p.n_low))
    n_pool = max(max(nh, nl) for _, _, nh, nl in rows)

    def one_rep(rep):
        pool, test, rep_spec = replication_data(spec, config, rep, n_pool)
        n_high_max = max(nh for _, _, nh, _ in rows)
        low, high, truth = synth_variable_fidelity(rep_spec, pool, pool[:n_high_max], test)
        out = []
        for _, _, nh, nl in rows:
            try:
                out.append(_fit_and_score(low, high, truth, spec.rho, nh, nl,
                                          require_nested=nl >= nh))
            except InsufficientDataError:
                out.append(np.nan)
        return out

    scores = np.array(_map(one_rep, range(config.replications), _thread_count(config)))
    results = []
    for k, (share, method, nh, nl) in enumerate(rows):
        col = scores[:, k]
        if np.all(np.isnan(col)):
            results.append(RunResult(share, method, math.nan, math.nan, nh, nl,
                                     config.replications, "infeasible"))
        else:
            results.append(RunResult(share, method, float(np.mean(col)), float(np.std(col)),
                                     nh, nl, config.replications))
    return results


@dataclass(frozen=True)
class Standardizer:
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float
    constant_columns: tuple = field(default=())

    def transform(self, data):
        return FidelityDataset((data.points - self.x_mean) / self.x_scale,
                               (data.values - self.y_mean) / self.y_scale, data.fidelity)

    def inverse(self, data):
        return FidelityDataset(data.points * self.x_scale + self.x_mean,
                               data.values * self.y_scale + self.y_mean, data.fidelity)


def _scale(a):
    s = np.std(a, axis=0)
    return np.where(s > 0, s, 1.0), np.flatnonzero(np.atleast_1d(s) == 0)


def standardize(data, x_reference=None):
    """Zero-mean, unit-variance inputs and outputs.

    ``x_reference`` supplies the points used for the input statistics, so two
    datasets can share one input transform. Constant columns keep unit scale
    and are listed in ``constant_columns``.
    """
    if data.n < 2:
        raise InsufficientDataError("standardize needs at least two points")
    ref = data.points if x_reference is None else np.asarray(x_reference, dtype=float)
    x_scale, flat = _scale(ref)
    y_scale, y_flat = _scale(data.values)
    flags = tuple(int(i) for i in flat) + (("y",) if len(y_flat) else ())
    rec = Standardizer(ref.mean(axis=0), x_scale, float(data.values.mean()),
                       float(y_scale), flags)
    return rec.transform(data), rec


def shared_pairs(low, high, tol=DUPLICATE_TOL):
    """Indices ``(i_low, i_high)`` of points present in both datasets."""
    dist, near = cKDTree(low.points).query(high.points, p=np.inf)
    hit = dist <= tol
    return near[hit], np.flatnonzero(hit)


def estimate_correlation(low, high, clamp=1e-6):
    """Signed Pearson correlation of ``(f, u)`` at shared points.

    The magnitude is clamped to ``(clamp, 1 - clamp)``.
    """
    i_low, i_high = shared_pairs(low, high)
    if len(i_low) < 3:
        raise InsufficientDataError(f"{len(i_low)} shared points; at least 3 are needed")
    f, u = low.values[i_low], high.values[i_high]
    if np.ptp(f) == 0 or np.ptp(u) == 0:
        r = 0.0
    else:
        r = float(np.corrcoef(f, u)[0, 1])
    sign = -1.0 if r < 0 else 1.0
    return sign * min(max(abs(r), clamp), 1 - clamp)


def _affine_fit(low, high):
    """Least-squares ``u ~ a f + b`` over the shared points."""
    i_low, i_high = shared_pairs(low, high)
    if len(i_low) < 2:
        raise InsufficientDataError("need two shared points for the affine map")
    f, u = low.values[i_low], high.values[i_high]
    df = f - f.mean()
    a = float(df @ (u - u.mean()) / (df @ df)) if df @ df > 0 else 0.0
    return a, float(u.mean() - a * f.mean())


METHOD_ORDER = (Baseline.HIGH, Baseline.EQUAL_SIZE, Baseline.EQUAL_BUDGET,
                Baseline.MIN_MINIMAX, Baseline.LOW)


def _subsample(low, high, test_idx, train_idx, n_high, n_low, rng):
    """Nested subsample of the training data excluding the test fold."""
    test_pts = high.points[test_idx]
    keep_low = np.ones(low.n, dtype=bool)
    if len(test_pts):
        dist, _ = cKDTree(test_pts).query(low.points, p=np.inf)
        keep_low = dist > DUPLICATE_TOL
    low_pool = np.flatnonzero(keep_low)
    if n_high > len(train_idx) or n_low > len(low_pool):
        return None
    chosen_high = np.sort(rng.choice(train_idx, size=n_high, replace=False))
    # low points coinciding with chosen high points come first to keep the design nested
    if n_high:
        dist, near = cKDTree(low.points).query(high.points[chosen_high], p=np.inf)
        must = np.unique(near[dist <= DUPLICATE_TOL])
    else:
        must = np.empty(0, dtype=int)
    must = must[:n_low]
    rest = np.setdiff1d(low_pool, must)
    extra = np.sort(rng.choice(rest, size=n_low - len(must), replace=False))
    chosen_low = np.concatenate([must, extra]).astype(int)
    return chosen_high, chosen_low


def run_baseline_comparison(low, high, config, r_est=None):
    """Cross-validated RRMS of every allocation strategy on two CSV-style datasets."""
    if low.d != high.d:
        raise ValueError("datasets differ in dimension")
    if r_est is None:
        r_est = estimate_correlation(low, high)
    r_abs = min(max(abs(r_est), 1e-6), 1 - 1e-6)
    x_ref = np.vstack([low.points, high.points])
    low_s, _ = standardize(low, x_ref)
    high_s, _ = standardize(high, x_ref)
    try:
        affine = _affine_fit(low_s, high_s)
    except InsufficientDataError:
        affine = (math.copysign(1.0, r_est), 0.0)

    spec = BudgetSpec(config.budget, config.cost_high)
    plans = {}
    for kind in METHOD_ORDER:
        if kind is Baseline.MIN_MINIMAX:
            plans[kind] = plan(r_abs, spec, low.d, config.min_high)
        else:
            plans[kind] = baseline_plan(kind, spec)

    def one_rep(rep):
        seed = int(np.random.SeedSequence([config.seed, rep]).generate_state(1)[0])
        folds = KFold(n_splits=min(config.folds, high.n), shuffle=True, random_state=seed)
        preds = {k: np.empty(high.n) for k in METHOD_ORDER}
        bad = {k: "" for k in METHOD_ORDER}
        for fold, (train_idx, test_idx) in enumerate(folds.split(high.points)):
            truth = FidelityDataset(high_s.points[test_idx], high_s.values[test_idx])
            for kind in METHOD_ORDER:
                if bad[kind]:
                    continue
                p = plans[kind]
                rng = _rng(config.seed, rep, fold)  # same stream for every method
                picked = _subsample(low_s, high_s, test_idx, train_idx, p.n_high, p.n_low, rng)
                if picked is None:
                    bad[kind] = "infeasible"
                    continue
                ch, cl = picked
                lo = (FidelityDataset(low_s.points[cl], low_s.values[cl], Fidelity.LOW)
                      if len(cl) else None)
                hi = FidelityDataset(high_s.points[ch], high_s.values[ch]) if len(ch) else None
                try:
                    preds[kind][test_idx] = _predict_plan(lo, hi, truth, affine)
                except InsufficientDataError:
                    bad[kind] = "infeasible"
        out = {}
        for kind in METHOD_ORDER:
            out[kind] = math.nan if bad[kind] else rrms(preds[kind], high_s.values)
        return out

    reps = _map(one_rep, range(config.replications), _thread_count(config))
    results = []
    for kind in METHOD_ORDER:
        p = plans[kind]
        vals = np.array([r[kind] for r in reps])
        share = p.n_low / config.budget
        if np.any(np.isnan(vals)):
            results.append(RunResult(share, kind.value, math.nan, math.nan, p.n_high, p.n_low,
                                     config.replications, "infeasible"))
        else:
            results.append(RunResult(share, kind.value, float(vals.mean()), float(vals.std()),
                                     p.n_high, p.n_low, config.replications))
    return results


def _predict_plan(lo, hi, truth, affine):
    n_high = 0 if hi is None else hi.n
    n_low = 0 if lo is None else lo.n
    if n_low < 2 and n_high < 2:
        raise InsufficientDataError("plan leaves fewer than two points at both fidelities")
    if n_low < 2:
        return KrigingRegressor().fit(hi.points, hi.values).predict(truth.points)
    if n_high < 2:
        # low-only plans map the low-fidelity surrogate onto the high scale
        a, b = affine
        return a * KrigingRegressor().fit(lo.points, lo.values).predict(truth.points) + b
    try:
        model = CoKrigingRegressor().fit(lo.points, lo.values, hi.points, hi.values)
    except Exception:
        model = CoKrigingRegressor(require_nested=False).fit(lo.points, lo.values,
                                                             hi.points, hi.values)
    return model.predict(truth.points)
