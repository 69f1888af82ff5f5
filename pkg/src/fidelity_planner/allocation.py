"""Budgeted split of samples between the high- and low-fidelity sources."""

from dataclasses import dataclass
from enum import Enum
import math

import numpy as np
from scipy import optimize

from .exceptions import InfeasiblePlanError
from .minimax import FidelitySmoothness


class Baseline(str, Enum):
    MIN_MINIMAX = "MinMinimax"
    HIGH = "High"
    LOW = "Low"
    EQUAL_SIZE = "EqualSize"
    EQUAL_BUDGET = "EqualBudget"


class Regime(str, Enum):
    EXACT = "Exact"
    SMALL_R = "AsymptoticSmallR"
    LARGE_R = "AsymptoticLargeR"


@dataclass(frozen=True)
class BudgetSpec:
    """Total budget ``budget`` and cost ``cost_high`` of a high-fidelity run.

    A low-fidelity run costs 1.
    """

    budget: float
    cost_high: float

    def __post_init__(self):
        if not (math.isfinite(self.budget) and self.budget > 0):
            raise ValueError("budget must be positive")
        if not (math.isfinite(self.cost_high) and self.cost_high > 1):
            raise ValueError("cost_high must exceed 1")


@dataclass(frozen=True)
class AllocationPlan:
    n_high: int
    n_low: int
    ratio: float
    spent: float
    baseline: Baseline
    nested: bool = False

    def to_dict(self):
        ratio = self.ratio if math.isfinite(self.ratio) else None
        return {"n_high": self.n_high, "n_low": self.n_low, "ratio": ratio,
                "spent": self.spent, "baseline": self.baseline.value,
                "nested": self.nested}


@dataclass(frozen=True)
class BenefitCurvePoint:
    r: float
    ratio_R2_R1: float
    regime: Regime


def rho_squared_from_corr(r, V_f=1.0, V_g=1.0):
    """Invert ``r = 1 / sqrt(1 + (V_g / V_f) / rho^2)`` for ``rho^2``."""
    if not 0 < r < 1:
        raise ValueError(f"correlation must lie in (0, 1), got {r}")
    if V_f <= 0 or V_g <= 0:
        raise ValueError("variances must be positive")
    return (V_g / V_f) * r * r / (1.0 - r * r)


def corr_from_rho_squared(rho2, V_f=1.0, V_g=1.0):
    return 1.0 / math.sqrt(1.0 + (V_g / V_f) / rho2)


def optimal_ratio(fs, cost_high, d):
    """Low-to-high sample ratio ``s* = ((L_f / L_g) c rho^2)^{d/(d+2)}``."""
    if cost_high <= 0:
        raise ValueError("cost_high must be positive")
    return float((fs.L_f / fs.L_g * cost_high * fs.rho2) ** (d / (d + 2)))


def budgeted_objective(s, fs, spec, d):
    """Variable-fidelity minimax error at sample ratio ``s``."""
    c, lam = spec.cost_high, spec.budget
    s = np.asarray(s, dtype=float)
    low = fs.rho2 * fs.L_f / 2 * ((c + s) / (np.pi * lam * s)) ** (2 / d)
    high = fs.L_g / 2 * ((c + s) / (np.pi * lam)) ** (2 / d)
    return low + high


def brute_force_ratio(fs, spec, d, grid_points=2000, lo=1e-3, hi=1e4):
    """Minimize :func:`budgeted_objective` numerically over ``s``.

    A log-spaced scan locates the bracket, then bounded Brent search
    (golden-section steps with parabolic acceleration) in ``log s`` refines it.
    """
    if grid_points < 1000:
        raise ValueError("grid_points must be at least 1000")
    s = np.geomspace(lo, hi, grid_points)
    vals = budgeted_objective(s, fs, spec, d)
    i = int(np.argmin(vals))
    if i == 0 or i == grid_points - 1:
        return float(s[i])
    f = lambda t: float(budgeted_objective(math.exp(t), fs, spec, d))
    res = optimize.minimize_scalar(f, bounds=(math.log(s[i - 1]), math.log(s[i + 1])),
                                   method="bounded", options={"xatol": 1e-9})
    return float(math.exp(res.x))


def budgeted_minimax_error(fs, spec, d):
    if fs.rho2 == 0:
        # no value in low-fidelity data; the infimum sits at s -> 0
        return float(fs.L_g / 2 * (spec.cost_high / (np.pi * spec.budget)) ** (2 / d))
    s = optimal_ratio(fs, spec.cost_high, d)
    return float(budgeted_objective(s, fs, spec, d))


def single_fidelity_budgeted_error(fs, spec, d):
    """Error when the whole budget buys high-fidelity runs."""
    return float((fs.rho2 * fs.L_f / 2 + fs.L_g / 2)
                 * (spec.cost_high / (np.pi * spec.budget)) ** (2 / d))


def benefit_ratio(fs, cost_high, d):
    """Budget-free ratio R2/R1 of variable- to single-fidelity minimax error."""
    if cost_high <= 1:
        raise ValueError("cost_high must exceed 1")
    q = fs.rho2 * fs.L_f / fs.L_g
    w = (q ** d / cost_high ** 2) ** (1 / (d + 2))
    return float((1 + w) ** ((d + 2) / d) / (1 + q))


def benefit_ratio_asymptotic(fs, cost_high, d, regime):
    """Small-r or large-r expansion of :func:`benefit_ratio`."""
    regime = Regime(regime)
    c = cost_high
    a = d / (d + 2)
    r2 = 1.0 / (1.0 + (fs.V_g / fs.V_f) / fs.rho2) if fs.rho2 > 0 else 0.0
    if regime is Regime.SMALL_R:
        k = (fs.L_f * fs.V_f / (fs.L_g * fs.V_g)) ** a
        return float(1 + (d + 2) / d * k * r2 ** a / c ** (2 / (d + 2)))
    if regime is Regime.LARGE_R:
        k = (fs.L_g * fs.V_f / (fs.L_f * fs.V_g)) ** a
        return float(c ** (-2 / d) + (d + 2) / d * k * (1 - r2) ** a / c ** (4 / (d * (d + 2))))
    return benefit_ratio(fs, cost_high, d)


def benefit_curve(r_values, L_f, L_g, cost_high, d, V_f=1.0, V_g=1.0):
    """Exact R2/R1 for each correlation in ``r_values``."""
    out = []
    for r in r_values:
        fs = FidelitySmoothness(L_f, L_g, math.sqrt(rho_squared_from_corr(r, V_f, V_g)), V_f, V_g)
        out.append(BenefitCurvePoint(float(r), benefit_ratio(fs, cost_high, d), Regime.EXACT))
    return out


def threshold_correlation(fs, cost_high, d, k=1.0, tol=1e-12):
    """Smallest correlation in (0, 1) with ``R2/R1 <= k``, or None.

    ``fs.rho`` is ignored; ``L_f``, ``L_g``, ``V_f`` and ``V_g`` are used. The
    ratio starts at 1 when r = 0 and is decreasing in r, so for ``k = 1``
    the crossing is where the curve first drops below 1.
    """
    if cost_high <= 1:
        raise ValueError("cost_high must exceed 1")
    if not 0 < k <= 1:
        raise ValueError("k must lie in (0, 1]")

    def excess(r):
        rho = math.sqrt(rho_squared_from_corr(r, fs.V_f, fs.V_g))
        trial = FidelitySmoothness(fs.L_f, fs.L_g, rho, fs.V_f, fs.V_g)
        return benefit_ratio(trial, cost_high, d) - k

    lo, hi = 1e-9, 1 - 1e-12
    if excess(hi) > 0:
        return None
    if excess(lo) <= 0 and k < 1:
        return lo
    # for k = 1 the ratio exceeds 1 just above r = 0 whenever a crossing exists
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return float(hi)


def threshold_correlation_approx(fs, cost_high, d, leading_constant=True):
    """Large-c estimate of the break-even correlation (``k = 1``).

    Expanding ``R2/R1 < 1`` to first order in ``1/c`` gives
    ``r^2 ~ K (V_f/V_g)(L_g/L_f)/c`` with ``K = ((d+2)/d)^{(d+2)/2}``. With
    ``leading_constant=False`` the constant is dropped, leaving only the
    ``1/sqrt(c)`` order.
    """
    K = ((d + 2) / d) ** ((d + 2) / 2) if leading_constant else 1.0
    return float(math.sqrt(K * fs.V_f / fs.V_g * fs.L_g / fs.L_f / cost_high))


def _make(n_high, n_low, s, spec, kind, nested=False):
    spent = spec.cost_high * n_high + n_low
    return AllocationPlan(int(n_high), int(n_low), float(s), float(spent), kind, nested)


def plan(r, spec, d, min_high=5, L_f=1.0, L_g=1.0, nested=False):
    """Minimax-optimal allocation for correlation ``r`` and equal smoothness.

    Sizes are rounded down and the leftover budget buys extra low-fidelity
    points. With ``nested=True`` the low-fidelity sample is kept at least as
    large as the high-fidelity one so that ``D_u`` can be a subset of ``D_f``.

    Raises
    ------
    InfeasiblePlanError
        If the budget cannot pay for a single low-fidelity point.
    """
    if not 0 < r < 1:
        raise ValueError(f"correlation must lie in (0, 1), got {r}")
    if min_high < 0:
        raise ValueError("min_high must be nonnegative")
    lam, c = spec.budget, spec.cost_high
    if lam < 1:
        raise InfeasiblePlanError(f"budget {lam} cannot pay for one low-fidelity point")
    fs = FidelitySmoothness(L_f, L_g, math.sqrt(rho_squared_from_corr(r)))
    s = optimal_ratio(fs, c, d)
    low_only = _make(0, math.floor(lam), s, spec, Baseline.MIN_MINIMAX, nested)

    n_u = math.floor(lam / (c + s))
    if n_u < 1:
        return low_only
    if n_u < min_high:
        n_u = min_high
    if nested and s < 1:
        n_u = min(n_u, math.floor(lam / (c + 1)))
        if n_u < max(1, min_high):
            return low_only
    if c * n_u > lam:
        return low_only
    n_f = math.floor(lam - c * n_u)  # floor(s n_u) plus the greedy low-fidelity fill
    return _make(n_u, n_f, s, spec, Baseline.MIN_MINIMAX, nested)


def baseline_plan(kind, spec):
    """Fixed sample sizes of the comparison strategies."""
    kind = Baseline(kind)
    lam, c = spec.budget, spec.cost_high
    if kind is Baseline.HIGH:
        return _make(math.floor(lam / c), 0, 0.0, spec, kind)
    if kind is Baseline.LOW:
        return _make(0, math.floor(lam), math.inf, spec, kind)
    if kind is Baseline.EQUAL_SIZE:
        n = math.floor(lam / (c + 1))
        return _make(n, n, 1.0, spec, kind)
    if kind is Baseline.EQUAL_BUDGET:
        n_u = math.floor(lam / (2 * c))
        n_f = math.floor(lam / 2)
        return _make(n_u, n_f, n_f / max(n_u, 1), spec, kind)
    raise ValueError("use plan() for the MinMinimax allocation")
