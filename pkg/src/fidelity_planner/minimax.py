"""Minimax interpolation errors for single- and variable-fidelity grids."""

from dataclasses import dataclass
import itertools
import math

import numpy as np

from .spectral import DEFAULT_CONFIG, GridSpec, _positive_vector


@dataclass(frozen=True)
class SmoothnessClass:
    """Spectral densities whose processes satisfy E sum lambda_i^2 (df/dx_i)^2 <= L."""

    L: float
    lam: tuple

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("L must be positive")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "lam", _positive_vector(self.lam, "lambda"))

    @property
    def d(self):
        return len(self.lam)


@dataclass(frozen=True)
class FidelitySmoothness:
    """Smoothness budgets of the low-fidelity process f and the correction g."""

    L_f: float
    L_g: float
    rho: float
    V_f: float = 1.0
    V_g: float = 1.0

    def __post_init__(self):
        for name in ("L_f", "L_g", "V_f", "V_g"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not math.isfinite(self.rho):
            raise ValueError("rho must be finite")

    @property
    def rho2(self):
        return self.rho ** 2


@dataclass(frozen=True)
class SpikyDensity:
    """Two-cube density concentrated at +/- 1/(2 h_j) on axis j.

    Its mass is chosen so the derivative-energy constraint of ``base`` is met
    with equality. Used as the lower-bound witness for the minimax error.
    """

    base: SmoothnessClass
    epsilon: float
    axis: int = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.axis is not None and not 0 <= self.axis < self.base.d:
            raise ValueError("axis out of range")

    def resolve_axis(self, grid):
        if self.axis is not None:
            return self.axis
        ratios = np.asarray(grid.h) / np.asarray(self.base.lam)
        return int(np.argmax(ratios))  # argmax returns the lowest index on ties

    def cube_mass(self, grid):
        """Mass A_eps carried by each of the two cubes."""
        j = self.resolve_axis(grid)
        lam = np.asarray(self.base.lam)
        eps = self.epsilon
        second_moment = lam[j] ** 2 / (4 * grid.h[j] ** 2) + eps ** 2 / 3 * np.sum(lam ** 2)
        return self.base.L / (8 * np.pi ** 2 * second_moment)

    def centers(self, grid):
        j = self.resolve_axis(grid)
        c = np.zeros((2, self.base.d))
        c[0, j] = 0.5 / grid.h[j]
        c[1, j] = -0.5 / grid.h[j]
        return c

    def __call__(self, omega, grid):
        w = np.atleast_2d(np.asarray(omega, dtype=float))
        height = self.cube_mass(grid) / (2 * self.epsilon) ** self.base.d
        inside = np.zeros(len(w), dtype=bool)
        for c in self.centers(grid):
            inside |= np.max(np.abs(w - c), axis=1) <= self.epsilon
        return np.where(inside, height, 0.0)


def _check(cls_d, grid):
    if cls_d != grid.d:
        raise ValueError(f"dimension mismatch: {cls_d} != {grid.d}")


def minimax_error_single(cls, grid):
    """Worst-case error ``(L / 2 pi^2) max_i (h_i / lambda_i)^2`` over the class."""
    _check(cls.d, grid)
    ratios = np.asarray(grid.h) / np.asarray(cls.lam)
    return float(cls.L / (2 * np.pi ** 2) * np.max(ratios) ** 2)


def minimax_kernel_eval(omega, grid):
    """Transfer function of the minimax kernel: ``max(0, 1 - ||H omega||)``."""
    w = np.asarray(omega, dtype=float)
    scalar = w.ndim == 0 or (w.ndim == 1 and grid.d > 1)
    w = w.reshape(-1, grid.d)
    norm = np.sqrt(np.sum((w * np.asarray(grid.h)) ** 2, axis=1))
    out = np.clip(1.0 - norm, 0.0, None)
    return float(out[0]) if scalar else out


def _unit_kernel(u):
    return np.clip(1.0 - np.sqrt(np.sum(u * u, axis=-1)), 0.0, None)


def verify_kernel_bound(omega, grid):
    """Both sides of ``(1 - K(u))^2 + sum_{x != 0} K(u + x)^2 <= 2 ||u||^2``.

    ``u = H omega`` is the grid-normalized frequency and ``K`` the minimax
    kernel on the unit lattice. Only translates with ``||u + x|| < 1`` contribute,
    so the lattice sum is enumerated exactly.
    """
    d = grid.d
    if d > 3:
        raise ValueError("verify_kernel_bound supports d <= 3")
    u = np.asarray(omega, dtype=float).reshape(d) * np.asarray(grid.h)
    ranges = [range(int(math.floor(-ui - 1)), int(math.ceil(-ui + 1)) + 1) for ui in u]
    total = (1.0 - _unit_kernel(u)) ** 2
    for x in itertools.product(*ranges):
        if any(x):
            total += _unit_kernel(u + np.asarray(x, dtype=float)) ** 2
    return float(total), float(2.0 * np.dot(u, u))


def worst_case_upper_bound(cls, grid, omegas):
    """Upper bound on the minimax error from the minimax kernel.

    Evaluates ``L / (2 pi)^2 * max_w [bracket(w) / sum lambda_i^2 w_i^2]`` over the
    supplied frequencies, where ``bracket`` is the left side of
    :func:`verify_kernel_bound`.
    """
    _check(cls.d, grid)
    lam = np.asarray(cls.lam)
    best = 0.0
    for w in np.atleast_2d(omegas):
        energy = np.sum(lam ** 2 * w ** 2)
        if energy <= 0:
            continue
        lhs, _ = verify_kernel_bound(w, grid)
        best = max(best, lhs / energy)
    return cls.L / (2 * np.pi) ** 2 * best


def spiky_lower_bound(spiky, grid, cfg=DEFAULT_CONFIG, points_per_axis=8):
    """Optimal-kernel risk against the spiky witness density.

    Evaluates ``int F (sum_{k != 0} F(w + H^-1 k)) / (sum_k F(w + H^-1 k)) dw``
    by midpoint quadrature over the two support cubes, with the alias sums
    enumerated over every lattice translate that can reach the support. The
    density is piecewise constant so the midpoint rule is exact.
    """
    _check(spiky.base.d, grid)
    d = grid.d
    eps = spiky.epsilon
    if eps >= 0.25 / max(grid.h):
        raise ValueError("epsilon must be smaller than 1 / (4 max h)")
    hinv = 1.0 / np.asarray(grid.h)
    j = spiky.resolve_axis(grid)
    # translates reaching the support: |k_i| / h_i <= 1/h_j + 2 eps
    reach = [int(math.ceil((hinv[j] + 2 * eps) / hinv[i])) for i in range(d)]
    lattice = np.array([k for k in itertools.product(*[range(-r, r + 1) for r in reach])],
                       dtype=float) * hinv

    offsets = (np.arange(points_per_axis) + 0.5) / points_per_axis * 2 * eps - eps
    cell = np.stack(np.meshgrid(*([offsets] * d), indexing="ij"), -1).reshape(-1, d)
    weight = (2 * eps / points_per_axis) ** d

    total = 0.0
    for c in spiky.centers(grid):
        pts = c + cell
        shifted = spiky((pts[:, None, :] + lattice).reshape(-1, d), grid)
        shifted = shifted.reshape(len(pts), len(lattice))
        f0 = spiky(pts, grid)
        s = shifted.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(s > 0, (s - f0) / s, 0.0)
        total += np.sum(f0 * ratio) * weight
    return float(total)


def optimal_grid(cls, n):
    """Grid with ``n`` points per unit volume minimizing the minimax error.

    The maximum over axes is minimized by equalizing ``h_i / lambda_i``; with
    ``prod h_i = 1/n`` this gives ``h_i = lambda_i (n prod lambda)^{-1/d}`` and risk
    ``(L / 2 pi^2) (n prod lambda)^{-2/d}``.
    """
    if not n > 0:
        raise ValueError("n must be positive")
    lam = np.asarray(cls.lam)
    d = cls.d
    t = (n * np.prod(lam)) ** (-1.0 / d)
    h_star = tuple(float(v) for v in lam * t)
    risk = cls.L / (2 * np.pi ** 2) * t ** 2
    return h_star, float(risk)


def minimax_error_vf(fs, h, m, d=1):
    """Variable-fidelity minimax error ``rho^2 (L_f/2)(h/(m pi))^2 + (L_g/2)(h/pi)^2``.

    High-fidelity data lie on the grid of step ``h``, low-fidelity data on the
    grid of step ``h/m``. The result does not depend on ``d`` for ``H = h I``;
    the argument is kept so callers state the setting explicitly.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not h > 0:
        raise ValueError("h must be positive")
    if d < 1:
        raise ValueError("d must be >= 1")
    return float(fs.rho2 * fs.L_f / 2 * (h / (m * np.pi)) ** 2
                 + fs.L_g / 2 * (h / np.pi) ** 2)


def single_grid(h, d):
    return GridSpec((h,) * d)
