"""Spectral densities, lattice alias sums and single-fidelity interpolation errors.

Fourier convention: ``F(w) = \\int exp(2 pi i w.x) R(x) dx``, so a process
variance equals the total spectral mass ``\\int F``. The interpolation error
of the optimal grid interpolant is

    sigma^2 = \\int F(w) * A(w) / S(w) dw,

where ``S`` is the alias sum of ``F`` over the dual lattice ``H^{-1} Z^d`` and
``A = S - F``. Because ``S`` is periodic the integral folds exactly onto one
cell of the dual lattice, which is what :func:`interpolation_error` integrates.
"""

from dataclasses import dataclass
from enum import Enum
import math
from typing import NamedTuple

import numpy as np
from scipy import special

from .exceptions import LatticeTruncationError, UnsupportedDimensionError
from .quadrature import adaptive_box


class Family(str, Enum):
    EXPONENTIAL = "exponential"
    SQUARED_EXPONENTIAL = "sqexp"
    MATERN32 = "matern32"


def _positive_vector(values, name):
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"{name} must be finite and strictly positive, got {arr}")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class SpectralDensity:
    """Parametric spectral density on R^d.

    ``theta`` holds one inverse-length-scale parameter per axis. Exponential and
    squared-exponential densities are products of their 1-D forms
    ``theta/(theta^2 + w^2)`` and ``theta^{-1/2} exp(-w^2 / (2 theta))``.
    The Matern-3/2 density is the exact transform of
    ``(1 + sqrt(3) r) exp(-sqrt(3) r)`` with ``r = sqrt(sum theta_i x_i^2)``.
    """

    family: Family
    theta: tuple
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "theta", _positive_vector(self.theta, "theta"))
        amp = float(self.amplitude)
        if not math.isfinite(amp) or amp < 0:
            raise ValueError(f"amplitude must be finite and >= 0, got {amp}")
        object.__setattr__(self, "amplitude", amp)

    @property
    def d(self):
        return len(self.theta)

    @property
    def separable(self):
        return self.family is not Family.MATERN32 or self.d == 1

    def __call__(self, omega):
        w = _as_points(omega, self.d)
        out = self.amplitude * self._unit(w)
        return out if np.ndim(omega) > (0 if self.d == 1 else 1) else float(out[0])

    def _unit(self, w):
        """Unit-amplitude density at points ``w`` of shape (m, d)."""
        if self.separable:
            out = np.ones(w.shape[0])
            for i in range(self.d):
                out = out * _axis_value(self.family, self.theta[i], w[:, i])
            return out
        th = np.asarray(self.theta)
        q = np.sum(w ** 2 / th, axis=1)
        return (_matern_constant(self.d) / np.prod(np.sqrt(th))
                * (3.0 + 4.0 * np.pi ** 2 * q) ** (-(3 + self.d) / 2))

    def covariance(self, x):
        """Covariance function R(x) whose transform is this density."""
        x = _as_points(x, self.d)
        th = np.asarray(self.theta)
        if self.family is Family.EXPONENTIAL:
            r = np.pi ** self.d * np.exp(-2 * np.pi * np.abs(x) @ th)
        elif self.family is Family.SQUARED_EXPONENTIAL:
            r = (2 * np.pi) ** (self.d / 2) * np.exp(-2 * np.pi ** 2 * (x ** 2) @ th)
        else:
            dist = np.sqrt((x ** 2) @ th)
            r = (1 + np.sqrt(3) * dist) * np.exp(-np.sqrt(3) * dist)
        return self.amplitude * r

    def total_mass(self):
        """Integral of the density over R^d (the process variance)."""
        return float(self.covariance(np.zeros(self.d))[0])

    def scaled(self, factor):
        return SpectralDensity(self.family, self.theta, self.amplitude * factor)


@dataclass(frozen=True)
class GridSpec:
    """Infinite rectangular design ``{H k : k in Z^d}`` with ``H = diag(h)``."""

    h: tuple

    def __post_init__(self):
        object.__setattr__(self, "h", _positive_vector(self.h, "h"))

    @property
    def d(self):
        return len(self.h)

    @property
    def cell_measure(self):
        return float(np.prod(self.h))

    def refine(self, m):
        """Grid with every step divided by the integer ``m``."""
        return GridSpec(tuple(hi / m for hi in self.h))


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-14
    rel_tol: float = 1e-10
    alias_truncation_tol: float = 1e-12
    max_lattice_radius: int = 8192
    domain_cutoff: float = 1e4

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "alias_truncation_tol", "domain_cutoff"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if int(self.max_lattice_radius) < 2:
            raise ValueError("max_lattice_radius must be >= 2")


DEFAULT_CONFIG = QuadratureConfig()


def _as_points(omega, d):
    w = np.asarray(omega, dtype=float)
    if d == 1 and w.ndim <= 1:
        w = w.reshape(-1, 1)
    else:
        w = np.atleast_2d(w)
    if w.shape[-1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {w.shape}")
    return w


def _matern_constant(d):
    return (2.0 ** d * np.pi ** (d / 2) * math.gamma((3 + d) / 2)
            * 3.0 ** 1.5 / math.gamma(1.5))


# --- one-dimensional factors ------------------------------------------------
# Exponential and 1-D Matern factors share the rational form
# coef * (a^2 + kappa^2 t^2)^(-n).

def _rational(family, theta):
    if family is Family.EXPONENTIAL:
        return theta, theta, 1.0, 1
    a = math.sqrt(3.0 * theta)
    return 4.0 * a ** 3, a, 2.0 * np.pi, 2


def _axis_value(family, theta, t):
    if family is Family.SQUARED_EXPONENTIAL:
        return np.exp(-t ** 2 / (2 * theta)) / math.sqrt(theta)
    coef, a, kappa, n = _rational(family, theta)
    return coef * (a * a + (kappa * t) ** 2) ** (-n)


def _axis_derivative(family, theta, t):
    if family is Family.SQUARED_EXPONENTIAL:
        return -(t / theta) * _axis_value(family, theta, t)
    coef, a, kappa, n = _rational(family, theta)
    return -2 * n * kappa ** 2 * t * coef * (a * a + (kappa * t) ** 2) ** (-n - 1)


def _axis_tail(family, theta, t, power):
    """Integral of ``F^power`` over ``[t, inf)`` for ``t > 0``."""
    if family is Family.SQUARED_EXPONENTIAL:
        if power == 1:
            return math.sqrt(np.pi / 2) * special.erfc(t / math.sqrt(2 * theta))
        return 0.5 * math.sqrt(np.pi / theta) * special.erfc(t / math.sqrt(theta))
    coef, a, kappa, n = _rational(family, theta)
    m = n * power
    tau = kappa * t
    j = (0.5 * a ** (1 - 2 * m) * special.beta(m - 0.5, 0.5)
         * special.betainc(m - 0.5, 0.5, a * a / (a * a + tau * tau)))
    return coef ** power / kappa * j


def _one_sided(family, theta, w, h, K, power):
    """Sum over k > K of F(w + k/h)^power via the midpoint Euler-Maclaurin rule."""
    t = w + (K + 0.5) / h
    integral = h * _axis_tail(family, theta, t, power)
    f = _axis_value(family, theta, t)
    fp = _axis_derivative(family, theta, t)
    slope = (power * f ** (power - 1) * fp) / h
    return integral + slope / 24.0


def axis_alias_sums(family, theta, w, h, cfg=DEFAULT_CONFIG):
    """Alias sums along one axis.

    Returns ``(F0, A, B)`` with ``F0 = F(w)``, ``A = sum_{k != 0} F(w + k/h)``
    and ``B = sum_{k != 0} F(w + k/h)^2``, evaluated elementwise on ``w``.
    Direct summation over ``|k| <= K`` is combined with an Euler-Maclaurin tail;
    ``K`` doubles until consecutive estimates agree to ``alias_truncation_tol``.
    """
    w = np.asarray(w, dtype=float)
    f0 = _axis_value(family, theta, w)
    K = max(8, int(np.ceil(np.max(np.abs(w), initial=0.0) * h)) + 8)

    def estimate(K):
        k = np.arange(1, K + 1, dtype=float) / h
        fp = _axis_value(family, theta, w[..., None] + k)
        fm = _axis_value(family, theta, w[..., None] - k)
        a = fp.sum(-1) + fm.sum(-1)
        b = (fp ** 2).sum(-1) + (fm ** 2).sum(-1)
        a = a + _one_sided(family, theta, w, h, K, 1) + _one_sided(family, theta, -w, h, K, 1)
        b = b + _one_sided(family, theta, w, h, K, 2) + _one_sided(family, theta, -w, h, K, 2)
        return a, b

    a_prev, b_prev = estimate(K)
    tol = cfg.alias_truncation_tol
    while True:
        K2 = 2 * K
        a, b = estimate(K2)
        ok_a = np.abs(a - a_prev) <= tol * (f0 + a)
        ok_b = np.abs(b - b_prev) <= tol * (f0 * f0 + b) + 1e-300
        if np.all(ok_a & ok_b):
            return f0, a, b
        if K2 >= cfg.max_lattice_radius:
            raise LatticeTruncationError(
                f"alias sum not converged at lattice radius {K2}",
                partial_sum=f0 + a, radius=K2)
        K, a_prev, b_prev = K2, a, b


# --- Matern-3/2 in d >= 2 ----------------------------------------------------
# The density is a gamma mixture of separable Gaussians:
#   (3 + 4 pi^2 q)^(-p) = Gamma(p)^-1 \int t^(p-1) e^(-3t) e^(-4 pi^2 t q) dt,
# so every lattice sum reduces to products of 1-D Gaussian (theta-function)
# sums, integrated over log t with the trapezoid rule. That rule converges
# geometrically here because the integrand is analytic in a strip.

_LOG_T = np.arange(-28.0, 4.0 + 1e-9, 0.2)
_T = np.exp(_LOG_T)
_STEP = 0.2


def _gauss_axis_sums(a, w, h):
    """``G = exp(-a w^2)`` and ``A = sum_{k != 0} exp(-a (w + k/h)^2)``.

    ``a`` has shape (T, 1) and ``w`` shape (n,). Narrow Gaussians are summed
    directly around the nearest lattice translates; wide ones go through the
    Poisson-dual series, where the k = 0 term is never dominant.
    """
    G = np.exp(-a * w ** 2)
    A = np.empty_like(G)
    narrow = a[:, 0] / (h * h) >= np.pi
    if narrow.any():
        an = a[narrow]
        k0 = -np.round(w * h)
        acc = np.zeros((an.shape[0], w.size))
        for j in range(-6, 7):
            k = k0 + j
            term = np.exp(-an * (w + k / h) ** 2)
            acc += np.where(k != 0, term, 0.0)
        A[narrow] = acc
    if (~narrow).any():
        aw = a[~narrow]
        n = np.arange(1, 6)[:, None, None]
        series = 1.0 + 2.0 * np.sum(np.exp(-np.pi ** 2 * n ** 2 * h * h / aw)
                                    * np.cos(2 * np.pi * n * h * w), axis=0)
        A[~narrow] = h * np.sqrt(np.pi / aw) * series - G[~narrow]
    return G, A


def _mixture_alias_sums(density, w, grid, tensor=False):
    """``(A, B)`` for the Matern-3/2 density in d >= 2.

    ``w`` is a list of per-axis node arrays when ``tensor`` is true (result on
    their tensor grid), otherwise an (m, d) array of points.
    """
    d = density.d
    th = np.asarray(density.theta)
    p = (3 + d) / 2
    c = _matern_constant(d) / np.prod(np.sqrt(th))
    log_wa = (math.log(c) - math.lgamma(p) + p * _LOG_T - 3 * _T) + math.log(_STEP)
    log_wb = (2 * math.log(c) - math.lgamma(2 * p) + 2 * p * _LOG_T - 3 * _T) + math.log(_STEP)
    keep = (log_wa > -745) | (log_wb > -745)
    wa, wb, t = np.exp(log_wa[keep]), np.exp(log_wb[keep]), _T[keep]

    axes = w if tensor else [w[:, i] for i in range(d)]
    parts = []
    for i in range(d):
        a = (4 * np.pi ** 2 / th[i]) * t[:, None]
        parts.append(_gauss_axis_sums(a, np.asarray(axes[i], dtype=float), grid.h[i]))
    if tensor:
        shape = tuple(len(x) for x in axes)
    else:
        shape = (len(axes[0]),)
    A = np.zeros(shape)
    B = np.zeros(shape)
    for j in range(len(t)):
        tel = np.zeros(shape)
        prefix = 1.0
        for i in range(d):
            g, al = parts[i][0][j], parts[i][1][j]
            if tensor:
                sh = [1] * d
                sh[i] = -1
                g, al = g.reshape(sh), al.reshape(sh)
            suffix = 1.0
            for k in range(i + 1, d):
                gk, ak = parts[k][0][j], parts[k][1][j]
                if tensor:
                    sh = [1] * d
                    sh[k] = -1
                    gk, ak = gk.reshape(sh), ak.reshape(sh)
                suffix = suffix * (gk + ak)
            tel = tel + prefix * al * suffix
            prefix = prefix * g
        A += wa[j] * tel
        B += wb[j] * tel
    return A, B


def _box_alias_sums(density, w, grid, cfg):
    """Unit-amplitude ``(F0, A, B)`` at scattered points for Matern d >= 2."""
    A, B = _mixture_alias_sums(density, w, grid)
    return density._unit(w), A, B


def _combine_axes(parts):
    """Combine per-axis (F0, A, B) into totals without cancellation.

    With S_i = F0_i + A_i and Q_i = F0_i^2 + B_i, the d-dimensional quantities
    are A = prod S - prod F0 and B = prod Q - prod F0^2, expanded telescopically.
    """
    f0_tot = 1.0
    a_tot = 0.0
    b_tot = 0.0
    d = len(parts)
    for i in range(d):
        prefix_f = 1.0
        prefix_f2 = 1.0
        for j in range(i):
            prefix_f = prefix_f * parts[j][0]
            prefix_f2 = prefix_f2 * parts[j][0] ** 2
        suffix_s = 1.0
        suffix_q = 1.0
        for j in range(i + 1, d):
            suffix_s = suffix_s * (parts[j][0] + parts[j][1])
            suffix_q = suffix_q * (parts[j][0] ** 2 + parts[j][2])
        a_tot = a_tot + prefix_f * parts[i][1] * suffix_s
        b_tot = b_tot + prefix_f2 * parts[i][2] * suffix_q
        f0_tot = f0_tot * parts[i][0]
    return f0_tot, a_tot, b_tot


def _alias_parts(density, w, grid, cfg):
    """Unit-amplitude (F0, A, B) at points w of shape (m, d)."""
    if density.separable:
        parts = [axis_alias_sums(density.family, density.theta[i], w[:, i], grid.h[i], cfg)
                 for i in range(density.d)]
        return _combine_axes(parts)
    return _box_alias_sums(density, w, grid, cfg)


def _check_dims(density, grid):
    if density.d != grid.d:
        raise ValueError(f"density dimension {density.d} != grid dimension {grid.d}")


def alias_sum(density, omega, grid, cfg=DEFAULT_CONFIG):
    """Sum of ``F(omega + H^{-1} k)`` over the whole lattice ``k in Z^d``."""
    _check_dims(density, grid)
    w = _as_points(omega, density.d)
    f0, a, _ = _alias_parts(density, w, grid, cfg)
    out = density.amplitude * (f0 + a)
    return out if np.ndim(omega) > (0 if density.d == 1 else 1) else float(out[0])


def optimal_transfer(density, omega, grid, cfg=DEFAULT_CONFIG):
    """Fourier transform of the error-minimizing interpolation kernel, F / alias sum."""
    _check_dims(density, grid)
    w = _as_points(omega, density.d)
    f0, a, _ = _alias_parts(density, w, grid, cfg)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(f0 + a > 0, f0 / (f0 + a), 0.0)
    return out if np.ndim(omega) > (0 if density.d == 1 else 1) else float(out[0])


def _folded_integrand(density, grid, cfg):
    d = density.d

    def fun(axes):
        if density.separable:
            parts = [axis_alias_sums(density.family, density.theta[i], axes[i], grid.h[i], cfg)
                     for i in range(d)]
            # broadcast each axis' arrays onto the tensor grid
            shaped = []
            for i, (f0, a, b) in enumerate(parts):
                shape = [1] * d
                shape[i] = -1
                shaped.append((f0.reshape(shape), a.reshape(shape), b.reshape(shape)))
            f0, a, b = _combine_axes(shaped)
        else:
            mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
            shape = mesh.shape[:-1]
            f0 = density._unit(mesh.reshape(-1, d)).reshape(shape)
            a, b = _mixture_alias_sums(density, axes, grid, tensor=True)
        s = f0 + a
        num = 2.0 * f0 * a + np.maximum(a * a - b, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(s > 0, num / s, 0.0)

    return fun


def _tail_mass(density, cutoff):
    """Upper bound on the spectral mass outside [-cutoff, cutoff] (d = 1)."""
    return 2.0 * density.amplitude * float(
        _axis_tail(density.family, density.theta[0], cutoff, 1))


def interpolation_error(density, grid, cfg=DEFAULT_CONFIG, method="folded",
                        return_error=False):
    """Average squared error of the optimal grid interpolant.

    Parameters
    ----------
    density : SpectralDensity
    grid : GridSpec
    cfg : QuadratureConfig
    method : {"folded", "direct"}
        ``"folded"`` integrates the exact periodic folding of the integrand over
        one dual-lattice cell. ``"direct"`` (d = 1 only) integrates
        ``F (1 - F/S)`` over ``[-W, W]`` and adds the spectral tail mass beyond
        ``W`` to the error estimate; it serves as an independent cross-check.
    return_error : bool
        Also return the quadrature error estimate.
    """
    _check_dims(density, grid)
    d = density.d
    if d > 3:
        raise UnsupportedDimensionError(f"quadrature supports d <= 3, got d = {d}")
    if density.amplitude == 0.0:
        return (0.0, 0.0) if return_error else 0.0

    unit = SpectralDensity(density.family, density.theta, 1.0)
    abs_tol = cfg.abs_tol / density.amplitude
    if method == "folded":
        bounds = [(0.0, 0.5 / hi) for hi in grid.h]
        # the non-separable integrand is costly per node but smooth; start coarse
        initial = None if unit.separable else [np.linspace(a, b, 3) for a, b in bounds]
        value, err = adaptive_box(_folded_integrand(unit, grid, cfg), bounds,
                                  abs_tol=abs_tol / 2 ** d, rel_tol=cfg.rel_tol,
                                  initial=initial)
        value, err = value * 2 ** d, err * 2 ** d
    elif method == "direct":
        if d != 1:
            raise UnsupportedDimensionError("direct quadrature is implemented for d = 1 only")
        cutoff = _direct_cutoff(unit, abs_tol / 10.0, cfg.domain_cutoff)
        h = grid.h[0]

        def fun(axes):
            w = axes[0]
            # the full alias sum is 1/h-periodic: evaluate it at the reduced frequency
            shift = np.round(w * h)
            w_red = w - shift / h
            f_red, a_red, _ = axis_alias_sums(unit.family, unit.theta[0], w_red, h, cfg)
            f0 = _axis_value(unit.family, unit.theta[0], w)
            s = f_red + a_red
            a = np.where(shift == 0, a_red, s - f0)
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(s > 0, f0 * a / s, 0.0)

        half = 0.5 / h
        near = min(cutoff, 64 * half)
        breaks = np.arange(int(np.ceil(near / half)) + 1) * half
        breaks = np.concatenate([np.minimum(breaks, near), np.linspace(0, min(cutoff, half), 9)])
        if cutoff > near:
            # far out F^2/S is negligible and the integrand is close to F itself
            breaks = np.concatenate([breaks, np.geomspace(near, cutoff, 400)])
        breaks = np.unique(breaks)
        value, err = adaptive_box(fun, [(0.0, cutoff)], abs_tol=abs_tol / 2,
                                  rel_tol=cfg.rel_tol, initial=[breaks])
        value, err = 2 * value, 2 * err + _tail_mass(unit, cutoff)
    else:
        raise ValueError(f"unknown method {method!r}")
    value *= density.amplitude
    err *= density.amplitude
    return (value, err) if return_error else value


def _direct_cutoff(unit, tail_tol, limit):
    """Smallest radius (capped at ``limit``) whose two-sided tail mass is below tail_tol."""
    lo, hi = 0.0, 1.0
    while _tail_mass(unit, hi) > tail_tol and hi < limit:
        lo, hi = hi, hi * 2
    hi = min(hi, limit)
    if _tail_mass(unit, hi) > tail_tol:
        return hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _tail_mass(unit, mid) > tail_tol:
            lo = mid
        else:
            hi = mid
    return hi


def exponential_error_closed(theta, h):
    """Exact interpolation error for the 1-D density theta / (theta^2 + w^2).

    With ``a = pi theta h``:

        sigma^2 = pi * [1 - tanh(a)/(2a) - (1 - (1 + 2a) e^{-2a}) / (2a sinh 2a)].

    Small ``a`` uses the series ``pi (2a/3 - 8a^3/45 + 64a^5/945 - 128a^7/4725)``;
    large ``a`` uses ``pi (1 - 1/(2a))``, exact to double precision past a = 700.
    """
    if theta <= 0 or h <= 0:
        raise ValueError("theta and h must be positive")
    a = np.pi * theta * h
    if a < 1e-3:
        return float(np.pi * (2 * a / 3 - 8 * a ** 3 / 45 + 64 * a ** 5 / 945
                              - 128 * a ** 7 / 4725))
    if a > 700:
        return float(np.pi * (1 - 1 / (2 * a)))
    third = -np.expm1(-2 * a) - 2 * a * np.exp(-2 * a)
    return float(np.pi * (1 - np.tanh(a) / (2 * a) - third / (2 * a * np.sinh(2 * a))))


def exponential_error_taylor(theta, h):
    """Leading-order error ``(2/3) pi^2 theta h`` for the exponential density."""
    return 2.0 / 3.0 * np.pi ** 2 * theta * h


class ErrorBounds(NamedTuple):
    lower: float
    upper: float
    advisory: bool


def sqexp_error_bounds(theta, h):
    """Two-sided bound on the squared-exponential interpolation error.

    ``(4/3) h sqrt(theta) e^{-1/(8 h^2 theta)} <= sigma^2 <= 7 h sqrt(theta) e^{-1/(8 h^2 theta)}``.
    The bounds are asymptotic in ``theta h^2 -> 0``; outside ``theta h^2 <= 0.25``
    they are returned with ``advisory=True``.
    """
    base = h * math.sqrt(theta) * math.exp(-1.0 / (8 * h * h * theta))
    return ErrorBounds(4.0 / 3.0 * base, 7.0 * base, theta * h * h > 0.25)
