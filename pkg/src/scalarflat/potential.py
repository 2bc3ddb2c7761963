"""Kernels and potentials of measures.

The central object is the Wolff potential for the exponent pair
``(alpha, q) = (1 + 2/n, n/2)``,

    W(x) = int_0^1 mu(B(x, r))^{2/(n-2)} r^{-2} dr,

together with its dyadic discretisation, the Newtonian potential
``u = |x|^{2-n} * mu`` and the Bessel kernel ``G_alpha``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve
from scipy.spatial.distance import cdist

from .errors import DomainError, GridTooCoarse, InvalidParams
from .measure import AtomicMeasure, Measure, as_atomic

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


@dataclass(frozen=True)
class CapacityParams:
    """The exponents ``alpha = 1 + 2/n``, ``q = n/2`` and the dual ``p``
    with ``p + q = p q``."""

    n: int
    alpha: float = field(init=False)
    q: float = field(init=False)
    p: float = field(init=False)

    def __post_init__(self):
        if self.n < 3:
            raise InvalidParams("capacity parameters need n >= 3")
        object.__setattr__(self, "alpha", 1.0 + 2.0 / self.n)
        object.__setattr__(self, "q", self.n / 2.0)
        object.__setattr__(self, "p", self.n / (self.n - 2.0))

    @property
    def exponent(self) -> float:
        """``p - 1 = 2/(n-2)``, the power applied to normalised ball masses."""
        return self.p - 1.0


def wolff_exponent(n: int) -> float:
    return 2.0 / (n - 2.0)


# ---------------------------------------------------------------------------
# growth classification of dyadic sequences

GROWTH_CLASSES = ("bounded", "linear", "geometric", "inconclusive")
WINDOW = 8
FLAT_SLOPE = 0.10
STEEP_SLOPE = 0.15


def growth_slope(terms, window: int = WINDOW) -> float:
    """Per-level log2 growth rate of the last ``window`` terms.

    Computed from the ratio of the sums over the two halves of the window,
    which averages out the bounded oscillation of self-similar mass laws.
    """
    t = np.asarray(terms, dtype=float)[-window:]
    half = t.size // 2
    first, last = float(np.sum(t[:half])), float(np.sum(t[t.size - half :]))
    if first <= 0.0:
        return float("inf") if last > 0.0 else float("-inf")
    if last <= 0.0:
        return float("-inf")
    return float(np.log2(last / first) / (t.size - half))


def classify_growth(terms, window: int = WINDOW) -> str:
    """``geometric`` / ``linear`` partial sums diverge, ``bounded`` converge.

    Slopes between the flat and steep thresholds are ``inconclusive``.
    """
    t = np.asarray(terms, dtype=float)
    if t.size < window:
        return "inconclusive"
    slope = growth_slope(t, window)
    if slope >= STEEP_SLOPE:
        return "geometric"
    if abs(slope) <= FLAT_SLOPE:
        return "linear"
    if slope <= -STEEP_SLOPE:
        return "bounded"
    return "inconclusive"


def is_divergent(growth: str) -> bool:
    return growth in ("linear", "geometric")


def geometric_tail(terms, window: int = 4) -> float:
    """Tail estimate ``sum_{k > m} t_k`` from the last ``window`` terms,
    assuming geometric decay at their mean ratio.  ``inf`` if not decaying."""
    t = np.asarray(terms, dtype=float)[-window:]
    if t.size == 0 or t[-1] == 0.0:
        return 0.0
    if np.any(t[:-1] <= 0.0):
        return float("inf")
    ratio = float((t[-1] / t[0]) ** (1.0 / (t.size - 1)))
    if ratio >= 1.0:
        return float("inf")
    return float(t[-1] * ratio / (1.0 - ratio))


# ---------------------------------------------------------------------------
# Newtonian potential


def newtonian_potential(mu: Measure, x, focus=None, chunk: int = 2_000_000) -> np.ndarray:
    """``u(x) = int |x - y|^{2-n} dmu(y)`` at one point or a stack of points.

    Atomic measures are summed exactly; other measures are replaced by their
    atoms (graded toward ``focus`` when given).  Points sitting on an atom
    return ``inf``.
    """
    pts, wts = as_atomic(mu, focus=focus).atoms() if focus is not None else mu.atoms()
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, mu.n)
    out = np.zeros(flat.shape[0])
    if wts.size == 0:
        return out.reshape(x.shape[:-1]) if x.ndim > 1 else float(out[0])
    half = (mu.n - 2) / 2.0
    step = max(1, chunk // max(wts.size, 1))
    for start in range(0, flat.shape[0], step):
        d2 = cdist(flat[start : start + step], pts, "sqeuclidean")
        with np.errstate(divide="ignore"):
            if mu.n == 4:
                k = 1.0 / d2
            elif mu.n == 6:
                k = 1.0 / (d2 * d2)
            else:
                k = d2**-half
        out[start : start + step] = k @ wts
    return out.reshape(x.shape[:-1]) if x.ndim > 1 else float(out[0])


# ---------------------------------------------------------------------------
# Wolff potentials


def _power_integral(a, b, gam):
    """``int_a^b r^{-gam-1} dr`` (elementwise, ``0 < a <= b``)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if abs(gam) < 1e-14:
        return np.log(b / a)
    return (a ** (-gam) - b ** (-gam)) / gam


def _wolff_integral(mu: Measure, x, power: float, gam: float, r_min: float, r_max: float = 1.0) -> float:
    """``int_{r_min}^{r_max} mu(B(x,r))^power r^{-gam-1} dr``.

    Exact (sum of antiderivative differences) when the ball mass is a step
    function of ``r``; otherwise Gauss-Legendre on each dyadic interval.
    """
    steps = mu.mass_steps(x)
    if steps is not None:
        radii, masses = steps
        if radii.size == 0:
            return 0.0
        lo = np.clip(radii, r_min, r_max)
        hi = np.clip(np.append(radii[1:], r_max), r_min, r_max)
        keep = hi > lo
        return float(np.sum(masses[keep] ** power * _power_integral(lo[keep], hi[keep], gam)))
    total = 0.0
    top = r_max
    while top > r_min:
        bottom = max(top / 2.0, r_min)
        half, mid = 0.5 * (top - bottom), 0.5 * (top + bottom)
        r = mid + half * GL_NODES
        total += half * float(np.sum(GL_WEIGHTS * mu.ball_mass(x, r) ** power * r ** (-gam - 1.0)))
        top = bottom
    return total


@dataclass
class WolffProfile:
    """Dyadic terms ``t_k = (mu(B(x, 2^-k)) / 2^{-k(n-2)})^{2/(n-2)} 2^{-k}``."""

    center: np.ndarray
    n: int
    rho: np.ndarray
    ball_mass: np.ndarray
    terms: np.ndarray
    partial_sums: np.ndarray
    tail_trend: str
    slope: float

    @property
    def m_max(self) -> int:
        return int(self.rho.size - 1)

    @property
    def divergent(self) -> bool:
        return is_divergent(self.tail_trend)

    def linear_fit_deviation(self, window: int = WINDOW) -> float:
        """Largest relative deviation of the last ``window`` partial sums
        from their least-squares line in ``m``."""
        s = self.partial_sums[-window:]
        m = np.arange(s.size, dtype=float)
        coef = np.polyfit(m, s, 1)
        fit = np.polyval(coef, m)
        return float(np.max(np.abs(s - fit) / np.abs(fit)))

    def as_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "rho": self.rho.tolist(),
            "ball_mass": self.ball_mass.tolist(),
            "terms": self.terms.tolist(),
            "partial_sums": self.partial_sums.tolist(),
            "tail_trend": self.tail_trend,
            "slope": self.slope,
        }


def dyadic_wolff_profile(mu: Measure, x, m_max: int = 16) -> WolffProfile:
    if m_max < 4:
        raise InvalidParams("m_max must be >= 4")
    n = mu.n
    e = wolff_exponent(n)
    k = np.arange(m_max + 1)
    rho = 2.0 ** (-k.astype(float))
    mass = np.asarray(mu.ball_mass(x, rho), dtype=float)
    terms = (mass / rho ** (n - 2)) ** e * rho
    sums = np.cumsum(terms)
    return WolffProfile(
        center=np.asarray(x, dtype=float),
        n=n,
        rho=rho,
        ball_mass=mass,
        terms=terms,
        partial_sums=sums,
        tail_trend=classify_growth(terms),
        slope=growth_slope(terms),
    )


@dataclass
class WolffValue:
    value: float
    r_min: float
    profile: WolffProfile

    @property
    def divergent(self) -> bool:
        return self.profile.divergent


def wolff_specialized(mu: Measure, x, r_min: float) -> WolffValue:
    """Truncated ``int_{r_min}^1 mu(B(x,r))^{2/(n-2)} r^{-2} dr`` with the
    dyadic profile down to ``r_min`` for divergence diagnostics."""
    if not 0.0 < r_min < 1.0:
        raise InvalidParams("r_min must lie in (0, 1)")
    value = _wolff_integral(mu, x, wolff_exponent(mu.n), 1.0, r_min)
    m_max = max(4, int(np.ceil(np.log2(1.0 / r_min) - 1e-9)))
    return WolffValue(value, r_min, dyadic_wolff_profile(mu, x, m_max))


def wolff_general(mu: Measure, x, alpha: float, q: float, r_min: float) -> float:
    """Truncated ``int_{r_min}^1 (mu(B(x,d)) / d^{n - alpha q})^{p-1} dd/d``,
    ``p - 1 = 1/(q - 1)``."""
    n = mu.n
    if q <= 1 or alpha <= 0 or alpha * q > n + 1e-12:
        raise InvalidParams(f"need alpha > 0 and 1 < q <= n/alpha, got alpha={alpha}, q={q}, n={n}")
    if not 0.0 < r_min < 1.0:
        raise InvalidParams("r_min must lie in (0, 1)")
    power = 1.0 / (q - 1.0)
    gam = (n - alpha * q) * power
    return _wolff_integral(mu, x, power, gam, r_min)


# ---------------------------------------------------------------------------
# Bessel kernel


def _bessel_check(alpha, n):
    if not 0.0 < alpha < n:
        raise DomainError(f"Bessel kernel needs 0 < alpha < n, got alpha={alpha}, n={n}")


def bessel_kernel(alpha: float, s, n: int, step: float = 0.02) -> np.ndarray:
    """``G_alpha`` at radius ``s`` from the subordination integral

        G(s) = c int_0^inf t^{(alpha-n)/2} exp(-pi s^2/t - t/(4 pi)) dt/t,

    with ``c = 1/((4 pi)^{alpha/2} Gamma(alpha/2))`` forced by
    ``int G = 1``.  The integral is a trapezoid rule in ``log t``, whose
    integrand is log-concave with doubly exponential tails.
    """
    _bessel_check(alpha, n)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0):
        raise DomainError("Bessel kernel is evaluated at s > 0 only")
    flat = s_arr.reshape(-1)
    a = alpha - n
    root = np.sqrt(a * a + 4.0 * flat**2)
    # a + root without cancellation when a < 0
    y_peak = pi * (a + root if a >= 0 else 4.0 * flat**2 / (root - a))
    tau_peak = np.log(y_peak)
    lo = tau_peak - 8.0
    hi = np.maximum(tau_peak, np.log(4 * pi)) + 8.0
    c = 1.0 / ((4 * pi) ** (alpha / 2) * gamma(alpha / 2))
    out = np.empty_like(flat)
    for i, (a_lo, a_hi) in enumerate(zip(lo, hi)):
        tau = np.arange(a_lo, a_hi + step, step)
        phi = 0.5 * a * tau - pi * flat[i] ** 2 * np.exp(-tau) - np.exp(tau) / (4 * pi)
        out[i] = c * step * np.sum(np.exp(phi))
    return out.reshape(s_arr.shape) if s_arr.ndim else float(out[0])


class BesselKernelTable:
    """Spline of ``log G_alpha`` in ``log s`` for fast repeated evaluation."""

    def __init__(self, alpha: float, n: int, s_min: float = 1e-6, s_max: float = 60.0, size: int = 1200):
        _bessel_check(alpha, n)
        self.alpha, self.n = alpha, n
        self.s_min, self.s_max = s_min, s_max
        ls = np.linspace(np.log(s_min), np.log(s_max), size)
        self._spline = CubicSpline(ls, np.log(bessel_kernel(alpha, np.exp(ls), n)))
        self._slope = alpha - n

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        ls = np.log(np.clip(s, self.s_min, self.s_max))
        out = np.exp(self._spline(ls))
        small = s < self.s_min
        if np.any(small):
            out[small] *= (np.maximum(s[small], 1e-30) / self.s_min) ** self._slope
        return np.where(s > self.s_max, 0.0, out)

    def ball_average(self, radius: float) -> float:
        """Mean of ``G`` over the ball ``|x| <= radius``."""
        # substitute r = radius * v^2 to tame the |x|^{alpha-n} endpoint singularity
        v = 0.5 + 0.5 * GL_NODES
        rr = radius * v**2
        integral = np.sum(0.5 * GL_WEIGHTS * self(rr) * rr ** (self.n - 1) * 2.0 * radius * v)
        return float(self.n * integral / radius**self.n)


# ---------------------------------------------------------------------------
# nonlinear potential V = G * (G * mu)^{p-1}


@dataclass(frozen=True)
class Grid:
    """Regular grid ``lo + h * index`` covering an axis-aligned box."""

    lo: tuple
    h: float
    shape: tuple

    @classmethod
    def around(cls, radius: float, h: float, n: int, center=None) -> "Grid":
        center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        m = int(np.ceil(radius / h))
        lo = center - m * h
        return cls(tuple(lo.tolist()), float(h), (2 * m + 1,) * n)

    @property
    def n(self) -> int:
        return len(self.shape)

    def axes(self):
        return [self.lo[i] + self.h * np.arange(self.shape[i]) for i in range(self.n)]

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def covers(self, center, radius: float) -> bool:
        center = np.asarray(center, dtype=float)
        lo = np.asarray(self.lo)
        hi = lo + self.h * (np.asarray(self.shape) - 1)
        return bool(np.all(lo <= center - radius) and np.all(hi >= center + radius))


def _offset_kernel(table: BesselKernelTable, grid: Grid) -> np.ndarray:
    """Kernel sampled on all node offsets, with the ball average at 0."""
    n, h = grid.n, grid.h
    axes = [h * np.arange(-(m - 1), m) for m in grid.shape]
    r = np.sqrt(sum(a**2 for a in np.meshgrid(*axes, indexing="ij")))
    center = tuple(m - 1 for m in grid.shape)
    r[center] = 1.0
    ker = table(r)
    r_cell = h * (1.0 / unit_ball_volume_n(n)) ** (1.0 / n)
    ker[center] = table.ball_average(r_cell)
    return ker


def unit_ball_volume_n(n: int) -> float:
    return pi ** (n / 2) / gamma(n / 2 + 1)


@dataclass
class NonlinearPotential:
    grid: Grid
    inner: np.ndarray
    values: np.ndarray
    ratio_max: float | None = None
    ratio_min: float | None = None


def nonlinear_potential_V(mu: Measure, grid: Grid, params: CapacityParams | None = None,
                          ratio_annulus: tuple | None = None, r_min: float | None = None,
                          center=None) -> NonlinearPotential:
    """Grid values of ``V = G_alpha * (G_alpha * mu)^{p-1}``.

    The inner convolution sums the kernel over atoms (ball-averaged within a
    cell of a node); the outer one is an FFT convolution against the grid
    kernel.  With ``ratio_annulus=(a, b)`` the extreme values of
    ``W_trunc / V`` over nodes with ``a <= |x - center| <= b`` are recorded;
    the comparison constant in ``W <= A V`` is not known in closed form, so
    only the empirical ratio is reported.
    """
    n = mu.n
    params = params or CapacityParams(n)
    if grid.h > 0.05 + 1e-12:
        raise GridTooCoarse(f"grid spacing {grid.h} exceeds 0.05")
    if mu.total_mass > 0 and not grid.covers(np.zeros(n), mu.support_radius + 2.0):
        raise GridTooCoarse("grid must cover the support padded by 2")
    table = BesselKernelTable(params.alpha, n)
    nodes = grid.nodes().reshape(-1, n)
    pts, wts = mu.atoms()
    inner = np.zeros(nodes.shape[0])
    if wts.size:
        r_cell = grid.h * (1.0 / unit_ball_volume_n(n)) ** (1.0 / n)
        g_cell = table.ball_average(r_cell)
        step = max(1, 4_000_000 // wts.size)
        for start in range(0, nodes.shape[0], step):
            d = np.linalg.norm(nodes[start : start + step, None, :] - pts[None, :, :], axis=-1)
            g = np.where(d < r_cell, g_cell, table(np.maximum(d, 1e-300)))
            inner[start : start + step] = g @ wts
    inner = inner.reshape(grid.shape)
    f = inner ** params.exponent
    ker = _offset_kernel(table, grid)
    full = fftconvolve(f, ker, mode="full") * grid.h**n
    sl = tuple(slice(m - 1, 2 * m - 1) for m in grid.shape)
    values = full[sl]
    result = NonlinearPotential(grid, inner, values)
    if ratio_annulus is not None and mu.total_mass > 0:
        center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        a, b = ratio_annulus
        dist = np.linalg.norm(nodes - center, axis=1)
        pick = np.flatnonzero((dist >= a) & (dist <= b))
        r_min = r_min or grid.h
        w = np.array([_wolff_integral(mu, nodes[i], wolff_exponent(n), 1.0, r_min) for i in pick])
        ratio = w / values.reshape(-1)[pick]
        result.ratio_max = float(np.max(ratio))
        result.ratio_min = float(np.min(ratio))
    return result


__all__ = [
    "BesselKernelTable",
    "CapacityParams",
    "Grid",
    "WolffProfile",
    "WolffValue",
    "bessel_kernel",
    "classify_growth",
    "dyadic_wolff_profile",
    "geometric_tail",
    "growth_slope",
    "newtonian_potential",
    "nonlinear_potential_V",
    "wolff_general",
    "wolff_specialized",
]
