"""Lengths in the conformal metric ``g = u^{4/(n-2)} g_flat``.

A curve ``c`` has length ``int u(c)^{2/(n-2)} |c'|``.  When ``u`` is the
Newtonian potential of a measure on a compact set ``K``, completeness of
``g`` near ``K`` is decided by whether rays running into ``K`` have infinite
length.  This module measures such rays shell by shell over the dyadic
annuli ``2^{-k-1} < |x - x0| <= 2^{-k}``, compares the shell lengths with
the lower bound coming from ball masses, searches for short rays, and
combines the pieces into a verdict.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np
from scipy.stats import norm, qmc

from .errors import (
    CurveHitsAtom,
    InvalidParams,
    NoAdmissibleDirections,
    NumericBudgetExceeded,
    RayBlocked,
    WolffDivergentAtOrigin,
)
from .geometry import check_dimension
from .measure import AtomicMeasure, KPlanePatch, Measure
from .potential import (
    classify_growth,
    dyadic_wolff_profile,
    geometric_tail,
    growth_slope,
    is_divergent,
    newtonian_potential,
    wolff_exponent,
    wolff_specialized,
)

ATOM_TOL = 1e-9
GL16 = np.polynomial.legendre.leggauss(16)
GL8 = np.polynomial.legendre.leggauss(8)

VERDICTS = ("CompleteEvidence", "IncompleteWitness", "Inconclusive")


# ---------------------------------------------------------------------------
# metric and curves


def _graded_atoms(mu: KPlanePatch, focus, budget: int, min_cell: float):
    """Atoms of a patch graded toward ``focus``, as fine as ``budget`` allows."""
    res = mu.resolution
    coarse_res = min(res, 4)
    attempts = [(res, 0.0625), (res, 0.125), (res, 0.25), (res, 0.5),
                (coarse_res, 0.5), (coarse_res, 1.0), (2, 1.0), (2, 2.0), (2, 4.0)]
    for r, theta in attempts:
        patch = KPlanePatch(mu.k, mu.side, r, mu.n, mu.origin, mu.frame, mass=mu.total_mass)
        try:
            return patch.atoms(focus=focus, theta=theta, min_cell=min_cell, max_atoms=budget)
        except InvalidParams:
            continue
    raise InvalidParams(f"patch cannot be graded within {budget} atoms")


def _coarse_atoms(mu: Measure, limit: int = 4096):
    if isinstance(mu, KPlanePatch):
        res = max(2, min(mu.resolution, int(round(limit ** (1.0 / mu.k)))))
        patch = KPlanePatch(mu.k, mu.side, res, mu.n, mu.origin, mu.frame, mass=mu.total_mass)
        return patch.atoms()
    return mu.atoms()


class ConformalMetric:
    """``g = u^{4/(n-2)} g_flat`` with a positive conformal factor ``u``.

    ``u`` maps an ``(..., n)`` array to ``(...)`` values.  ``atoms`` lists
    the points where ``u`` is infinite; curves must keep clear of them.
    """

    def __init__(self, n: int, u, atoms=None, label: str = "u", measure: AtomicMeasure | None = None,
                 coarse: "ConformalMetric | None" = None):
        self.n = check_dimension(n)
        self.u = u
        self.atoms = np.zeros((0, n)) if atoms is None else np.asarray(atoms, dtype=float).reshape(-1, n)
        self.label = label
        self.measure = measure
        self._coarse = coarse

    @property
    def exponent(self) -> float:
        """Power of ``u`` in the length element, ``2/(n-2)``."""
        return wolff_exponent(self.n)

    @property
    def coarse(self) -> "ConformalMetric":
        return self if self._coarse is None else self._coarse

    def density(self, x) -> np.ndarray:
        return np.asarray(self.u(x), dtype=float) ** self.exponent

    @classmethod
    def flat(cls, n: int) -> "ConformalMetric":
        def one(x):
            x = np.asarray(x, dtype=float)
            return np.ones(x.shape[:-1]) if x.ndim > 1 else 1.0

        return cls(n, one, label="flat")

    @classmethod
    def from_atoms(cls, points, weights, n: int, label: str = "newtonian",
                   coarse: "ConformalMetric | None" = None) -> "ConformalMetric":
        mu = AtomicMeasure(points, weights, n=n)
        keep = mu.weights > 0

        def u(x):
            return newtonian_potential(mu, x)

        return cls(n, u, atoms=mu.points[keep], label=label, measure=mu, coarse=coarse)

    @classmethod
    def from_measure(cls, mu: Measure, focus=None, budget: int = 60_000, m_max: int = 16) -> "ConformalMetric":
        """Newtonian potential of ``mu``.  Patches are atomised with cells
        graded toward ``focus`` so that ``u`` stays accurate on dyadic shells
        around it down to ``2^{-m_max-1}``."""
        if isinstance(mu, KPlanePatch) and focus is not None:
            pts, wts = _graded_atoms(mu, np.asarray(focus, dtype=float), budget, 2.0 ** -(m_max + 3))
        else:
            pts, wts = mu.atoms()
        cpts, cwts = _coarse_atoms(mu)
        coarse = None
        if cwts.size != wts.size or not np.array_equal(cpts, pts):
            coarse = cls.from_atoms(cpts, cwts, mu.n, label=f"{mu.kind}:coarse")
        return cls.from_atoms(pts, wts, mu.n, label=mu.kind, coarse=coarse)

    def scaled(self, c: float) -> "ConformalMetric":
        """Metric of ``c u``; only available for Newtonian metrics."""
        if self.measure is None:
            raise InvalidParams("only Newtonian metrics can be rescaled")
        coarse = None if self._coarse is None else self._coarse.scaled(c)
        mu = self.measure.scaled(c)
        return ConformalMetric.from_atoms(mu.points, mu.weights, self.n, self.label, coarse=coarse)


@dataclass(frozen=True)
class RadialRay:
    """``s -> base + s * direction`` for ``0 < s <= start``, run toward ``base``."""

    base: np.ndarray
    direction: np.ndarray
    start: float = 1.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        norm_d = np.linalg.norm(d)
        if norm_d == 0:
            raise InvalidParams("ray direction must be nonzero")
        object.__setattr__(self, "direction", d / norm_d)
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        if self.start <= 0:
            raise InvalidParams("ray start radius must be positive")

    def point(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return self.base + s[..., None] * self.direction


@dataclass(frozen=True)
class Polyline:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.shape[0] < 2:
            raise InvalidParams("a polyline needs at least two vertices")
        object.__setattr__(self, "vertices", v)


def _segment_atom_distance(atoms: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    if atoms.shape[0] == 0:
        return float("inf")
    ab = b - a
    L2 = float(ab @ ab)
    t = np.zeros(atoms.shape[0]) if L2 == 0 else np.clip((atoms - a) @ ab / L2, 0.0, 1.0)
    return float(np.min(np.linalg.norm(a + t[:, None] * ab - atoms, axis=1)))


def _adaptive_segment(g: ConformalMetric, a: np.ndarray, b: np.ndarray, tol: float,
                      panels: int = 1, max_depth: int = 40) -> float:
    """``int_a^b u^{2/(n-2)} |dx|`` by 16-point Gauss-Legendre, bisecting
    panels until one bisection changes the panel value by at most ``tol``
    (relative)."""
    x16, w16 = GL16
    length = float(np.linalg.norm(b - a))
    if length == 0:
        return 0.0
    edges = np.linspace(0.0, 1.0, panels + 1)
    stack = [(edges[i], edges[i + 1], 0) for i in range(panels - 1, -1, -1)]
    total = 0.0
    while stack:
        lo, hi, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        t = np.concatenate([
            0.5 * (lo + hi) + 0.5 * (hi - lo) * x16,
            0.5 * (lo + mid) + 0.5 * (mid - lo) * x16,
            0.5 * (mid + hi) + 0.5 * (hi - mid) * x16,
        ])
        f = g.density(a + t[:, None] * (b - a))
        coarse = 0.5 * (hi - lo) * (w16 @ f[:16])
        fine = 0.5 * (mid - lo) * (w16 @ f[16:32]) + 0.5 * (hi - mid) * (w16 @ f[32:])
        if abs(fine - coarse) <= tol * abs(fine) or depth >= max_depth:
            total += fine
        else:
            stack.append((mid, hi, depth + 1))
            stack.append((lo, mid, depth + 1))
    return total * length


@dataclass
class RayProfile:
    """Lengths of a radial ray over the shells ``start 2^{-k-1} < s <= start 2^{-k}``."""

    base: np.ndarray
    direction: np.ndarray
    start: float
    radii: np.ndarray
    shell_lengths: np.ndarray
    partial_sums: np.ndarray
    growth: str
    slope: float
    tail: float
    value: float

    @property
    def divergent(self) -> bool:
        return is_divergent(self.growth)

    @property
    def truncated(self) -> float:
        return float(self.partial_sums[-1])

    def as_dict(self) -> dict:
        return {
            "base": self.base.tolist(),
            "direction": self.direction.tolist(),
            "start": self.start,
            "radii": self.radii.tolist(),
            "shell_lengths": self.shell_lengths.tolist(),
            "partial_sums": self.partial_sums.tolist(),
            "growth": self.growth,
            "slope": self.slope,
            "tail": self.tail,
            "value": self.value,
        }


def ray_profile(g: ConformalMetric, ray: RadialRay, m_max: int = 16, tol: float = 1e-10,
                panels: int = 1) -> RayProfile:
    """Shell lengths of ``ray`` for ``k = 0..m_max``.

    ``value`` is ``inf`` when the shell lengths do not decay, the partial sum
    plus a geometric tail estimate when they decay, and the bare partial
    sum when the trend is inconclusive.
    """
    if m_max < 4:
        raise InvalidParams("m_max must be >= 4")
    radii = ray.start * 2.0 ** -np.arange(m_max + 2, dtype=float)
    inner = ray.point(radii[-1])
    outer = ray.point(radii[0])
    if _segment_atom_distance(g.atoms, inner, outer) <= ATOM_TOL:
        raise CurveHitsAtom("ray passes within 1e-9 of an atom")
    lengths = np.array([
        _adaptive_segment(g, ray.point(radii[k + 1]), ray.point(radii[k]), tol, panels)
        for k in range(m_max + 1)
    ])
    growth = classify_growth(lengths)
    sums = np.cumsum(lengths)
    if is_divergent(growth):
        tail, value = float("inf"), float("inf")
    elif growth == "bounded":
        tail = geometric_tail(lengths)
        value = float(sums[-1] + tail)
    else:
        tail, value = float("nan"), float(sums[-1])
    return RayProfile(ray.base, ray.direction, ray.start, radii[:-1], lengths, sums, growth,
                      growth_slope(lengths), tail, value)


@dataclass
class CurveLength:
    value: float
    divergent: bool
    truncated: float
    profile: RayProfile | None = None


def curve_length(g: ConformalMetric, c, m_max: int = 16, tol: float = 1e-10) -> CurveLength:
    """``L_g(c) = int u(c)^{2/(n-2)} |c'|``.

    Polylines are integrated segment by segment.  Radial rays are integrated
    over dyadic shells toward their base point; their length is reported as
    ``inf`` when the shell lengths classify as divergent, and ``truncated``
    holds the length of the part with ``s > start 2^{-m_max-1}``.
    """
    if isinstance(c, RadialRay):
        prof = ray_profile(g, c, m_max, tol)
        return CurveLength(prof.value, prof.divergent, prof.truncated, prof)
    if isinstance(c, Polyline):
        v = c.vertices
        for a, b in zip(v[:-1], v[1:]):
            if _segment_atom_distance(g.atoms, a, b) <= ATOM_TOL:
                raise CurveHitsAtom("polyline passes within 1e-9 of an atom")
        total = sum(_adaptive_segment(g, a, b, tol) for a, b in zip(v[:-1], v[1:]))
        return CurveLength(float(total), False, float(total))
    raise InvalidParams(f"unsupported curve type {type(c).__name__}")


# ---------------------------------------------------------------------------
# shell bounds and probes


@dataclass
class ShellBound:
    k: int
    bound: float
    sampled_min: float | None = None
    holds: bool | None = None


def shell_infimum_bound(mu: Measure, x0, k: int, verify: bool = False, samples: int = 1000,
                        seed: int = 0, metric: ConformalMetric | None = None) -> ShellBound:
    """Lower bound ``5^{-(n-2)} mu(B(x0, r)) / r^{n-2}``, ``r = 2^{-k-2}``,
    for the Newtonian potential on the shell ``2^{-k-1} < |x - x0| < 2^{-k}``.

    Every ``y`` in ``B(x0, r)`` is within ``5 r`` of every point of the
    shell.  With ``verify=True`` the potential is sampled at uniformly
    random shell points and the bound is checked against their minimum.
    """
    if k < 0:
        raise InvalidParams("shell index must be >= 0")
    n = mu.n
    x0 = np.asarray(x0, dtype=float)
    r = 2.0 ** -(k + 2)
    bound = 5.0 ** -(n - 2) * float(mu.ball_mass(x0, r)) / r ** (n - 2)
    if not verify:
        return ShellBound(k, bound)
    g = metric or ConformalMetric.from_measure(mu, focus=x0)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((samples, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    lo, hi = 2.0 ** -(k + 1), 2.0**-k
    rad = (lo**n + rng.random(samples) * (hi**n - lo**n)) ** (1.0 / n)
    vals = np.asarray(g.u(x0 + rad[:, None] * dirs))
    smin = float(np.min(vals))
    return ShellBound(k, bound, smin, bool(smin >= bound))


@dataclass
class ProbeProfile:
    """Shell lengths of a ray into ``x0`` and the matching lower-bound terms
    ``b_k = (5^{-(n-2)} mu(B(x0, 2^{-k-2})) 2^{(k+2)(n-2)})^{2/(n-2)} 2^{-k-1}``."""

    x0: np.ndarray
    direction: np.ndarray
    ray: RayProfile
    bound_terms: np.ndarray
    sound: bool
    bound_growth: str
    wolff_growth: str

    @property
    def divergent(self) -> bool:
        return self.ray.divergent

    @property
    def shell_lengths(self) -> np.ndarray:
        return self.ray.shell_lengths

    def as_dict(self) -> dict:
        d = self.ray.as_dict()
        d.update(
            x0=self.x0.tolist(),
            bound_terms=self.bound_terms.tolist(),
            sound=self.sound,
            bound_growth=self.bound_growth,
            wolff_growth=self.wolff_growth,
            divergent=self.divergent,
        )
        return d


def probe_bound_terms(mu: Measure, x0, m_max: int) -> np.ndarray:
    n = mu.n
    e = wolff_exponent(n)
    k = np.arange(m_max + 1, dtype=float)
    r = 2.0 ** -(k + 2)
    mass = np.asarray(mu.ball_mass(np.asarray(x0, dtype=float), r), dtype=float)
    return (5.0 ** -(n - 2) * mass / r ** (n - 2)) ** e * 2.0 ** -(k + 1)


def divergence_probe(mu: Measure, x0, omega, m_max: int = 16, metric: ConformalMetric | None = None,
                     tol: float = 1e-10) -> ProbeProfile:
    """Walk the ray ``x0 + s omega``, ``0 < s <= 1``, into ``x0``.

    Each shell length is at least the infimum of ``u^{2/(n-2)}`` on the shell
    times the shell width, which gives ``bound_terms``; ``sound`` records that
    every computed length respects its bound.
    """
    x0 = np.asarray(x0, dtype=float)
    g = metric or ConformalMetric.from_measure(mu, focus=x0, m_max=m_max)
    try:
        prof = ray_profile(g, RadialRay(x0, omega, 1.0), m_max, tol)
    except CurveHitsAtom as exc:
        raise RayBlocked(str(exc)) from exc
    bounds = probe_bound_terms(mu, x0, m_max)
    sound = bool(np.all(prof.shell_lengths >= bounds * (1 - 1e-12)))
    wolff = dyadic_wolff_profile(mu, x0, m_max + 2)
    return ProbeProfile(x0, prof.direction, prof, bounds, sound, classify_growth(bounds),
                        wolff.tail_trend)


# ---------------------------------------------------------------------------
# directions and the ray finder


def sobol_directions(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Quasi-uniform unit vectors: scrambled Sobol points pushed through the
    normal quantile function and normalised.  ``count`` is rounded up to a
    power of two."""
    m = int(np.ceil(np.log2(max(count, 2))))
    u = qmc.Sobol(d=n, scramble=True, seed=seed).random_base2(m)
    z = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def ray_clearance(samples: np.ndarray, spacing: float, x0, dirs: np.ndarray) -> np.ndarray:
    """For each direction, the distance from the unit ray at ``x0`` to the
    samples farther than ``2 * spacing`` from ``x0`` (``inf`` if none)."""
    rel = np.asarray(samples, dtype=float) - np.asarray(x0, dtype=float)
    far = rel[np.linalg.norm(rel, axis=1) > 2.0 * spacing]
    if far.shape[0] == 0:
        return np.full(dirs.shape[0], np.inf)
    out = np.empty(dirs.shape[0])
    for i in range(0, dirs.shape[0], 256):
        d = dirs[i : i + 256]
        t = np.clip(far @ d.T, 0.0, 1.0)  # (far, dirs)
        gap = far[:, None, :] - t[:, :, None] * d[None, :, :]
        out[i : i + 256] = np.min(np.linalg.norm(gap, axis=-1), axis=0)
    return out


def _screen(g: ConformalMetric, x0, dirs: np.ndarray, shells: int = 6) -> np.ndarray:
    """Coarse ``int_{2^{-shells-1}}^1 u(x0 + s w)^{2/(n-2)} ds`` per direction."""
    x8, w8 = GL8
    s_parts, w_parts = [], []
    for k in range(shells + 1):
        lo, hi = 2.0 ** -(k + 1), 2.0**-k
        s_parts.append(0.5 * (lo + hi) + 0.5 * (hi - lo) * x8)
        w_parts.append(0.5 * (hi - lo) * w8)
    s, w = np.concatenate(s_parts), np.concatenate(w_parts)
    pts = np.asarray(x0, dtype=float) + s[None, :, None] * dirs[:, None, :]
    with np.errstate(over="ignore"):
        vals = g.density(pts)
    return vals @ w


@dataclass
class RayWitness:
    x0: np.ndarray
    direction: np.ndarray
    value: float
    value_refined: float
    refinement_change: float
    profile: RayProfile
    admissible: int
    directions: int

    def as_dict(self) -> dict:
        return {
            "x0": self.x0.tolist(),
            "direction": self.direction.tolist(),
            "value": self.value,
            "value_refined": self.value_refined,
            "refinement_change": self.refinement_change,
            "profile": self.profile.as_dict(),
            "admissible": self.admissible,
            "directions": self.directions,
        }


def ray_finder(g: ConformalMetric, K, x0=None, n_omega: int = 1024, seed: int = 0, m_max: int = 16,
               candidates: int = 4) -> RayWitness | None:
    """Look for a ray into ``x0`` of finite length.

    Directions are quasi-uniform; those whose unit ray comes within one
    sample spacing of a sample of ``K`` (other than samples within two
    spacings of ``x0``) are discarded.  The admissible ones are ranked by a
    coarse integral of ``u^{2/(n-2)}``, and the best ``candidates`` are
    measured shell by shell.  The shortest ray whose shell lengths decay is
    returned, with its value recomputed on halved quadrature panels; ``None``
    means no candidate ray converged.
    """
    if n_omega < 1000:
        raise InvalidParams("the ray finder needs at least 1000 directions")
    n = g.n
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    samples = K.samples
    if samples.size and np.min(np.linalg.norm(samples - x0, axis=1)) > max(K.spacing, ATOM_TOL):
        raise InvalidParams("ray finder base point must be a point of K")
    dirs = sobol_directions(n, n_omega, seed)
    margin = max(K.spacing, ATOM_TOL)
    clear = ray_clearance(samples, K.spacing, x0, dirs)
    ok = np.flatnonzero(clear > margin)
    if ok.size == 0:
        raise NoAdmissibleDirections("every sampled direction meets the set")
    score = _screen(g.coarse, x0, dirs[ok])
    order = ok[np.argsort(score, kind="stable")]
    best = None
    for i in order[:candidates]:
        try:
            prof = ray_profile(g, RadialRay(x0, dirs[i], 1.0), m_max)
        except CurveHitsAtom:
            continue
        if prof.growth != "bounded":
            continue
        if best is None or prof.value < best.value:
            best = prof
    if best is None:
        return None
    refined = ray_profile(g, RadialRay(x0, best.direction, 1.0), m_max, panels=2)
    change = abs(refined.value - best.value) / abs(best.value)
    return RayWitness(x0, best.direction, best.value, refined.value, change, best, int(ok.size),
                      int(dirs.shape[0]))


# ---------------------------------------------------------------------------
# integrals over balls and cones


def sphere_rule(n: int, m: int, cap: float = pi) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on ``{w in S^{n-1} : angle(w, e_1) <= cap}``.

    Hyperspherical angles: Gauss-Legendre with ``m`` nodes in every polar
    angle (the first one restricted to ``[0, cap]``) and the trapezoid rule
    with ``2m`` nodes in the azimuth.
    """
    x, w = np.polynomial.legendre.leggauss(m)

    def full(dim):  # rule on S^{dim-1} in R^dim
        if dim == 2:
            phi = 2 * pi * np.arange(2 * m) / (2 * m)
            return np.stack([np.cos(phi), np.sin(phi)], axis=1), np.full(2 * m, pi / m)
        return polar(dim, pi)

    def polar(dim, top):
        th = 0.5 * top * (x + 1.0)
        wt = 0.5 * top * w * np.sin(th) ** (dim - 2)
        sub, sw = full(dim - 1)
        dirs = np.concatenate([
            np.repeat(np.cos(th), sub.shape[0])[:, None],
            (np.sin(th)[:, None, None] * sub[None, :, :]).reshape(-1, dim - 1),
        ], axis=1)
        return dirs, np.outer(wt, sw).reshape(-1)

    n = check_dimension(n)
    return polar(n, cap)


def _rotation_to(axis: np.ndarray) -> np.ndarray:
    """Orthogonal matrix sending ``e_1`` to ``axis``."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    e1 = np.zeros_like(a)
    e1[0] = 1.0
    v = e1 - a
    if np.linalg.norm(v) < 1e-15:
        return np.eye(a.size)
    v /= np.linalg.norm(v)
    return np.eye(a.size) - 2.0 * np.outer(v, v)


def sphere_area(n: int) -> float:
    return 2.0 * pi ** (n / 2) / gamma(n / 2)


def _bump(t):
    """Smooth cutoff, 1 for ``t <= 1/2`` and 0 for ``t >= 1``."""
    tau = np.clip(2.0 * (1.0 - np.asarray(t, dtype=float)), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(tau > 0, np.exp(-1.0 / np.maximum(tau, 1e-300)), 0.0)
        b = np.where(tau < 1, np.exp(-1.0 / np.maximum(1.0 - tau, 1e-300)), 0.0)
    return a / (a + b)


def _radial_nodes(edges, width: float, gl=GL16):
    x, w = gl
    s_parts, w_parts = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        pieces = int(np.ceil((hi - lo) / width - 1e-12))
        cuts = np.linspace(lo, hi, pieces + 1)
        for a, b in zip(cuts[:-1], cuts[1:]):
            s_parts.append(0.5 * (a + b) + 0.5 * (b - a) * x)
            w_parts.append(0.5 * (b - a) * w)
    return np.concatenate(s_parts), np.concatenate(w_parts)


@dataclass
class UEstimate:
    lhs: float
    wolff: float
    wolff_truncated: float
    wolff_tail: float
    ratio: float
    level: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def ball_weighted_integral(points, weights, n: int, level: int = 0, angular: int = 24) -> float:
    """``int_{B(0,1)} u^{2/(n-2)} |x|^{-(n-1)} dx`` for the Newtonian
    potential ``u`` of atoms inside ``B(0,1)`` away from the origin.

    A smooth partition of unity isolates each atom in a small ball.  Those
    pieces are integrated in polar coordinates about the atom, where the
    integrand is smooth once the Jacobian absorbs the ``|x - y|^{-2}``
    singularity.  The remainder is integrated in polar coordinates about the
    origin, which absorbs ``|x|^{-(n-1)}``.  ``level`` halves all step sizes.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, n)
    wts = np.asarray(weights, dtype=float).reshape(-1)
    keep = wts > 0
    pts, wts = pts[keep], wts[keep]
    e = wolff_exponent(n)
    mu = AtomicMeasure(pts, wts, n=n)
    norms = np.linalg.norm(pts, axis=1)
    if pts.shape[0] and (np.min(norms) <= 0 or np.max(norms) >= 1):
        raise InvalidParams("atoms must lie in B(0,1) away from the origin")
    radii = 0.5 * np.minimum(norms, 1.0 - norms)
    if pts.shape[0] > 1:
        gap = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
        np.fill_diagonal(gap, np.inf)
        radii = np.minimum(radii, 0.45 * np.min(gap, axis=1))
    m = angular * 2**level
    dirs, dw = sphere_rule(n, m)

    def cutoff(x):
        out = np.ones(x.shape[:-1])
        for y, r in zip(pts, radii):
            out -= _bump(np.linalg.norm(x - y, axis=-1) / r)
        return out

    # origin-centred part
    edges = [0.0, 1.0]
    for y_n, r in zip(norms, radii):
        edges += [y_n - r, y_n - 0.5 * r, y_n + 0.5 * r, y_n + r]
    edges = np.unique(np.clip(edges, 0.0, 1.0))
    s, sw = _radial_nodes(edges, 0.05 / 2**level)
    total = 0.0
    for i in range(0, dirs.shape[0], 512):
        d = dirs[i : i + 512]
        x = s[None, :, None] * d[:, None, :]
        f = newtonian_potential(mu, x) ** e * cutoff(x)
        total += float(dw[i : i + 512] @ (f @ sw))
    # atom-centred parts
    for y, r, wy in zip(pts, radii, wts):
        rho, rw = _radial_nodes(np.array([0.0, 0.5 * r, r]), 0.5 * r / 2**level)
        for i in range(0, dirs.shape[0], 512):
            d = dirs[i : i + 512]
            x = y + rho[None, :, None] * d[:, None, :]
            scaled_u = newtonian_potential(mu, x) * rho ** (n - 2)
            f = scaled_u**e * rho ** (n - 3) * np.linalg.norm(x, axis=-1) ** (1 - n) * _bump(rho / r)
            total += float(dw[i : i + 512] @ (f @ rw))
    return total


def verify_u_estimate(mu: Measure, level: int = 0, m_max: int = 20, angular: int = 24,
                      max_atoms: int = 64) -> UEstimate:
    """Compare ``int_{B(0,1)} u^{2/(n-2)} |x|^{-(n-1)} dx`` with the Wolff
    potential of ``mu`` at the origin, ``u`` being the Newtonian potential.

    The Wolff potential is the exact truncated integral down to
    ``2^{-m_max}`` plus a geometric tail estimate from the last four dyadic
    terms.
    """
    n = mu.n
    origin = np.zeros(n)
    prof = dyadic_wolff_profile(mu, origin, m_max)
    if prof.divergent:
        raise WolffDivergentAtOrigin("Wolff potential at the origin classifies divergent")
    if float(mu.ball_mass(origin, 0.0)) > 0:
        raise WolffDivergentAtOrigin("the origin carries an atom")
    pts, wts = mu.atoms()
    if np.count_nonzero(wts) > max_atoms:
        raise NumericBudgetExceeded(f"{np.count_nonzero(wts)} atoms exceed the quadrature budget of {max_atoms}")
    lhs = ball_weighted_integral(pts, wts, n, level, angular)
    trunc = wolff_specialized(mu, origin, 2.0**-m_max).value
    tail = geometric_tail(prof.terms)
    wolff = trunc + tail
    ratio = lhs / wolff if wolff > 0 else float("inf")
    return UEstimate(lhs, wolff, trunc, tail, ratio, level)


@dataclass
class FubiniReport:
    ray_side: float
    volume_side: float
    discrepancy: float
    cap_area: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def fubini_identity_check(g: ConformalMetric, axis, half_angle: float, angular: int = 24,
                          qmc_power: int = 15, seed: int = 0, levels: int = 10) -> FubiniReport:
    """Both sides of

        int_cap int_0^1 u(s w)^{2/(n-2)} ds dw = int_cone u^{2/(n-2)} |x|^{-(n-1)} dx

    for the cone over a spherical cap of half-angle ``half_angle`` about
    ``axis``.  The left side integrates along rays (product Gauss rule on
    the cap, Gauss-Legendre in ``s``).  The right side is computed in
    Cartesian coordinates: the cone is cut into the pieces
    ``2^{-j-1} < |x| <= 2^{-j}``, each averaged with the same scrambled
    Sobol points over a box around it; below ``eps = 2^{-levels}`` the
    integrand is frozen at its value at ``eps/2`` on the axis.
    """
    n = g.n
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    cos_b = np.cos(half_angle)
    if g.atoms.shape[0]:
        r = np.linalg.norm(g.atoms, axis=1)
        near = r <= 1.0 + 1e-12
        if np.any(r[near] == 0) or np.any(g.atoms[near] @ axis >= cos_b * r[near]):
            raise InvalidParams("the cone must avoid the singular set")
    rot = _rotation_to(axis)
    dirs, dw = sphere_rule(n, angular, cap=half_angle)
    dirs = dirs @ rot.T
    s, sw = _radial_nodes(np.array([0.0, 1.0]), 0.125)
    x = s[None, :, None] * dirs[:, None, :]
    lhs = float(dw @ (g.density(x) @ sw))
    cap_area = float(np.sum(dw))

    lateral = 1.0 if half_angle >= pi / 2 else np.sin(half_angle)
    lo = np.full(n, -lateral)
    hi = np.full(n, lateral)
    lo[0], hi[0] = min(0.0, cos_b), 1.0
    unit = lo + (hi - lo) * qmc.Sobol(d=n, scramble=True, seed=seed).random_base2(qmc_power)
    box = float(np.prod(hi - lo))
    rhs = 0.0
    for j in range(levels):
        scale = 2.0**-j
        pts = scale * unit @ rot.T
        r = np.linalg.norm(pts, axis=1)
        inside = (r > 0.5 * scale) & (r <= scale) & (pts @ axis >= cos_b * r)
        vals = g.density(pts[inside]) * r[inside] ** (1 - n)
        rhs += box * scale**n * float(np.sum(vals)) / unit.shape[0]
    eps = 2.0**-levels
    rhs += eps * cap_area * float(g.density(0.5 * eps * axis))
    return FubiniReport(lhs, rhs, abs(lhs - rhs) / abs(rhs), cap_area)


# ---------------------------------------------------------------------------
# verdict


@dataclass
class CompletenessReport:
    verdict: str
    probes: list
    witness: RayWitness | None
    parameters: dict
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "probes": [p.as_dict() for p in self.probes],
            "witness": None if self.witness is None else self.witness.as_dict(),
            "parameters": dict(self.parameters),
            "notes": list(self.notes),
        }


def probe_samples(K, count: int, seed: int = 0) -> np.ndarray:
    """Indices of the samples to probe: the one nearest the centroid, the
    first one, then seeded random picks."""
    pts = K.samples
    if pts.shape[0] == 0:
        return np.zeros(0, dtype=int)
    picks = [int(np.argmin(np.linalg.norm(pts - pts.mean(axis=0), axis=1))), 0]
    rng = np.random.default_rng(seed)
    picks += [int(i) for i in rng.permutation(pts.shape[0])]
    out = []
    for i in picks:
        if i not in out:
            out.append(i)
        if len(out) == count:
            break
    return np.array(out, dtype=int)


def transverse_directions(K, x0, count: int, seed: int = 0, pool: int = 256,
                          min_angle: float = pi / 4) -> np.ndarray:
    """``count`` directions at ``x0`` keeping far from the samples of ``K``,
    chosen greedily by clearance and pairwise separated by ``min_angle``."""
    dirs = sobol_directions(K.n, pool, seed)
    clear = ray_clearance(K.samples, K.spacing, x0, dirs)
    order = np.argsort(-clear, kind="stable")
    chosen = []
    for i in order:
        if all(dirs[i] @ dirs[j] <= np.cos(min_angle) for j in chosen):
            chosen.append(i)
        if len(chosen) == count:
            break
    return dirs[chosen]


def completeness_verdict(mu: Measure, K, m_max: int = 16, n_omega: int = 1024, seed: int = 0,
                         samples: int = 3, directions: int = 2, budget: int = 60_000) -> CompletenessReport:
    """``CompleteEvidence`` if every probe ray diverges, ``IncompleteWitness``
    if a probe fails to diverge and the ray finder then produces a ray of
    finite length at that sample, ``Inconclusive`` otherwise."""
    params = {"m_max": m_max, "n_omega": n_omega, "seed": seed, "samples": samples,
              "directions": directions}
    probes = []
    open_sample = None
    for idx in probe_samples(K, samples, seed):
        x0 = K.samples[idx]
        g = ConformalMetric.from_measure(mu, focus=x0, budget=budget, m_max=m_max)
        for w in transverse_directions(K, x0, directions, seed):
            p = divergence_probe(mu, x0, w, m_max, metric=g)
            probes.append(p)
            if not p.divergent and open_sample is None:
                open_sample = (x0, g)
    notes = ["candidate measure supplied by the scenario, not constructed"]
    if probes and open_sample is None:
        return CompletenessReport("CompleteEvidence", probes, None, params, notes)
    if open_sample is None:
        return CompletenessReport("Inconclusive", probes, None, params, notes + ["nothing to probe"])
    x0, g = open_sample
    witness = ray_finder(g, K, x0, n_omega, seed, m_max)
    if witness is not None:
        return CompletenessReport("IncompleteWitness", probes, witness, params, notes)
    return CompletenessReport("Inconclusive", probes, None, params, notes)


__all__ = [
    "CompletenessReport",
    "ConformalMetric",
    "CurveLength",
    "Polyline",
    "ProbeProfile",
    "RadialRay",
    "RayProfile",
    "RayWitness",
    "completeness_verdict",
    "curve_length",
    "divergence_probe",
    "fubini_identity_check",
    "ray_finder",
    "shell_infimum_bound",
    "sphere_rule",
    "verify_u_estimate",
]
