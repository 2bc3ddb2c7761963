"""Finite Radon measures with closed-ball mass queries.

Every potential in the package consumes a measure only through
``ball_mass(x, r)`` (and, for potentials, through a weighted point set).
Three families are provided:

* :class:`AtomicMeasure` -- finitely many weighted points, exact queries.
* :class:`CantorProduct` -- the self-similar equal-split measure on a
  k-fold product of middle Cantor sets, stored as atoms at the midpoints of
  the depth-``d`` cells.  Queries are exact at the atom level, which agrees
  with the continuous measure for all radii well above ``ratio**depth``.
* :class:`KPlanePatch` -- normalised Lebesgue measure on a flat k-cube.
  Ball masses are computed from the continuous measure; atoms (uniform, or
  graded toward a focus point) are produced on demand for potentials.

Balls are closed throughout.
"""
from __future__ import annotations

import itertools
from math import gamma, pi

import numpy as np
from scipy.signal import fftconvolve

from .errors import InvalidDimension, InvalidParams, ZeroMass

# relative slack on the closed-ball test, absorbs rounding in |x - y|
CLOSED_BALL_RTOL = 1e-12


def unit_ball_volume(k: int) -> float:
    return pi ** (k / 2) / gamma(k / 2 + 1)


class Measure:
    """Interface shared by all measure families."""

    n: int
    kind: str = "measure"
    cell_diameter: float = 0.0

    @property
    def total_mass(self) -> float:
        raise NotImplementedError

    @property
    def support_radius(self) -> float:
        raise NotImplementedError

    def ball_mass(self, x, r):
        """Mass of the closed ball ``B(x, r)``; ``r`` may be an array."""
        raise NotImplementedError

    def scaled(self, c: float) -> "Measure":
        raise NotImplementedError

    def atoms(self, focus=None, **kw) -> tuple[np.ndarray, np.ndarray]:
        """Weighted points ``(points, weights)`` representing the measure."""
        raise NotImplementedError

    def mass_steps(self, x):
        """Breakpoints and ball masses if ``r -> ball_mass(x, r)`` is a step
        function, else ``None``.

        Returns ``(radii, masses)`` with ``ball_mass(x, r) = masses[j]`` for
        ``radii[j] <= r < radii[j + 1]`` and ``0`` below ``radii[0]``.
        """
        return None

    def error_bound(self, r: float) -> float:
        """Bound on ``|ball_mass - continuous mass|`` for radius ``r``."""
        if self.cell_diameter == 0.0:
            return 0.0
        if r <= 0:
            return self.total_mass
        return self.total_mass * min(1.0, self.cell_diameter / r)

    def describe(self) -> dict:
        return {"kind": self.kind, "n": self.n, "total_mass": self.total_mass}


class AtomicMeasure(Measure):
    kind = "atomic"

    def __init__(self, points, weights, n: int | None = None, meta: dict | None = None):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[None, :] if points.size else points.reshape(0, n or 0)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if n is None:
            n = points.shape[1]
        if n < 3:
            raise InvalidDimension(f"need ambient dimension n >= 3, got {n}")
        if points.shape != (weights.size, n):
            raise InvalidParams(f"points {points.shape} do not match {weights.size} weights in R^{n}")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise InvalidParams("weights must be finite and nonnegative")
        self.n = int(n)
        self.points = points
        self.weights = weights
        self.meta = dict(meta or {})
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def support_radius(self) -> float:
        keep = self.weights > 0
        if not np.any(keep):
            return 0.0
        return float(np.max(np.linalg.norm(self.points[keep], axis=1)))

    def distances(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(self.points - x, axis=1)

    def ball_mass(self, x, r):
        r = np.asarray(r, dtype=float)
        radii, masses = self.mass_steps(x)
        idx = np.searchsorted(radii, r, side="right")
        out = np.where(idx > 0, masses[np.maximum(idx - 1, 0)], 0.0) if radii.size else np.zeros_like(r)
        return out if out.ndim else float(out)

    def mass_steps(self, x):
        d = self.distances(x)
        keep = self.weights > 0
        d, w = d[keep], self.weights[keep]
        order = np.argsort(d, kind="stable")
        d, w = d[order] / (1.0 + CLOSED_BALL_RTOL), np.cumsum(w[order])
        if d.size == 0:
            return d, w
        # collapse ties so that radii are strictly increasing
        last = np.append(d[1:] != d[:-1], True)
        return d[last], w[last]

    def scaled(self, c: float) -> "AtomicMeasure":
        return self._replace(weights=self.weights * float(c))

    def _replace(self, **kw):
        obj = object.__new__(type(self))
        obj.__dict__.update(self.__dict__)
        for key, val in kw.items():
            val = np.asarray(val, dtype=float)
            val.setflags(write=False)
            setattr(obj, key, val)
        return obj

    def atoms(self, focus=None, **kw):
        return self.points, self.weights

    def describe(self) -> dict:
        d = super().describe()
        d["atoms"] = int(self.weights.size)
        d.update(self.meta)
        return d


def dirac(point, weight: float = 1.0) -> AtomicMeasure:
    p = np.asarray(point, dtype=float)
    return AtomicMeasure(p[None, :], [weight])


def merge(*measures: AtomicMeasure) -> AtomicMeasure:
    """Sum of atomic measures (atoms are concatenated, not coalesced)."""
    n = measures[0].n
    pts = np.concatenate([m.atoms()[0] for m in measures])
    wts = np.concatenate([m.atoms()[1] for m in measures])
    return AtomicMeasure(pts, wts, n=n)


def normalize(mu: Measure) -> Measure:
    """Rescale to a probability measure."""
    total = mu.total_mass
    if total <= 0:
        raise ZeroMass("cannot normalise a measure of zero mass")
    if total == 1.0:
        return mu
    return mu.scaled(1.0 / total)


# ---------------------------------------------------------------------------
# Cantor products


def cantor_points(ratio: float, depth: int) -> np.ndarray:
    """Midpoints of the ``2**depth`` cells of the depth-``depth`` iterate of
    the Cantor construction on [0, 1] keeping two end intervals of length
    ``ratio``."""
    left = np.zeros(1)
    for i in range(depth):
        step = (1.0 - ratio) * ratio**i
        left = np.concatenate([left, left + step])
    left.sort()
    return left + 0.5 * ratio**depth


class CantorProduct(AtomicMeasure):
    kind = "cantor"

    def __init__(self, ratio: float, depth: int, k: int, n: int, mass: float = 1.0,
                 scale: float = 1.0, offset=None):
        if not 0.0 < ratio <= 0.5:
            raise InvalidParams(f"Cantor ratio must lie in (0, 1/2], got {ratio}")
        if depth < 1:
            raise InvalidParams("Cantor depth must be >= 1")
        if not 1 <= k <= n:
            raise InvalidDimension(f"Cantor embedding dimension k={k} must satisfy 1 <= k <= n={n}")
        pts1 = cantor_points(ratio, depth)
        grid = np.stack(np.meshgrid(*([pts1] * k), indexing="ij"), axis=-1).reshape(-1, k)
        pts = np.zeros((grid.shape[0], n))
        pts[:, :k] = scale * grid
        if offset is not None:
            pts += np.asarray(offset, dtype=float)
        weights = np.full(grid.shape[0], mass / grid.shape[0])
        super().__init__(pts, weights, n=n)
        self.ratio = float(ratio)
        self.depth = int(depth)
        self.k = int(k)
        self.scale = float(scale)
        self.offset = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
        self.cell_diameter = scale * ratio**depth * np.sqrt(k)

    @property
    def dimension(self) -> float:
        """Similarity dimension ``k log 2 / log(1/ratio)``."""
        return self.k * np.log(2.0) / np.log(1.0 / self.ratio)

    def cantor_samples(self, level: int) -> np.ndarray:
        """Corner points of the level-``level`` cells; all lie in the set."""
        left = cantor_points(self.ratio, level) - 0.5 * self.ratio**level
        ends = np.unique(np.concatenate([left, left + self.ratio**level]))
        grid = np.stack(np.meshgrid(*([ends] * self.k), indexing="ij"), axis=-1).reshape(-1, self.k)
        out = np.zeros((grid.shape[0], self.n))
        out[:, : self.k] = self.scale * grid
        return out + self.offset

    def describe(self) -> dict:
        d = super().describe()
        d.update(ratio=self.ratio, depth=self.depth, k=self.k, dimension=self.dimension)
        return d


def make_cantor_measure(ratio, depth, k, n, mass=1.0, scale=1.0, offset=None) -> CantorProduct:
    return CantorProduct(ratio, depth, k, n, mass=mass, scale=scale, offset=offset)


# ---------------------------------------------------------------------------
# flat k-cubes


def _box_ball_fraction(lo: np.ndarray, hi: np.ndarray, radius: float, bins: int = 2048) -> float:
    """``P(sum_i T_i**2 <= radius**2)`` with ``T_i`` uniform on ``[lo_i, hi_i]``.

    Only the parts of the distributions of ``T_i**2`` below ``radius**2``
    matter, so each is binned on ``[0, radius**2]`` and the binned
    distributions are convolved.
    """
    k = lo.size
    top = radius * radius
    width = top / bins
    root = np.sqrt(np.arange(bins + 1) * width)
    pmf = np.ones(1)
    for a, b in zip(lo, hi):
        covered = np.clip(np.minimum(root, b) - np.maximum(-root, a), 0.0, None)
        pmf = fftconvolve(pmf, np.diff(covered / (b - a)))[: bins + k]
    pmf = np.clip(pmf, 0.0, None)
    # bin j of the sum collects values near (j + k/2) * width
    centers = np.concatenate([[0.0], (np.arange(pmf.size) + 0.5 * k) * width])
    cdf = np.concatenate([[0.0], np.cumsum(pmf)])
    return float(min(np.interp(top, centers, cdf), 1.0))


class KPlanePatch(Measure):
    """Uniform measure on the cube ``origin + frame.T @ [-side/2, side/2]^k``."""

    kind = "kplane"

    def __init__(self, k: int, side: float, resolution: int, n: int, origin=None, frame=None,
                 mass: float | None = None):
        if k > n or k < 1:
            raise InvalidDimension(f"patch dimension k={k} must satisfy 1 <= k <= n={n}")
        if resolution < 2:
            raise InvalidParams("resolution must be >= 2")
        if side <= 0:
            raise InvalidParams("side must be positive")
        self.n, self.k = int(n), int(k)
        self.side = float(side)
        self.resolution = int(resolution)
        self.origin = np.zeros(n) if origin is None else np.asarray(origin, dtype=float)
        if frame is None:
            frame = np.eye(n)[:k]
        frame = np.asarray(frame, dtype=float)
        if frame.shape != (k, n) or not np.allclose(frame @ frame.T, np.eye(k), atol=1e-12):
            raise InvalidParams("frame must have k orthonormal rows")
        self.frame = frame
        self.mass = self.side**k if mass is None else float(mass)
        self.cell_diameter = self.side / self.resolution * np.sqrt(k)

    @property
    def total_mass(self) -> float:
        return self.mass

    @property
    def density(self) -> float:
        return self.mass / self.side**self.k

    def corners(self) -> np.ndarray:
        t = np.array(list(itertools.product((-0.5, 0.5), repeat=self.k))) * self.side
        return self.origin + t @ self.frame

    @property
    def support_radius(self) -> float:
        return float(np.max(np.linalg.norm(self.corners(), axis=1)))

    def plane_coords(self, x):
        x = np.asarray(x, dtype=float)
        rel = x - self.origin
        y = rel @ self.frame.T
        d2 = max(float(rel @ rel - y @ y), 0.0)
        return y, d2

    def ball_mass(self, x, r):
        r_arr = np.asarray(r, dtype=float)
        flat = np.atleast_1d(r_arr)
        y, d2 = self.plane_coords(x)
        rad2 = flat**2 - d2
        R = np.sqrt(np.clip(rad2, 0.0, None))
        half = 0.5 * self.side
        lo, hi = -half - y, half - y
        inner = float(np.min(np.minimum(-lo, hi)))  # distance to nearest face
        far = float(np.sqrt(np.sum(np.maximum(lo**2, hi**2))))
        vol = np.zeros_like(flat)
        ck = unit_ball_volume(self.k)
        if inner > 0:
            small = R <= inner
            vol[small] = ck * R[small] ** self.k
        else:
            small = np.zeros_like(R, dtype=bool)
        full = R >= far
        vol[full] = self.side**self.k
        mid = ~(small | full) & (rad2 > 0)
        if np.any(mid):
            if self.k == 1:
                vol[mid] = np.clip(np.minimum(R[mid], hi[0]) - np.maximum(-R[mid], lo[0]), 0.0, None)
            else:
                approx = np.array([_box_ball_fraction(lo, hi, rad) for rad in R[mid]]) * self.side**self.k
                vol[mid] = np.maximum(approx, ck * max(inner, 0.0) ** self.k)
        out = np.minimum(vol * self.density, self.mass)
        out[rad2 < 0] = 0.0
        return out.reshape(r_arr.shape) if r_arr.ndim else float(out[0])

    def scaled(self, c: float) -> "KPlanePatch":
        return KPlanePatch(self.k, self.side, self.resolution, self.n, self.origin, self.frame,
                           mass=self.mass * float(c))

    def atoms(self, focus=None, theta: float = 0.125, min_cell: float | None = None, max_atoms: int = 400_000):
        """Cell-midpoint atoms.

        Without ``focus`` the cube is split into ``resolution**k`` equal
        cells.  With a focus point, cells are further bisected until each is
        no larger than ``theta`` times its distance from the focus (down to
        ``min_cell``), so potentials stay accurate at small distances from
        the focus.
        """
        h = self.side / self.resolution
        ticks = (np.arange(self.resolution) + 0.5) * h - 0.5 * self.side
        centers = np.stack(np.meshgrid(*([ticks] * self.k), indexing="ij"), axis=-1).reshape(-1, self.k)
        sizes = np.full(centers.shape[0], h)
        if focus is not None:
            yf, _ = self.plane_coords(focus)
            if min_cell is None:
                min_cell = h / 64
            signs = np.array(list(itertools.product((-0.25, 0.25), repeat=self.k)))
            while True:
                gap = np.linalg.norm(centers - yf, axis=1) - 0.5 * np.sqrt(self.k) * sizes
                split = (sizes > theta * np.maximum(gap, 0.0)) & (sizes >= 2 * min_cell)
                if not np.any(split):
                    break
                kids = (centers[split][:, None, :] + sizes[split][:, None, None] * signs).reshape(-1, self.k)
                kid_sizes = np.repeat(sizes[split] / 2, signs.shape[0])
                centers = np.concatenate([centers[~split], kids])
                sizes = np.concatenate([sizes[~split], kid_sizes])
                if centers.shape[0] > max_atoms:
                    raise InvalidParams(
                        f"graded atomisation exceeds {max_atoms} atoms; raise min_cell or theta"
                    )
        points = self.origin + centers @ self.frame
        weights = self.density * sizes**self.k
        return points, weights

    def describe(self) -> dict:
        d = super().describe()
        d.update(k=self.k, side=self.side, resolution=self.resolution)
        return d


def make_kplane_measure(k: int, side: float, resolution: int, n: int, origin=None, frame=None) -> KPlanePatch:
    """Lebesgue measure on a flat k-cube of the given side in R^n.

    Total mass is ``side**k``; call :func:`normalize` for a probability
    measure.
    """
    return KPlanePatch(k, side, resolution, n, origin=origin, frame=frame)


def as_atomic(mu: Measure, focus=None, **kw) -> AtomicMeasure:
    if isinstance(mu, AtomicMeasure) and focus is None:
        return mu
    pts, wts = mu.atoms(focus=focus, **kw)
    return AtomicMeasure(pts, wts, n=mu.n)
