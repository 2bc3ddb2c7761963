"""Stereographic projection and the conformal reduction from S^n to R^n.

Points are plain numpy arrays.  Sphere points live in R^{n+1} with the
north pole at ``(0, ..., 0, 1)``; plane points live in R^n.  Every function
accepts a single point or a stack of points along the leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidDimension, NorthPoleSingular, SampleTooCloseToSingularity

POLE_TOL = 1e-9
UNIT_TOL = 1e-12


def check_dimension(n: int) -> int:
    if int(n) != n or n < 3:
        raise InvalidDimension(f"need an integer dimension n >= 3, got {n!r}")
    return int(n)


def north_pole(n: int) -> np.ndarray:
    p = np.zeros(n + 1)
    p[-1] = 1.0
    return p


def stereo_project(p, n: int | None = None) -> np.ndarray:
    """Project sphere points from the north pole onto R^n.

    ``sigma(p) = (p_1, ..., p_n) / (1 - p_{n+1})``.  Raises
    :class:`NorthPoleSingular` for points within ``1e-9`` of the pole.
    """
    p = np.asarray(p, dtype=float)
    if n is not None and p.shape[-1] != n + 1:
        raise InvalidDimension(f"sphere point must have {n + 1} coordinates")
    npole = north_pole(p.shape[-1] - 1)
    if np.any(np.linalg.norm(p - npole, axis=-1) <= POLE_TOL):
        raise NorthPoleSingular("stereographic projection is undefined at the north pole")
    return p[..., :-1] / (1.0 - p[..., -1:])


def stereo_lift(x, n: int | None = None) -> np.ndarray:
    """Inverse stereographic projection R^n -> S^n minus the north pole."""
    x = np.asarray(x, dtype=float)
    if n is not None and x.shape[-1] != n:
        raise InvalidDimension(f"plane point must have {n} coordinates")
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    return np.concatenate([2.0 * x, r2 - 1.0], axis=-1) / (1.0 + r2)


def south_chart(p) -> np.ndarray:
    """Stereographic chart from the south pole, ``p -> p' / (1 + p_{n+1})``."""
    p = np.asarray(p, dtype=float)
    return p[..., :-1] / (1.0 + p[..., -1:])


def south_chart_inverse(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1, keepdims=True)
    return np.concatenate([2.0 * z, 1.0 - r2], axis=-1) / (1.0 + r2)


def conformal_factor_U(x, n: int) -> np.ndarray:
    """``U(x) = (2 / (1 + |x|^2))^{(n-2)/2}``, so that the round metric pulls
    back to ``U^{4/(n-2)} g_flat`` under the inverse projection."""
    n = check_dimension(n)
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    return (2.0 / (1.0 + r2)) ** ((n - 2) / 2.0)


def plane_solution_from_sphere(v: Callable, n: int) -> Callable:
    """Return ``u(x) = U(x) * v(sigma^{-1}(x))`` for a field ``v`` on S^n."""

    def u(x):
        x = np.asarray(x, dtype=float)
        return conformal_factor_U(x, n) * v(stereo_lift(x))

    return u


def sphere_field_from_plane(u: Callable, n: int) -> Callable:
    """Inverse of :func:`plane_solution_from_sphere`: ``v = (u / U) o sigma``."""

    def v(p):
        x = stereo_project(p)
        return u(x) / conformal_factor_U(x, n)

    return v


# ---------------------------------------------------------------------------
# conformal covariance check


@dataclass(frozen=True)
class CovarianceReport:
    steps: tuple
    max_residuals: tuple
    orders: tuple
    order: float
    charts: tuple

    def as_dict(self) -> dict:
        return {
            "steps": list(self.steps),
            "max_residuals": list(self.max_residuals),
            "orders": list(self.orders),
            "order": self.order,
            "charts": list(self.charts),
        }


def _chart_map(chart: str):
    return stereo_lift if chart == "north" else south_chart_inverse


def _conformal_laplacian_residual(v, z: np.ndarray, chart: str, h: float, n: int) -> float:
    """``(4(n-1)/(n-2)) Delta_{g0} f - n(n-1) f`` at chart point ``z``.

    Both stereographic charts carry the metric ``lam^2 g_flat`` with
    ``lam = 2 / (1 + |z|^2)``, where
    ``Delta_g f = lam^{-2} (Delta f + (n-2) grad(log lam) . grad f)``.
    """
    lift = _chart_map(chart)
    eye = np.eye(n) * h
    stencil = np.concatenate([z[None, :], z + eye, z - eye])
    f = v(lift(stencil))
    f0, fp, fm = f[0], f[1 : n + 1], f[n + 1 :]
    lap = np.sum(fp - 2.0 * f0 + fm) / h**2
    grad = (fp - fm) / (2.0 * h)
    r2 = float(z @ z)
    lam = 2.0 / (1.0 + r2)
    grad_log_lam = -2.0 * z / (1.0 + r2)
    lap_g = (lap + (n - 2) * grad_log_lam @ grad) / lam**2
    return 4.0 * (n - 1) / (n - 2) * lap_g - n * (n - 1) * f0


def verify_conformal_covariance(
    u: Callable,
    samples,
    n: int,
    h: float = 0.1,
    levels: int = 3,
    singular_points=None,
) -> CovarianceReport:
    """Finite-difference check that ``v = (u/U) o sigma`` solves the
    conformal Laplace equation on the round sphere.

    ``samples`` are plane points.  Each is moved to the sphere and then to
    whichever stereographic chart (north or south) puts it within radius 2
    of the chart origin.  The residual is measured at steps ``h, h/2, ...``
    and the observed orders ``log2(r_h / r_{h/2})`` are reported.  A harmonic
    ``u`` gives residuals that vanish at second order; anything else leaves
    a residual bounded away from zero.
    """
    n = check_dimension(n)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if singular_points is not None:
        sing = np.atleast_2d(np.asarray(singular_points, dtype=float))
        d = np.linalg.norm(samples[:, None, :] - sing[None, :, :], axis=-1)
        if np.min(d) < 10.0 * h:
            raise SampleTooCloseToSingularity(
                f"sample lies {np.min(d):.3g} from the singular set; need >= {10 * h:.3g}"
            )
    v = sphere_field_from_plane(u, n)
    charts, coords = [], []
    for x in samples:
        if np.linalg.norm(x) <= 2.0:
            charts.append("north")
            coords.append(x)
        else:
            charts.append("south")
            coords.append(south_chart(stereo_lift(x)))
    steps = [h / 2**j for j in range(levels)]
    residuals = []
    for step in steps:
        r = [abs(_conformal_laplacian_residual(v, z, c, step, n)) for z, c in zip(coords, charts)]
        residuals.append(max(r))
    orders = [
        float(np.log2(a / b)) if a > 0 and b > 0 else float("inf")
        for a, b in zip(residuals[:-1], residuals[1:])
    ]
    return CovarianceReport(
        steps=tuple(steps),
        max_residuals=tuple(residuals),
        orders=tuple(orders),
        order=min(orders) if orders else float("nan"),
        charts=tuple(charts),
    )


def newtonian_kernel(center: Sequence[float], n: int, weight: float = 1.0) -> Callable:
    """``x -> weight * |x - center|^{2-n}``, handy as a harmonic test input."""
    c = np.asarray(center, dtype=float)

    def u(x):
        x = np.asarray(x, dtype=float)
        return weight * np.linalg.norm(x - c, axis=-1) ** (2 - n)

    return u
