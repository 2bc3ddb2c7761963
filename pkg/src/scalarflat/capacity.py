"""Numerical evidence about ``cap(K) = C_{1+2/n, n/2}(K)``.

Two independent routes are offered:

* :func:`capacity_upper` solves the defining convex program on a grid and
  returns the objective of a verified-feasible ``psi``, an upper bound for
  the discretised problem.
* :func:`polarity_certificate` looks for a measure on ``K`` whose Wolff
  potential diverges at every sample, the criterion for ``cap(K) = 0``.
  Finite-depth divergence is evidence, not proof, and certificates say so.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import irfftn, rfftn
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .errors import InvalidParams, MeasureSupportMismatch, NumericBudgetExceeded, SolverStalled
from .measure import CantorProduct, KPlanePatch, Measure
from .potential import (
    WINDOW,
    BesselKernelTable,
    CapacityParams,
    dyadic_wolff_profile,
    is_divergent,
    unit_ball_volume_n,
)


@dataclass
class EvaluationSet:
    """Finite sample of a compact set; ``spacing`` is its covering radius."""

    samples: np.ndarray
    spacing: float
    label: str = "set"

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    def __len__(self):
        return 0 if self.samples.size == 0 else self.samples.shape[0]


def empty_set(n: int) -> EvaluationSet:
    return EvaluationSet(np.zeros((0, n)), 0.0, "empty")


def point_set(point) -> EvaluationSet:
    return EvaluationSet(np.asarray(point, dtype=float)[None, :], 0.0, "point")


def finite_set(points) -> EvaluationSet:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return EvaluationSet(pts, 0.0, "finite")


def kplane_set(k: int, side: float, spacing: float, n: int, origin=None, frame=None) -> EvaluationSet:
    """Grid samples of a flat k-cube, including its faces."""
    m = max(1, int(np.ceil(side / spacing)))
    ticks = np.linspace(-0.5 * side, 0.5 * side, m + 1)
    t = np.stack(np.meshgrid(*([ticks] * k), indexing="ij"), axis=-1).reshape(-1, k)
    origin = np.zeros(n) if origin is None else np.asarray(origin, dtype=float)
    frame = np.eye(n)[:k] if frame is None else np.asarray(frame, dtype=float)
    cover = 0.5 * np.sqrt(k) * side / m
    return EvaluationSet(origin + t @ frame, cover, f"kplane{k}")


def patch_set(mu: KPlanePatch, spacing: float) -> EvaluationSet:
    return kplane_set(mu.k, mu.side, spacing, mu.n, mu.origin, mu.frame)


def cantor_set(mu: CantorProduct, level: int) -> EvaluationSet:
    cell = mu.scale * mu.ratio**level * np.sqrt(mu.k)
    return EvaluationSet(mu.cantor_samples(level), cell, "cantor")


# ---------------------------------------------------------------------------
# discretised capacity program


@dataclass
class CapacityBound:
    """``upper`` is the objective of a feasible grid function.  ``lower`` is
    either ``None`` or the string ``"certificate: polar"``; no numeric lower
    bound is claimed."""

    upper: float
    lower: str | None = None
    method: str = "dual-ascent (L-BFGS-B) on the grid program"
    h: float = 0.0
    grid_shape: tuple = ()
    constraints: int = 0
    kkt_residual: float = 0.0
    dual_value: float = 0.0
    min_constraint: float = float("inf")
    iterations: int = 0
    psi: np.ndarray | None = field(default=None, repr=False)
    constraint_nodes: np.ndarray | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "upper": self.upper,
            "lower": self.lower,
            "method": self.method,
            "h": self.h,
            "grid_shape": list(self.grid_shape),
            "constraints": self.constraints,
            "kkt_residual": self.kkt_residual,
            "dual_value": self.dual_value,
            "min_constraint": self.min_constraint,
            "iterations": self.iterations,
        }


class PlanarKernelOperator:
    """``psi -> (G * psi)(x_j)`` and its adjoint on a centred cubic grid.

    The constraint nodes share their index along some axes ("normal" axes)
    and vary along the others ("plane" axes).  The kernel then depends on
    the normal offset only through its squared length, so both products
    reduce to one plane convolution per distinct squared normal offset.
    """

    def __init__(self, table: BesselKernelTable, h: float, half: int, n: int, nodes: np.ndarray):
        self.h, self.half, self.n = h, half, n
        self.N = 2 * half + 1
        self.cell = h**n
        nodes = np.asarray(nodes, dtype=int)
        const = np.all(nodes == nodes[0], axis=0)
        self.plane = [i for i in range(n) if not const[i]]
        self.normal = [i for i in range(n) if const[i]]
        self.nodes = nodes
        base = nodes[0, self.normal]
        k, N = len(self.plane), self.N
        # squared normal offsets of every normal index tuple
        qgrids = np.meshgrid(*[np.arange(N) - b for b in base], indexing="ij") if self.normal else []
        r2 = sum(g.astype(np.int64) ** 2 for g in qgrids) if self.normal else np.zeros(())
        r2 = np.asarray(r2).reshape(-1)
        self.groups, self.group_of = np.unique(r2, return_inverse=True)
        self.order = np.argsort(self.group_of, kind="stable")
        self.starts = np.searchsorted(self.group_of[self.order], np.arange(self.groups.size))
        self.plane_idx = tuple(nodes[:, i] for i in self.plane)
        r_cell = h * (1.0 / unit_ball_volume_n(n)) ** (1.0 / n)
        self.self_value = table.ball_average(r_cell)
        if k:
            L = 2 * N - 1
            self.fft_shape = (L,) * k
            offs = np.meshgrid(*([np.arange(-(N - 1), N)] * k), indexing="ij")
            p2 = sum(o.astype(np.int64) ** 2 for o in offs)
            kers = []
            for g in self.groups:
                dist = np.sqrt(p2 + g) * h
                with np.errstate(divide="ignore"):
                    ker = table(np.where(dist > 0, dist, 1.0))
                ker = np.where(dist > 0, ker, self.self_value)
                kers.append(rfftn(ker, self.fft_shape))
            self.kernel_hat = np.stack(kers)
        else:
            dist = np.sqrt(self.groups.astype(float)) * h
            with np.errstate(divide="ignore"):
                ker = table(np.where(dist > 0, dist, 1.0))
            self.kernel_vals = np.where(dist > 0, ker, self.self_value)

    @property
    def grid_shape(self):
        return (self.N,) * self.n

    def _to_plane_first(self, arr):
        return np.moveaxis(arr, self.plane + self.normal, range(self.n))

    def _from_plane_first(self, arr):
        return np.moveaxis(arr, range(self.n), self.plane + self.normal)

    def adjoint(self, lam: np.ndarray) -> np.ndarray:
        """Grid field ``sum_j lam_j G(z - x_j)`` (without the cell weight)."""
        k, N = len(self.plane), self.N
        if k == 0:
            per_group = self.kernel_vals * float(np.sum(lam))
            field_q = per_group[self.group_of]
            return field_q.reshape(self.grid_shape)
        src = np.zeros((N,) * k)
        np.add.at(src, self.plane_idx, lam)
        src_hat = rfftn(src, self.fft_shape)
        sl = tuple(slice(N - 1, 2 * N - 1) for _ in range(k))
        per_group = np.empty((self.groups.size,) + (N,) * k)
        for g in range(self.groups.size):
            per_group[g] = irfftn(src_hat * self.kernel_hat[g], self.fft_shape)[sl]
        out = per_group[self.group_of]  # (NQ, N..k)
        out = np.moveaxis(out, 0, -1).reshape((N,) * k + (N,) * (self.n - k))
        return self._from_plane_first(out)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """``(sum_z G(x_j - z) psi_z)_j`` (without the cell weight)."""
        k, N = len(self.plane), self.N
        arr = self._to_plane_first(psi).reshape((N,) * k + (-1,))
        arr = arr[..., self.order]
        summed = np.add.reduceat(arr, self.starts, axis=-1)  # (N..k, G)
        if k == 0:
            return np.full(self.nodes.shape[0], float(summed @ self.kernel_vals))
        acc = np.zeros(self.fft_shape[:-1] + (self.fft_shape[-1] // 2 + 1,), dtype=complex)
        for g in range(self.groups.size):
            acc += rfftn(summed[..., g], self.fft_shape) * self.kernel_hat[g]
        full = irfftn(acc, self.fft_shape)
        idx = tuple(self.nodes[:, i] + N - 1 for i in self.plane)
        return full[idx]


def capacity_upper(E: EvaluationSet, h: float = 0.1, padding: float = 1.0,
                   params: CapacityParams | None = None, tol: float = 1e-5,
                   max_iter: int = 5000, keep_psi: bool = False, max_nodes: int = 20_000_000) -> CapacityBound:
    """Upper bound for the grid version of

        inf { int psi^q : psi >= 0, G_alpha * psi >= 1 on E }.

    ``psi`` is piecewise constant on a centred grid of spacing ``h`` that
    covers ``E`` with the given padding; the constraint is imposed at the
    grid nodes nearest to the samples of ``E``.  The concave dual over the
    constraint multipliers is maximised; the primal ``psi`` it induces is
    rescaled until every constraint holds with ``1e-6`` slack, so the
    returned value bounds the discrete optimum from above whatever the
    solver accuracy.  ``SolverStalled`` is raised if the projected dual
    gradient (the KKT residual) stays above ``tol``.
    """
    n = E.n
    params = params or CapacityParams(n)
    if h > 0.1 + 1e-12:
        raise InvalidParams("capacity grid spacing must be <= 0.1")
    if padding < 1.0:
        raise InvalidParams("capacity grid padding must be >= 1")
    if len(E) == 0:
        return CapacityBound(upper=0.0, h=h, method="empty set")
    q = params.q
    extent = float(np.max(np.abs(E.samples))) + padding
    half = int(np.ceil(extent / h - 1e-9))
    if float(2 * half + 1) ** n > max_nodes:
        raise NumericBudgetExceeded(
            f"grid of {2 * half + 1}^{n} nodes exceeds the budget of {max_nodes}"
        )
    idx = np.unique(np.rint(E.samples / h).astype(int) + half, axis=0)
    table = BesselKernelTable(params.alpha, n, s_max=max(60.0, 2 * np.sqrt(n) * extent))
    op = PlanarKernelOperator(table, h, half, n, idx)
    cell = op.cell
    M = idx.shape[0]

    def primal(lam):
        g = op.adjoint(lam)
        return (np.maximum(g, 0.0) / q) ** (1.0 / (q - 1.0))

    def neg_dual(lam):
        psi = primal(lam)
        val = np.sum(lam) - (q - 1.0) * cell * np.sum(psi**q)
        grad = 1.0 - cell * op.apply(psi)
        return -val, -grad

    # optimal scaling of a constant multiplier vector as a starting point
    lam0 = np.ones(M)
    psi0 = primal(lam0)
    c = (np.sum(lam0) / (q * cell * np.sum(psi0**q))) ** ((q - 1.0))
    lam = lam0 * c
    iterations = 0
    kkt = np.inf
    for _ in range(8):
        res = minimize(neg_dual, lam, jac=True, method="L-BFGS-B", bounds=[(0.0, None)] * M,
                       options={"maxiter": max_iter, "ftol": 1e-15, "gtol": tol * 1e-2, "maxcor": 30})
        lam = res.x
        iterations += res.nit
        _, ngrad = neg_dual(lam)
        grad = -ngrad
        active = lam > 1e-12 * max(np.max(lam), 1e-300)
        pg = np.where(active, grad, np.maximum(grad, 0.0))
        kkt = float(np.max(np.abs(pg)))
        if kkt <= tol:
            break
    psi = primal(lam)
    dual_value = float(np.sum(lam) - (q - 1.0) * cell * np.sum(psi**q))
    cons = cell * op.apply(psi)
    scale = max(1.0, (1.0 + 1e-6) / float(np.min(cons)))
    psi = psi * scale
    cons = cons * scale
    upper = float(cell * np.sum(psi**q))
    if kkt > tol:
        raise SolverStalled(f"KKT residual {kkt:.2e} above {tol:.0e} after {iterations} iterations")
    return CapacityBound(
        upper=upper,
        h=h,
        grid_shape=op.grid_shape,
        constraints=M,
        kkt_residual=kkt,
        dual_value=dual_value,
        min_constraint=float(np.min(cons)),
        iterations=iterations,
        psi=psi if keep_psi else None,
        constraint_nodes=(idx - half) * h,
    )


def direct_constraint(psi: np.ndarray, h: float, x, params: CapacityParams) -> float:
    """``h^n sum_z G(x - z) psi_z`` by brute force over the grid, for
    post-hoc feasibility checks independent of the FFT operator."""
    n = psi.ndim
    half = (psi.shape[0] - 1) // 2
    table = BesselKernelTable(params.alpha, n, s_max=max(60.0, 4 * np.sqrt(n) * half * h))
    axes = [h * (np.arange(psi.shape[0]) - half)] * n
    z = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    d = np.linalg.norm(z - np.asarray(x, dtype=float), axis=1)
    r_cell = h * (1.0 / unit_ball_volume_n(n)) ** (1.0 / n)
    g = np.where(d < 1e-12, table.ball_average(r_cell), table(np.maximum(d, 1e-300)))
    return float(h**n * g @ psi.reshape(-1))


def capacity_trend(make_set, levels, padding: float = 1.0, params=None, **kw) -> list[CapacityBound]:
    """Upper bounds at each grid spacing in ``levels``; ``make_set(h)`` returns
    the evaluation set to use at spacing ``h``."""
    return [capacity_upper(make_set(h), h=h, padding=padding, params=params, **kw) for h in levels]


# ---------------------------------------------------------------------------
# polarity via Wolff potentials


@dataclass
class PolarityCertificate:
    measure_id: str
    m_max: int
    granted: bool
    min_partial_sum: float
    growth_classes: list
    slopes: list
    min_sum_increasing: bool
    heuristic: bool = True
    note: str = (
        "HEURISTIC: divergence of dyadic Wolff sums at finite depth is evidence, "
        "not proof; the candidate measure is supplied, not constructed"
    )
    profiles: list = field(default_factory=list, repr=False)

    def as_dict(self, with_profiles: bool = False) -> dict:
        d = {
            "measure_id": self.measure_id,
            "m_max": self.m_max,
            "granted": self.granted,
            "min_partial_sum": self.min_partial_sum,
            "growth_classes": list(self.growth_classes),
            "slopes": list(self.slopes),
            "min_sum_increasing": self.min_sum_increasing,
            "heuristic": self.heuristic,
            "note": self.note,
        }
        if with_profiles:
            d["profiles"] = [p.as_dict() for p in self.profiles]
        return d


def support_distance(mu: Measure, K: EvaluationSet) -> float:
    """Largest distance from an atom of ``mu`` to the nearest sample of K."""
    pts, wts = mu.atoms()
    pts = pts[wts > 0]
    if pts.size == 0:
        return 0.0
    if isinstance(mu, KPlanePatch):
        pts = np.concatenate([pts, mu.corners()])
    d, _ = cKDTree(K.samples).query(pts)
    return float(np.max(d))


def polarity_certificate(K: EvaluationSet, mu: Measure, m_max: int = 16,
                         measure_id: str = "mu", check_support: bool = True) -> PolarityCertificate:
    """Per-sample Wolff profiles of ``mu``; granted iff every sample is
    classified divergent and the minimum partial sum over samples keeps
    increasing through the last eight levels."""
    if abs(mu.total_mass - 1.0) > 1e-9:
        raise InvalidParams("polarity certificates need a probability measure")
    if check_support:
        gap = support_distance(mu, K)
        slack = max(K.spacing, mu.cell_diameter) * (1 + 1e-9) + 1e-12
        if gap > slack:
            raise MeasureSupportMismatch(
                f"measure support strays {gap:.3g} from the sampled set (allowed {slack:.3g})"
            )
    profiles = [dyadic_wolff_profile(mu, x, m_max) for x in K.samples]
    classes = [p.tail_trend for p in profiles]
    sums = np.array([p.partial_sums for p in profiles])
    min_sums = np.min(sums, axis=0)
    tail = min_sums[-WINDOW:]
    increasing = bool(np.all(np.diff(tail) > 0))
    granted = bool(all(is_divergent(c) for c in classes) and increasing)
    return PolarityCertificate(
        measure_id=measure_id,
        m_max=m_max,
        granted=granted,
        min_partial_sum=float(min_sums[-1]),
        growth_classes=classes,
        slopes=[p.slope for p in profiles],
        min_sum_increasing=increasing,
        profiles=profiles,
    )


def selfsimilar_polarity(s: float, n: int) -> bool:
    """Analytic polarity rule for mass laws ``mu(B(x, r)) ~ r^s``:
    ``int_0 r^{2s/(n-2) - 2} dr`` diverges iff ``s <= (n-2)/2``."""
    if s < 0:
        raise InvalidParams("mass-law exponent must be >= 0")
    return s <= (n - 2) / 2.0 + 1e-12
