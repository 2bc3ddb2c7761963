"""Scenario files: parsing, validation, normalisation and construction.

A scenario is a YAML mapping::

    name: segment-n4
    n: 4
    set: {type: kplane, k: 1, side: 1.0}
    measure: {type: arclength}
    resolution: {m_max: 16, r_min: 1.0e-5, grid: 0.1, n_omega: 1024}
    seed: 0

Set types are ``point``, ``finite``, ``kplane`` and ``cantor``; measure
types are ``dirac``, ``arclength``, ``area``, ``cantor-natural`` and
``atoms``.  Every set is moved into ``B(0, 1/2)`` by a translation and a
homothety; custom atoms follow the same map.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from .capacity import EvaluationSet, cantor_set, finite_set, kplane_set, point_set
from .errors import ConfigInvalid
from .measure import AtomicMeasure, CantorProduct, KPlanePatch, Measure, normalize

SET_TYPES = ("point", "finite", "kplane", "cantor")
MEASURE_TYPES = ("dirac", "arclength", "area", "cantor-natural", "atoms")
PAIRINGS = {
    "dirac": ("point", "finite"),
    "arclength": ("kplane",),
    "area": ("kplane",),
    "cantor-natural": ("cantor",),
    "atoms": SET_TYPES,
}
RESOLUTION_DEFAULTS = {
    "m_max": 16,
    "r_min": 2.0**-16,
    "grid": 0.1,
    "grid_levels": 3,
    "n_omega": 1024,
    "samples": 3,
    "directions": 2,
    "sample_budget": 400,
    "profile_samples": 3,
}
# radius of the ball the normalised set fits in
FIT_RADIUS = 0.45


@dataclass
class Scenario:
    name: str
    n: int
    set: dict
    measure: dict
    resolution: dict = field(default_factory=lambda: dict(RESOLUTION_DEFAULTS))
    seed: int = 0

    @property
    def m_max(self) -> int:
        return int(self.resolution["m_max"])

    def as_dict(self) -> dict:
        return asdict(self)


def _is_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


def _points(value, n, where, problems):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        problems.append((where, "must be a list of coordinate lists"))
        return None
    if arr.size == 0:
        return np.zeros((0, n))
    arr = np.atleast_2d(arr)
    if arr.ndim != 2 or (n is not None and arr.shape[1] != n):
        problems.append((where, f"each point needs {n} coordinates"))
        return None
    if not np.all(np.isfinite(arr)):
        problems.append((where, "coordinates must be finite"))
        return None
    return arr


def validate(raw: dict) -> Scenario:
    """Check a parsed scenario mapping and fill in defaults.

    All problems are collected and raised together as :class:`ConfigInvalid`.
    """
    problems = []
    if not isinstance(raw, dict):
        raise ConfigInvalid([("<root>", "scenario must be a mapping")])
    name = str(raw.get("name", "scenario"))
    n = raw.get("n")
    if not _is_int(n) or n < 3:
        problems.append(("n", "must be an integer >= 3"))
        n = None
    seed = raw.get("seed", 0)
    if not _is_int(seed) or seed < 0:
        problems.append(("seed", "must be a nonnegative integer"))

    sset = dict(raw.get("set") or {})
    stype = sset.get("type")
    if stype not in SET_TYPES:
        problems.append(("set.type", f"must be one of {', '.join(SET_TYPES)}"))
    elif stype == "point":
        if "point" in sset and n is not None:
            pts = _points(sset["point"], n, "set.point", problems)
            if pts is not None and pts.shape[0] != 1:
                problems.append(("set.point", "must be a single point"))
    elif stype == "finite":
        pts = _points(sset.get("points", []), n, "set.points", problems)
        if pts is not None and pts.shape[0] == 0:
            problems.append(("set.points", "must list at least one point"))
    elif stype == "kplane":
        k = sset.get("k")
        if not _is_int(k) or k < 1:
            problems.append(("set.k", "must be a positive integer"))
        elif n is not None and k > n:
            problems.append(("set.k", f"k={k} exceeds the dimension n={n}"))
        side = sset.setdefault("side", 1.0)
        if not _is_num(side) or side <= 0:
            problems.append(("set.side", "must be a positive number"))
        res = sset.setdefault("resolution", 8)
        if not _is_int(res) or res < 2:
            problems.append(("set.resolution", "must be an integer >= 2"))
    elif stype == "cantor":
        ratio = sset.get("ratio")
        if not _is_num(ratio) or not 0.0 < ratio <= 0.5:
            problems.append(("set.ratio", "must lie in (0, 1/2]"))
        depth = sset.setdefault("depth", 12)
        if not _is_int(depth) or depth < 1:
            problems.append(("set.depth", "must be a positive integer"))
        k = sset.setdefault("k", 1)
        if not _is_int(k) or k < 1:
            problems.append(("set.k", "must be a positive integer"))
        elif n is not None and k > n:
            problems.append(("set.k", f"k={k} exceeds the dimension n={n}"))
        elif _is_int(depth) and 2 ** (depth * k) > 2**16:
            problems.append(("set.depth", "2^(depth*k) atoms exceed the limit 65536"))
        level = sset.setdefault("level", 5)
        if not _is_int(level) or level < 0:
            problems.append(("set.level", "must be a nonnegative integer"))

    meas = dict(raw.get("measure") or {})
    mtype = meas.get("type")
    if mtype not in MEASURE_TYPES:
        problems.append(("measure.type", f"must be one of {', '.join(MEASURE_TYPES)}"))
    elif stype in SET_TYPES and stype not in PAIRINGS[mtype]:
        problems.append(("measure.type", f"'{mtype}' cannot be paired with a '{stype}' set"))
    elif mtype == "arclength" and sset.get("k") != 1:
        problems.append(("measure.type", "arclength needs a kplane set with k = 1"))
    elif mtype == "area" and _is_int(sset.get("k")) and sset.get("k") < 2:
        problems.append(("measure.type", "area needs a kplane set with k >= 2"))
    elif mtype == "atoms":
        pts = _points(meas.get("points", []), n, "measure.points", problems)
        w = np.asarray(meas.get("weights", []), dtype=float).reshape(-1)
        if pts is not None and w.size != pts.shape[0]:
            problems.append(("measure.weights", "need one weight per point"))
        elif np.any(w < 0) or not np.all(np.isfinite(w)):
            problems.append(("measure.weights", "must be finite and nonnegative"))

    res = dict(RESOLUTION_DEFAULTS)
    res.update(raw.get("resolution") or {})
    for key in res:
        if key not in RESOLUTION_DEFAULTS:
            problems.append((f"resolution.{key}", "unknown setting"))
    if not _is_int(res["m_max"]) or res["m_max"] < 4:
        problems.append(("resolution.m_max", "must be an integer >= 4"))
    if not _is_num(res["r_min"]) or not 0.0 < res["r_min"] < 1.0:
        problems.append(("resolution.r_min", "must lie in (0, 1)"))
    if not _is_num(res["grid"]) or not 0.0 < res["grid"] <= 0.1:
        problems.append(("resolution.grid", "must lie in (0, 0.1]"))
    if not _is_int(res["n_omega"]) or res["n_omega"] < 1000:
        problems.append(("resolution.n_omega", "must be an integer >= 1000"))
    for key in ("grid_levels", "samples", "directions", "sample_budget"):
        if not _is_int(res[key]) or res[key] < 1:
            problems.append((f"resolution.{key}", "must be a positive integer"))
    if not _is_int(res["profile_samples"]) or res["profile_samples"] < 0:
        problems.append(("resolution.profile_samples", "must be a nonnegative integer (0 = all)"))
    if problems:
        raise ConfigInvalid(problems)
    for key in ("r_min", "grid"):
        res[key] = float(res[key])
    return Scenario(name=name, n=int(n), set=sset, measure=meas, resolution=res, seed=int(seed))


def load(path, overrides: dict | None = None) -> Scenario:
    """Read a YAML scenario and apply command-line overrides.

    Override keys are ``n``, ``seed`` and any resolution setting.
    """
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigInvalid([("<file>", f"not valid YAML: {exc}")]) from exc
    except OSError as exc:
        raise ConfigInvalid([("<file>", str(exc))]) from exc
    return from_mapping(raw, overrides)


def from_mapping(raw, overrides: dict | None = None) -> Scenario:
    raw = dict(raw or {}) if isinstance(raw, dict) else raw
    if isinstance(raw, dict) and overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ("n", "seed"):
                raw[key] = value
            else:
                raw.setdefault("resolution", {})
                raw["resolution"] = dict(raw["resolution"] or {}, **{key: value})
    return validate(raw)


# ---------------------------------------------------------------------------
# construction


@dataclass
class Built:
    """Normalised measure (probability measure unless it has zero mass), the
    sampled set, and the similarity ``x -> scale * (x - shift)`` applied."""

    scenario: Scenario
    measure: Measure
    K: EvaluationSet
    shift: np.ndarray
    scale: float

    def capacity_set(self, h: float) -> EvaluationSet:
        """Samples with spacing at most ``h / 2`` for the grid program."""
        sset, mu = self.scenario.set, self.measure
        if sset["type"] == "kplane":
            return kplane_set(mu.k, mu.side, 0.5 * h, mu.n, mu.origin, mu.frame)
        if sset["type"] == "cantor":
            level = 0
            while mu.scale * mu.ratio**level * np.sqrt(mu.k) > 0.5 * h and level < mu.depth:
                level += 1
            return cantor_set(mu, level)
        return self.K


def _similarity(points: np.ndarray):
    """Translation to the centroid and shrinking into ``B(0, FIT_RADIUS)``."""
    shift = points.mean(axis=0)
    radius = float(np.max(np.linalg.norm(points - shift, axis=1))) if points.shape[0] else 0.0
    scale = 1.0 if radius <= FIT_RADIUS else FIT_RADIUS / radius
    return shift, scale


def build(scn: Scenario) -> Built:
    n, sset, meas = scn.n, scn.set, scn.measure
    stype, mtype = sset["type"], meas["type"]
    res = scn.resolution
    if stype == "point":
        p = np.asarray(sset.get("point", np.zeros(n)), dtype=float).reshape(n)
        shift, scale = p, 1.0
        K = point_set(np.zeros(n))
        base = AtomicMeasure(np.zeros((1, n)), [1.0], n=n)
    elif stype == "finite":
        pts = np.atleast_2d(np.asarray(sset["points"], dtype=float))
        shift, scale = _similarity(pts)
        pts = scale * (pts - shift)
        K = finite_set(pts)
        base = AtomicMeasure(pts, np.ones(pts.shape[0]), n=n)
    elif stype == "kplane":
        k = int(sset["k"])
        side = float(sset["side"])
        shift = np.zeros(n)
        scale = min(1.0, 2 * FIT_RADIUS / (np.sqrt(k) * side))
        base = KPlanePatch(k, scale * side, int(sset["resolution"]), n)
        m = max(1, int(np.floor(res["sample_budget"] ** (1.0 / k) + 1e-9)) - 1)
        K = kplane_set(k, base.side, base.side / m, n)
    else:
        k = int(sset["k"])
        width = 2 * FIT_RADIUS / np.sqrt(k)
        offset = np.zeros(n)
        offset[:k] = -0.5 * width
        shift, scale = -offset / width, width
        base = CantorProduct(float(sset["ratio"]), int(sset["depth"]), k, n, scale=width, offset=offset)
        K = cantor_set(base, int(sset["level"]))
    if mtype == "atoms":
        pts = np.asarray(meas.get("points", []), dtype=float).reshape(-1, n)
        w = np.asarray(meas.get("weights", []), dtype=float).reshape(-1)
        mu = AtomicMeasure(scale * (pts - shift), w, n=n)
    else:
        mu = base
    if mu.total_mass > 0:
        mu = normalize(mu)
    return Built(scn, mu, K, np.asarray(shift, dtype=float), float(scale))
