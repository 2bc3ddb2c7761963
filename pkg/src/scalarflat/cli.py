"""Command-line driver: ``scalarflat {wolff,capacity,probe,verify,report} SCENARIO``.

Exit codes: 0 success, 2 invalid scenario, 3 numeric budget exhausted,
4 internal error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
import traceback
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import capacity_upper, polarity_certificate
from .errors import (
    ConfigInvalid,
    MeasureSupportMismatch,
    NumericBudgetExceeded,
    SolverStalled,
    WolffDivergentAtOrigin,
)
from .geometry import verify_conformal_covariance
from .measure import AtomicMeasure
from .metric import (
    ConformalMetric,
    _coarse_atoms,
    completeness_verdict,
    fubini_identity_check,
    probe_samples,
    sobol_directions,
    transverse_directions,
    verify_u_estimate,
)
from .potential import (
    Grid,
    _wolff_integral,
    dyadic_wolff_profile,
    newtonian_potential,
    nonlinear_potential_V,
    wolff_exponent,
    wolff_specialized,
)
from .scenario import Built, build, load

SUBCOMMANDS = ("wolff", "capacity", "probe", "verify", "report")
CSV_COLUMNS = ("k", "rho_k", "ball_mass", "term", "partial_sum")
EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_INTERNAL = 0, 2, 3, 4


def schema() -> dict:
    text = resources.files("scalarflat").joinpath("data/report.schema.json").read_text()
    return json.loads(text)


def sanitize(obj):
    """Plain JSON types; non-finite floats become ``"inf"``, ``"-inf"``, ``"nan"``."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


# ---------------------------------------------------------------------------
# stages


def _designated(built: Built) -> np.ndarray:
    count = built.scenario.resolution["profile_samples"]
    total = len(built.K)
    if count == 0 or count >= total:
        return np.arange(total)
    return probe_samples(built.K, count, built.scenario.seed)


def stage_wolff(built: Built) -> dict:
    mu, res = built.measure, built.scenario.resolution
    profiles = []
    for i in _designated(built):
        x = built.K.samples[i]
        prof = dyadic_wolff_profile(mu, x, res["m_max"])
        d = prof.as_dict()
        d.update(sample=int(i), divergent=prof.divergent,
                 wolff_truncated=wolff_specialized(mu, x, res["r_min"]).value)
        profiles.append(d)
    return {"profiles": profiles}


def grid_levels(h: float, count: int) -> list[float]:
    """``h, 3h/4, h/2, 3h/8, h/4, ...``"""
    return [h * (0.75 if j % 2 else 1.0) * 0.5 ** (j // 2) for j in range(count)]


def stage_capacity(built: Built) -> dict:
    scn, mu = built.scenario, built.measure
    res = scn.resolution
    levels = grid_levels(res["grid"], res["grid_levels"])
    bounds = []
    for h in levels:
        b = capacity_upper(built.capacity_set(h), h=h)
        bounds.append(b.as_dict())
    uppers = [b["upper"] for b in bounds]
    change = abs(uppers[-1] - uppers[-2]) / uppers[-2] if len(uppers) > 1 and uppers[-2] > 0 else None
    cert = None
    notes = []
    if mu.total_mass > 0:
        cert_obj = polarity_certificate(built.K, mu, res["m_max"], measure_id=scn.measure["type"])
        cert = cert_obj.as_dict()
    else:
        notes.append("zero measure: no polarity certificate")
    out = {
        "bounds": {
            "upper": uppers[-1],
            "lower": "certificate: polar" if cert and cert["granted"] else None,
            "levels": bounds,
            "decrease_factors": [a / b if b > 0 else None for a, b in zip(uppers[:-1], uppers[1:])],
            "relative_change": change,
            "stable": None if change is None else bool(change <= 0.25),
        },
        "certificate": cert,
    }
    if notes:
        out["notes"] = notes
    return out


def stage_probe(built: Built) -> dict:
    scn = built.scenario
    res = scn.resolution
    if built.measure.total_mass == 0:
        return {"verdict": None, "notes": ["zero measure: nothing to probe"]}
    rep = completeness_verdict(built.measure, built.K, m_max=res["m_max"], n_omega=res["n_omega"],
                               seed=scn.seed, samples=res["samples"], directions=res["directions"])
    return {"verdict": rep.verdict, "completeness": rep.as_dict()}


def _skipped(reason: str) -> dict:
    return {"status": "skipped", "reason": reason}


def _verify_sandwich(built: Built, rng) -> dict:
    mu, n = built.measure, built.scenario.n
    m_max = built.scenario.resolution["m_max"]
    centers = [built.K.samples[i] for i in _designated(built)]
    centers += [c + 0.1 * rng.standard_normal(n) for c in centers for _ in range(3)]
    e = wolff_exponent(n)
    rho = 2.0 ** -np.arange(m_max + 1, dtype=float)
    violations, checks = 0, 0
    for x in centers:
        t = dyadic_wolff_profile(mu, x, m_max).terms
        pieces = np.array([_wolff_integral(mu, x, e, 1.0, rho[j + 1], rho[j]) for j in range(m_max)])
        W = np.concatenate([[0.0], np.cumsum(pieces)])
        for m in range(1, m_max + 1):
            lower = 0.5 * np.sum(t[1 : m + 1])
            upper = np.sum(t[:m])
            slack = 1e-8 * max(1.0, upper)
            checks += 1
            if not (lower - slack <= W[m] <= upper + slack and W[m] <= 4 * np.sum(t[: m + 1]) + slack):
                violations += 1
    return {"status": "pass" if violations == 0 else "fail", "checks": checks, "violations": violations}


def _verify_scaling(built: Built) -> dict:
    mu, n = built.measure, built.scenario.n
    m_max = built.scenario.resolution["m_max"]
    e = wolff_exponent(n)
    worst = 0.0
    for i in _designated(built):
        x = built.K.samples[i]
        base = dyadic_wolff_profile(mu, x, m_max).terms
        for c in (0.5, 2.0, 10.0):
            t = dyadic_wolff_profile(mu.scaled(c), x, m_max).terms
            ref = c**e * base
            nz = ref > 0
            if np.any(nz):
                worst = max(worst, float(np.max(np.abs(t[nz] - ref[nz]) / ref[nz])))
            if np.any(t[~nz] != 0):
                worst = float("inf")
    return {"status": "pass" if worst <= 1e-10 else "fail", "max_relative_error": worst}


def _coarse_measure(built: Built) -> AtomicMeasure:
    pts, w = _coarse_atoms(built.measure)
    return AtomicMeasure(pts, w, n=built.scenario.n)


def _verify_covariance(atomic: AtomicMeasure) -> dict:
    n = atomic.n
    def u(x):
        return newtonian_potential(atomic, x)

    samples = np.zeros((3, n))
    samples[0, 0] = 1.5
    samples[1, :2] = [-1.0, 1.2]
    samples[2, :2] = [3.0, 1.0]
    rep = verify_conformal_covariance(u, samples, n, h=0.05, levels=3, singular_points=atomic.points)
    return {"status": "pass" if rep.order >= 1.8 else "fail", **rep.as_dict()}


def _estimate_base(built: Built, atomic: AtomicMeasure) -> np.ndarray:
    """The origin if it is off the support, else a point 1/4 away from it
    in the direction that keeps farthest from the sampled set."""
    n = built.scenario.n
    if float(np.min(np.linalg.norm(atomic.points, axis=1))) > 0.05:
        return np.zeros(n)
    axis = transverse_directions(built.K, np.zeros(n), 1, built.scenario.seed)[0]
    return 0.25 * axis


ANGULAR = {3: 24, 4: 12, 5: 8, 6: 6}


def _verify_u_estimate(atomic: AtomicMeasure) -> tuple[dict, float | None]:
    # refinement check: half the angular nodes against the full rule
    m = ANGULAR.get(atomic.n, 4)
    try:
        coarse = verify_u_estimate(atomic, angular=m // 2)
        fine = verify_u_estimate(atomic, angular=m)
    except (WolffDivergentAtOrigin, NumericBudgetExceeded) as exc:
        return _skipped(str(exc)), None
    change = max(coarse.ratio, fine.ratio) / min(coarse.ratio, fine.ratio)
    ok = math.isfinite(fine.ratio) and change < 2.0
    return {"status": "pass" if ok else "fail", "lhs": fine.lhs, "wolff": fine.wolff,
            "ratio": fine.ratio, "ratio_coarse": coarse.ratio, "refinement_factor": change,
            "angular": m}, fine.ratio


def _verify_fubini(atomic: AtomicMeasure, seed: int) -> dict:
    n = atomic.n
    m = ANGULAR.get(n, 4)
    work = m ** (n - 2) * 2 * m * 128 * max(1, atomic.points.shape[0])
    if work > 2e9:
        return _skipped("ray quadrature exceeds the work budget")
    g = ConformalMetric.from_atoms(atomic.points, atomic.weights, n)
    dirs = sobol_directions(n, 256, seed)
    r = np.linalg.norm(atomic.points, axis=1)
    cosines = (atomic.points / r[:, None]) @ dirs.T
    best = int(np.argmin(np.max(cosines, axis=0)))
    clearance = float(np.arccos(np.clip(np.max(cosines[:, best]), -1.0, 1.0)))
    half_angle = min(0.5, 0.5 * clearance)
    rep = fubini_identity_check(g, dirs[best], half_angle, angular=m, seed=seed)
    return {"status": "pass" if rep.discrepancy <= 0.02 else "fail", "half_angle": half_angle,
            "axis": dirs[best], **rep.as_dict()}


def _verify_wolff_over_v(atomic: AtomicMeasure) -> dict:
    if atomic.n != 3:
        return _skipped("grid potential is only evaluated for n = 3")
    if atomic.points.shape[0] > 512:
        return _skipped("too many atoms for the grid potential")
    ratios = []
    for h in (0.05, 0.04):
        grid = Grid.around(atomic.support_radius + 2.0 + h, h, 3)
        V = nonlinear_potential_V(atomic, grid, ratio_annulus=(0.1, 0.5), r_min=1e-3)
        ratios.append((V.ratio_min, V.ratio_max))
    ok = all(math.isfinite(hi) for _, hi in ratios) and max(ratios[0][1], ratios[1][1]) < 2 * min(
        ratios[0][1], ratios[1][1])
    return {"status": "pass" if ok else "fail", "ratio_min": ratios[-1][0], "ratio_max": ratios[-1][1],
            "ratio_max_coarse": ratios[0][1]}


def stage_verify(built: Built) -> dict:
    scn = built.scenario
    rng = np.random.default_rng(scn.seed)
    suites, ratios = {}, {}
    if built.measure.total_mass == 0:
        reason = "zero measure"
        return {"verify": {k: _skipped(reason) for k in ("sandwich", "scaling", "covariance",
                                                          "u_estimate", "fubini", "wolff_over_v")},
                "ratios": {"u_estimate": None, "wolff_over_v_max": None}}
    suites["sandwich"] = _verify_sandwich(built, rng)
    suites["scaling"] = _verify_scaling(built)
    atomic = _coarse_measure(built)
    suites["covariance"] = _verify_covariance(atomic)
    base = _estimate_base(built, atomic)
    shifted = AtomicMeasure(atomic.points - base, atomic.weights, n=atomic.n)
    suites["u_estimate"], ratios["u_estimate"] = _verify_u_estimate(shifted)
    suites["u_estimate"]["base_point"] = base
    suites["fubini"] = _verify_fubini(shifted, scn.seed)
    suites["fubini"]["base_point"] = base
    suites["wolff_over_v"] = _verify_wolff_over_v(atomic)
    ratios["wolff_over_v_max"] = suites["wolff_over_v"].get("ratio_max")
    return {"verify": suites, "ratios": ratios}


STAGES = {
    "wolff": ("wolff",),
    "capacity": ("capacity",),
    "probe": ("probe",),
    "verify": ("verify",),
    "report": ("wolff", "capacity", "probe", "verify"),
}
RUNNERS = {"wolff": stage_wolff, "capacity": stage_capacity, "probe": stage_probe, "verify": stage_verify}


def run(subcommand: str, built: Built) -> dict:
    """Assemble the report for ``subcommand``."""
    if subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    scn = built.scenario
    scenario = scn.as_dict()
    scenario["normalization"] = {"shift": built.shift, "scale": built.scale}
    report = {
        "schema_version": "1",
        "subcommand": subcommand,
        "scenario": scenario,
        "provenance": {"version": __version__, "seed": scn.seed, "timings": {}},
    }
    notes = ["candidate measures come from the scenario; none is constructed"]
    for stage in STAGES[subcommand]:
        start = time.perf_counter()
        part = RUNNERS[stage](built)
        report["provenance"]["timings"][stage] = time.perf_counter() - start
        notes += part.pop("notes", [])
        report.update(part)
    report["notes"] = notes
    return sanitize(report)


def numeric_view(report: dict) -> dict:
    """The report without wall-clock timings, for determinism comparisons."""
    out = json.loads(json.dumps(report))
    out["provenance"].pop("timings", None)
    return out


# ---------------------------------------------------------------------------
# output


def fmt(x) -> str:
    """Shortest round-trip decimal form."""
    if isinstance(x, str):
        return x
    return repr(float(x)) if not isinstance(x, (int, np.integer)) else str(int(x))


def profile_rows(profile: dict):
    for k, (rho, mass, term, total) in enumerate(zip(profile["rho"], profile["ball_mass"], profile["terms"],
                                                    profile["partial_sums"])):
        yield (k, rho, mass, term, total)


def emit_csv(profile: dict, path) -> None:
    lines = [",".join(CSV_COLUMNS)]
    lines += [",".join(fmt(v) for v in row) for row in profile_rows(profile)]
    Path(path).write_text("\n".join(lines) + "\n")


def emit_json(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, allow_nan=False) + "\n")


def emit(report: dict, out_dir, fmt_: str = "both") -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt_ in ("json", "both"):
        path = out / f"{report['subcommand']}.json"
        emit_json(report, path)
        written.append(path)
    if fmt_ in ("csv", "both") and report.get("profiles"):
        pdir = out / "profiles"
        pdir.mkdir(exist_ok=True)
        for prof in report["profiles"]:
            path = pdir / f"sample_{prof['sample']:05d}.csv"
            emit_csv(prof, path)
            written.append(path)
    return written


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scalarflat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    helps = {
        "wolff": "dyadic Wolff profiles at the designated samples",
        "capacity": "capacity upper bounds and the polarity certificate",
        "probe": "completeness verdict with probe and ray witnesses",
        "verify": "property suites (sandwich, scaling, covariance, u-estimate, Fubini)",
        "report": "everything above in one report",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("scenario", help="YAML scenario file")
        p.add_argument("--n", type=int, help="ambient dimension")
        p.add_argument("--mmax", type=int, help="deepest dyadic level")
        p.add_argument("--rmin", type=float, help="lower cutoff of truncated Wolff integrals")
        p.add_argument("--grid", type=float, help="coarsest capacity grid spacing")
        p.add_argument("--nomega", type=int, help="directions sampled by the ray finder")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--out", default=None, help="output directory (default: out/<scenario name>)")
        p.add_argument("--format", choices=("json", "csv", "both"), default="both")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"n": args.n, "seed": args.seed, "m_max": args.mmax, "r_min": args.rmin,
                 "grid": args.grid, "n_omega": args.nomega}
    try:
        scn = load(args.scenario, overrides)
        built = build(scn)
        report = run(args.subcommand, built)
        out = args.out or str(Path("out") / scn.name)
        for path in emit(report, out, args.format):
            print(path)
        if report.get("verdict"):
            print(f"verdict: {report['verdict']}")
    except (ConfigInvalid, MeasureSupportMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericBudgetExceeded, SolverStalled) as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
