import numpy as np
import pytest

from scalarflat.capacity import polarity_certificate, selfsimilar_polarity
from scalarflat.metric import completeness_verdict
from scalarflat.scenario import build, from_mapping

# criterion number -> (passed, detail); filled by test_acceptance.py
CRITERIA = {}


def record(number, passed, detail):
    CRITERIA[number] = (bool(passed), detail)
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        tr.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def corpus_mappings():
    """Points, flat k-patches and middle-gap Cantor sets in dimensions 3 to 6."""
    out = []
    for n in range(3, 7):
        out.append(dict(name=f"point-n{n}", n=n, set={"type": "point"}, measure={"type": "dirac"}))
    for n in range(3, 7):
        for k in range(1, n):
            out.append(dict(name=f"plane{k}-n{n}", n=n, set={"type": "kplane", "k": k, "side": 1.0},
                            measure={"type": "arclength" if k == 1 else "area"},
                            resolution={"sample_budget": 200}))
    for ratio, depth in ((1 / 3, 13), (1 / 4, 11)):
        for n in range(3, 7):
            out.append(dict(name=f"cantor{round(1 / ratio)}-n{n}", n=n,
                            set={"type": "cantor", "ratio": ratio, "depth": depth, "k": 1, "level": 5},
                            measure={"type": "cantor-natural"}))
    return out


def mass_exponent(scn):
    s = scn.set
    if s["type"] == "point":
        return 0.0
    if s["type"] == "kplane":
        return float(s["k"])
    return s["k"] * np.log(2.0) / np.log(1.0 / s["ratio"])


@pytest.fixture(scope="session")
def corpus():
    rows = []
    for raw in corpus_mappings():
        built = build(from_mapping(raw))
        scn = built.scenario
        cert = polarity_certificate(built.K, built.measure, scn.m_max, measure_id=scn.name)
        rep = completeness_verdict(built.measure, built.K, m_max=scn.m_max, n_omega=1024, seed=0)
        rows.append(dict(name=scn.name, n=scn.n, s=mass_exponent(scn), built=built, certificate=cert,
                         report=rep, expected=selfsimilar_polarity(mass_exponent(scn), scn.n)))
    return rows
