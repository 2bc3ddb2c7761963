import csv
import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from scalarflat import cli
from scalarflat.errors import ConfigInvalid
from scalarflat.scenario import build, from_mapping, load

POINT = "n: 3\nset: {type: point}\nmeasure: {type: dirac}\n"


def write(tmp_path, text, name="scn.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run_cli(tmp_path, sub, text, *extra):
    out = tmp_path / "out"
    code = cli.main([sub, write(tmp_path, text), "--out", str(out), *extra])
    return code, out


def test_validation_collects_every_problem():
    with pytest.raises(ConfigInvalid) as info:
        from_mapping({"n": 2, "set": {"type": "blob"}, "measure": {"type": "area"},
                      "resolution": {"m_max": 2, "n_omega": 10, "bogus": 1}})
    fields = {f for f, _ in info.value.problems}
    assert {"n", "set.type", "resolution.m_max", "resolution.n_omega", "resolution.bogus"} <= fields


def test_pairing_rules():
    with pytest.raises(ConfigInvalid):
        from_mapping({"n": 4, "set": {"type": "kplane", "k": 2}, "measure": {"type": "arclength"}})
    with pytest.raises(ConfigInvalid):
        from_mapping({"n": 4, "set": {"type": "kplane", "k": 5}, "measure": {"type": "area"}})
    with pytest.raises(ConfigInvalid):
        from_mapping({"n": 3, "set": {"type": "cantor", "ratio": 0.6}, "measure": {"type": "cantor-natural"}})


def test_overrides():
    scn = from_mapping({"n": 3, "set": {"type": "point"}, "measure": {"type": "dirac"}},
                       {"n": 5, "m_max": 10, "seed": 4, "grid": None})
    assert scn.n == 5 and scn.m_max == 10 and scn.seed == 4 and scn.resolution["grid"] == 0.1


def test_finite_set_is_normalised():
    b = build(from_mapping({"n": 3, "set": {"type": "finite", "points": [[0, 0, 0], [4, 0, 0], [0, 6, 0]]},
                            "measure": {"type": "atoms", "points": [[0, 0, 0], [4, 0, 0]], "weights": [1, 3]}}))
    assert np.max(np.linalg.norm(b.K.samples, axis=1)) <= 0.45 + 1e-12
    assert b.measure.total_mass == pytest.approx(1.0)
    np.testing.assert_allclose(b.measure.points, (np.array([[0, 0, 0], [4, 0, 0]]) - b.shift) * b.scale)


def test_wolff_report_and_csv(tmp_path):
    code, out = run_cli(tmp_path, "wolff", POINT, "--mmax", "12")
    assert code == 0
    report = json.loads((out / "wolff.json").read_text())
    jsonschema.validate(report, cli.schema())
    with open(out / "profiles" / "sample_00000.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 13
    assert [float(r["rho_k"]) for r in rows] == [2.0**-k for k in range(13)]
    np.testing.assert_allclose([float(r["term"]) for r in rows], 2.0 ** np.arange(13))
    assert report["profiles"][0]["divergent"] is True


@pytest.mark.parametrize("sub", ["capacity", "probe"])
def test_reports_validate(tmp_path, sub):
    code, out = run_cli(tmp_path, sub, POINT)
    assert code == 0
    report = json.loads((out / f"{sub}.json").read_text())
    jsonschema.validate(report, cli.schema())
    if sub == "probe":
        assert report["verdict"] == "CompleteEvidence"
        # an infinite ray length is written as a string, never as bare Infinity
        assert report["completeness"]["probes"][0]["value"] == "inf"
    else:
        assert report["certificate"]["granted"] is True
        assert report["bounds"]["lower"] == "certificate: polar"


def test_exit_code_invalid_scenario(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "wolff", "n: 3\nset: {type: kplane, k: 4}\nmeasure: {type: area}\n")
    assert code == 2
    assert "set.k" in capsys.readouterr().err


def test_exit_code_support_mismatch(tmp_path):
    text = "n: 3\nset: {type: point}\nmeasure: {type: atoms, points: [[0.3, 0, 0]], weights: [1]}\n"
    code, _ = run_cli(tmp_path, "capacity", text)
    assert code == 2


def test_exit_code_budget(tmp_path):
    code, _ = run_cli(tmp_path, "capacity", POINT, "--n", "6")
    assert code == 3


def test_zero_measure_report(tmp_path):
    text = "n: 3\nset: {type: point}\nmeasure: {type: atoms, points: [], weights: []}\n"
    code, out = run_cli(tmp_path, "probe", text, "--format", "json")
    assert code == 0
    report = json.loads((out / "probe.json").read_text())
    assert report["verdict"] is None


def test_sanitize_non_finite():
    out = cli.sanitize({"a": np.float64("inf"), "b": [float("nan"), -np.inf], "c": np.int64(3), "d": np.bool_(1)})
    assert out == {"a": "inf", "b": ["nan", "-inf"], "c": 3, "d": True}
    json.dumps(out, allow_nan=False)


def test_grid_levels():
    np.testing.assert_allclose(cli.grid_levels(0.1, 4), [0.1, 0.075, 0.05, 0.0375])


def test_bundled_scenarios_load():

    root = Path(__file__).resolve().parents[1]
    files = sorted((root / "scenarios").glob("*.yaml"))
    assert files
    for path in files:
        build(load(path))
    assert json.loads((root / "docs" / "report.schema.json").read_text()) == cli.schema()
