import numpy as np
import pytest

from scalarflat.capacity import (
    capacity_upper,
    direct_constraint,
    empty_set,
    finite_set,
    kplane_set,
    patch_set,
    point_set,
    polarity_certificate,
    selfsimilar_polarity,
)
from scalarflat.errors import InvalidParams, MeasureSupportMismatch, NumericBudgetExceeded
from scalarflat.measure import dirac, make_kplane_measure, normalize
from scalarflat.potential import CapacityParams


def test_empty_set_has_zero_bound():
    assert capacity_upper(empty_set(3)).upper == 0.0


def test_program_parameter_checks():
    with pytest.raises(InvalidParams):
        capacity_upper(point_set(np.zeros(3)), h=0.2)
    with pytest.raises(InvalidParams):
        capacity_upper(point_set(np.zeros(3)), padding=0.5)
    with pytest.raises(NumericBudgetExceeded):
        capacity_upper(point_set(np.zeros(6)), h=0.1)


def test_returned_psi_is_feasible_by_direct_summation():
    pts = np.array([[0.0, 0.0, 0.0], [0.3, 0.0, 0.0]])
    b = capacity_upper(finite_set(pts), h=0.1, keep_psi=True)
    assert b.min_constraint >= 1.0
    P = CapacityParams(3)
    for x in pts:
        assert direct_constraint(b.psi, b.h, x, P) >= 1.0 - 1e-9
    assert b.kkt_residual <= 1e-5
    # the rescaled primal value can only exceed the dual value
    assert b.upper >= b.dual_value * (1 - 1e-9)


def test_monotone_and_subadditive():
    a = np.array([[0.0, 0.0, 0.0]])
    b = np.array([[0.5, 0.0, 0.0]])
    ca = capacity_upper(finite_set(a), h=0.1).upper
    cb = capacity_upper(finite_set(b), h=0.1).upper
    cab = capacity_upper(finite_set(np.vstack([a, b])), h=0.1).upper
    assert cab >= max(ca, cb) * (1 - 1e-4)
    assert cab <= (ca + cb) * (1 + 1e-4)


def test_translation_by_grid_steps():
    c0 = capacity_upper(point_set(np.zeros(3)), h=0.1).upper
    c1 = capacity_upper(point_set(np.array([0.2, -0.1, 0.0])), h=0.1).upper
    np.testing.assert_allclose(c1, c0, rtol=1e-3)


def test_patch_bound_exceeds_point_bound():
    mu = make_kplane_measure(2, 0.5, 8, 4)
    patch = capacity_upper(patch_set(mu, 0.05), h=0.1).upper
    point = capacity_upper(point_set(np.zeros(4)), h=0.1).upper
    assert patch > 3 * point


def test_certificate_follows_threshold_n4():
    seg = normalize(make_kplane_measure(1, 0.9, 8, 4))
    K = kplane_set(1, 0.9, 0.9 / 32, 4)
    assert polarity_certificate(K, seg).granted
    patch = normalize(make_kplane_measure(2, 0.6, 8, 4))
    K2 = kplane_set(2, 0.6, 0.6 / 8, 4)
    cert = polarity_certificate(K2, patch)
    assert not cert.granted
    assert set(cert.growth_classes) == {"bounded"}
    d = cert.as_dict()
    assert d["heuristic"] is True and "profiles" not in d


def test_certificate_input_checks():
    mu = dirac(np.array([0.4, 0.0, 0.0]))
    with pytest.raises(MeasureSupportMismatch):
        polarity_certificate(point_set(np.zeros(3)), mu)
    with pytest.raises(InvalidParams):
        polarity_certificate(point_set(np.zeros(3)), dirac(np.zeros(3), 2.0))


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_selfsimilar_threshold(n):
    t = (n - 2) / 2
    assert selfsimilar_polarity(t, n)
    assert selfsimilar_polarity(0.0, n)
    assert not selfsimilar_polarity(t + 1e-6, n)
