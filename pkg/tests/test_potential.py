import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from scalarflat.errors import DomainError, GridTooCoarse, InvalidParams
from scalarflat.measure import AtomicMeasure, dirac, make_kplane_measure, normalize
from scalarflat.potential import (
    BesselKernelTable,
    Grid,
    bessel_kernel,
    classify_growth,
    dyadic_wolff_profile,
    geometric_tail,
    newtonian_potential,
    nonlinear_potential_V,
    wolff_exponent,
    wolff_general,
    wolff_specialized,
)


def two_atoms(n):
    y = np.zeros((2, n))
    y[0, 0], y[1, 1] = 0.3, -0.6
    return AtomicMeasure(y, [0.7, 1.5], n=n)


def quad_wolff(mu, x, power, gam, r_min):
    d = np.sort(np.linalg.norm(mu.points - x, axis=1))
    f = lambda r: (mu.ball_mass(x, r) * r**gam) ** power / r  # noqa: E731
    return quad(f, r_min, 1.0, points=[v for v in d if r_min < v < 1], limit=200)[0]


@pytest.mark.parametrize("n", [3, 4, 5, 6])
@pytest.mark.parametrize("a", [0.1, 0.3, 0.8])
def test_dirac_wolff_any_dimension(n, a):
    x = np.zeros(n)
    x[-1] = a
    got = wolff_specialized(dirac(np.zeros(n)), x, 1e-6).value
    np.testing.assert_allclose(got, 1 / a - 1, rtol=1e-10)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_wolff_specialized_against_quadrature(n):
    mu = two_atoms(n)
    x = np.full(n, 0.05)
    e = wolff_exponent(n)
    got = wolff_specialized(mu, x, 1e-3).value
    # mu^e r^-2 = (mu r^gam)^e / r with gam = -1/e
    np.testing.assert_allclose(got, quad_wolff(mu, x, e, -1 / e, 1e-3), rtol=1e-8)


@pytest.mark.parametrize("alpha,q", [(1.0, 1.5), (0.5, 2.0), (1.2, 2.5)])
def test_wolff_general_against_quadrature(alpha, q):
    n = 4
    mu = two_atoms(n)
    x = np.zeros(n)
    power = 1 / (q - 1)
    got = wolff_general(mu, x, alpha, q, 1e-3)
    np.testing.assert_allclose(got, quad_wolff(mu, x, power, alpha * q - n, 1e-3), rtol=1e-8)


@pytest.mark.parametrize("n", [3, 4, 6])
def test_general_reduces_to_specialized(n):
    mu = two_atoms(n)
    x = np.full(n, -0.1)
    np.testing.assert_allclose(wolff_general(mu, x, 1 + 2 / n, n / 2, 1e-4),
                               wolff_specialized(mu, x, 1e-4).value, rtol=1e-12)
    with pytest.raises(InvalidParams):
        wolff_general(mu, x, 3.0, 3.0, 1e-3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([3, 4, 5]))
def test_dyadic_sandwich_property(seed, n):
    rng = np.random.default_rng(seed)
    mu = AtomicMeasure(rng.uniform(-1, 1, (8, n)), rng.uniform(0, 1, 8), n=n)
    x = rng.uniform(-0.5, 0.5, n)
    t = dyadic_wolff_profile(mu, x, 10).terms
    for m in (1, 4, 10):
        w = wolff_specialized(mu, x, 2.0**-m).value
        tol = 1e-9 * max(1.0, np.sum(t))
        assert 0.5 * np.sum(t[1 : m + 1]) - tol <= w <= np.sum(t[:m]) + tol


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_wolff_terms_homogeneous(seed, c):
    rng = np.random.default_rng(seed)
    n = 4
    mu = AtomicMeasure(rng.uniform(-1, 1, (5, n)), rng.uniform(0.1, 1, 5), n=n)
    x = rng.uniform(-0.5, 0.5, n)
    np.testing.assert_allclose(dyadic_wolff_profile(mu.scaled(c), x).terms,
                               c ** wolff_exponent(n) * dyadic_wolff_profile(mu, x).terms, rtol=1e-12)


def test_growth_classes():
    k = np.arange(17)
    assert classify_growth(2.0**k) == "geometric"
    assert classify_growth(np.ones(17)) == "linear"
    assert classify_growth(2.0**-k) == "bounded"
    assert classify_growth(np.ones(5)) == "inconclusive"
    # a bounded oscillation around a constant is still linear
    assert classify_growth(1 + 0.3 * (-1.0) ** k) == "linear"


def test_geometric_tail_exact_on_geometric_sequence():
    t = 0.5 ** np.arange(10)
    np.testing.assert_allclose(geometric_tail(t), t[-1], rtol=1e-12)
    assert geometric_tail(np.ones(6)) == np.inf


def test_threshold_profiles_n4():
    seg = normalize(make_kplane_measure(1, 0.9, 8, 4))
    patch = normalize(make_kplane_measure(2, 0.6, 8, 4))
    p = dyadic_wolff_profile(seg, np.zeros(4), 16)
    assert p.tail_trend == "linear" and p.linear_fit_deviation() < 0.1
    assert dyadic_wolff_profile(patch, np.zeros(4), 16).tail_trend == "bounded"


def test_newtonian_superposition_and_harmonicity():
    n = 3
    a, b = dirac(np.array([0.2, 0, 0])), dirac(np.array([0, -0.3, 0.1]), 2.0)
    both = AtomicMeasure(np.vstack([a.points, b.points]), [1.0, 2.0], n=n)
    x = np.array([[1.0, 0.5, -0.2], [0.0, 0.0, 0.9]])
    np.testing.assert_allclose(newtonian_potential(both, x),
                               newtonian_potential(a, x) + newtonian_potential(b, x), rtol=1e-14)
    np.testing.assert_allclose(newtonian_potential(a, x[0]), 1 / np.linalg.norm(x[0] - a.points[0]))
    h, x0 = 1e-3, x[0]
    lap = sum(newtonian_potential(both, x0 + h * e) + newtonian_potential(both, x0 - h * e)
              for e in np.eye(n)) - 2 * n * newtonian_potential(both, x0)
    assert abs(lap / h**2) < 1e-4


@pytest.mark.parametrize("alpha,n", [(5 / 3, 3), (1.5, 4), (4 / 3, 6)])
def test_bessel_table_matches_direct(alpha, n):
    s = np.geomspace(1e-5, 20, 40)
    table = BesselKernelTable(alpha, n)
    np.testing.assert_allclose(table(s), bessel_kernel(alpha, s, n), rtol=1e-6)
    # power-law extrapolation below the table
    np.testing.assert_allclose(table(np.array([1e-9])), bessel_kernel(alpha, np.array([1e-9]), n), rtol=1e-4)


def test_bessel_ball_average_against_quadrature():
    alpha, n, R = 5 / 3, 3, 0.05
    table = BesselKernelTable(alpha, n)
    integral = quad(lambda r: table(np.array([r]))[0] * r**2, 0, R, limit=200)[0]
    np.testing.assert_allclose(table.ball_average(R), 3 * integral / R**3, rtol=1e-5)


def test_bessel_domain():
    with pytest.raises(DomainError):
        bessel_kernel(3.0, 1.0, 3)
    with pytest.raises(DomainError):
        bessel_kernel(1.5, 0.0, 3)


def test_nonlinear_potential_grid_checks():
    mu = dirac(np.zeros(3))
    with pytest.raises(GridTooCoarse):
        nonlinear_potential_V(mu, Grid.around(2.5, 0.1, 3))
    with pytest.raises(GridTooCoarse):
        nonlinear_potential_V(mu, Grid.around(1.0, 0.05, 3))
