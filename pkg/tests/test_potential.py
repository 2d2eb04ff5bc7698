import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from schrodinger_weights.grid import Grid, enumerate_cubes
from schrodinger_weights.potential import (
    AlgorithmError, CriticalRadiusProfile, Potential, PsiFunctional, ball_integral, critical_radius,
    psi, regularity_diagnostics, reverse_holder_check, unit_ball_volume,
)

# |y|^a over B(x, r), x on the first axis; values from scipy dblquad in
# polar (n=2) or spherical (n=3) coordinates about x, tolerance 1e-13
BALL_INTEGRAL_QUADRATURE = [
    (2, 1.0, 1.0, 0.5, 0.8102105488852853),
    (2, 0.5, 0.3, 1.0, 2.5836577276906425),
    (2, 3.0, 2.0, 0.7, 14.020895136505253),
    (3, 1.0, 0.5, 1.0, 3.6521014597981343),
    (3, 1.5, 2.0, 0.5, 1.5156515478823849),
    (3, 0.5, 1.0, 2.0, 43.498349195637445),
]


def hermite_radius_1d(x):
    # 2 r^2 x^2 + (2/3) r^4 = 1
    return math.sqrt((-2 * x * x + math.sqrt(4 * x ** 4 + 8.0 / 3.0)) / (4.0 / 3.0))


def hermite_radius_3d(x):
    # omega (r^2 |x|^2 + 3 r^4 / 5) = 1
    w = 4.0 * math.pi / 3.0
    a, b = 3.0 * w / 5.0, w * x * x
    return math.sqrt((-b + math.sqrt(b * b + 4 * a)) / (2 * a))


def test_unit_ball_volume():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)


@pytest.mark.parametrize("n,a,x,r,expected", BALL_INTEGRAL_QUADRATURE)
def test_power_ball_integral_against_quadrature(n, a, x, r, expected):
    pt = np.zeros(n)
    pt[0] = x
    assert float(ball_integral(Potential.power(a), pt, r)) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("n,c", [(1, 0.5), (2, 1.0 / math.pi), (3, 3.0 / (4.0 * math.pi)), (1, 7.0), (3, 0.01)])
def test_constant_potential_radius(n, c):
    expected = 1.0 / math.sqrt(c * unit_ball_volume(n))
    pts = np.random.default_rng(0).uniform(-3, 3, (5, n))
    np.testing.assert_allclose(critical_radius(Potential.constant(c), pts), expected, rtol=1e-6)


@pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 2.5, 7.9])
def test_hermite_radius_closed_forms(x):
    assert critical_radius(Potential.hermite(), [x]) == pytest.approx(hermite_radius_1d(x), rel=1e-6)
    assert critical_radius(Potential.hermite(), [0.0, x, 0.0]) == pytest.approx(hermite_radius_3d(x), rel=1e-6)


@pytest.mark.parametrize("n,a", [(1, 1.0), (2, 0.5), (3, 3.0)])
def test_power_radius_at_origin(n, a):
    expected = ((n + a) / (n * unit_ball_volume(n))) ** (1.0 / (2.0 + a))
    assert critical_radius(Potential.power(a), np.zeros(n)) == pytest.approx(expected, rel=1e-6)


def test_zero_potential_sentinel_and_small_potential():
    assert math.isinf(critical_radius(Potential.zero(), [1.0]))
    assert math.isinf(critical_radius(Potential.constant(1e-8), [0.0]))
    assert critical_radius(Potential.constant(1e-8), [0.0], r_max=1e5) == pytest.approx(1e4 / math.sqrt(2), rel=1e-6)


def test_unreachable_tolerance_raises():
    with pytest.raises(AlgorithmError):
        critical_radius(Potential.hermite(), [0.3], tol=1e-30)


def test_potential_validation_and_round_trip():
    with pytest.raises(ValueError):
        Potential.power(-1.0)
    with pytest.raises(ValueError):
        Potential("coulomb", 1.0)
    assert Potential.from_dict({"family": "harmonic"}) == Potential.hermite()
    assert Potential.from_dict({"family": "power", "exponent": 3.0}) == Potential.power(3.0)
    for V in (Potential.zero(), Potential.constant(2.0), Potential.power(1.5), Potential.hermite()):
        assert Potential.from_dict(V.to_dict()) == V


@given(st.floats(-6, 6), st.floats(0.01, 4.0), st.floats(1.01, 3.0))
def test_normalized_ball_integral_increases(x, r, factor):
    V = Potential.power(2.0)
    F = lambda s: s ** (2 - 1) * float(ball_integral(V, [x], s))
    assert F(r * factor) > F(r)


@given(st.integers(0, 2 ** 31), st.sampled_from([1, 3]))
def test_residual_at_random_points(seed, n):
    pts = np.random.default_rng(seed).uniform(-8, 8, (10, n))
    res = CriticalRadiusProfile(Potential.hermite()).residuals(pts)
    assert np.max(res) <= 1e-6


def test_profile_cache_is_consistent():
    g = Grid(1, 4.0, 32)
    prof = CriticalRadiusProfile(Potential.hermite(), g)
    first = prof.on_grid(g).copy()
    np.testing.assert_array_equal(prof.on_grid(g), first)
    np.testing.assert_allclose(first, [hermite_radius_1d(x) for x in g.axis], rtol=1e-6)


def test_psi_values():
    g = Grid(1, 4.0, 16)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    prof = CriticalRadiusProfile(Potential.hermite(), g)
    Pc = PsiFunctional(2.0, "centered", prof)
    Ps = Pc.with_mode("sup")
    rho_c = np.array([hermite_radius_1d(Q.center[0]) for Q in C.cubes])
    np.testing.assert_allclose(Pc.values(C), (1 + C.sides / rho_c) ** 2, rtol=1e-5)
    assert np.all(Ps.values(C) <= Pc.values(C) * (1 + 1e-12))
    assert np.all(Ps.values(C) >= 1.0)
    assert psi(Pc, g.root, g) == pytest.approx((1 + 8.0 / hermite_radius_1d(0.0)) ** 2, rel=1e-5)
    np.testing.assert_array_equal(PsiFunctional(3.0).values(C), 1.0)
    np.testing.assert_array_equal(PsiFunctional(3.0, "centered", CriticalRadiusProfile(Potential.zero(), g)).values(C), 1.0)


@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_psi_monotone_in_theta(t1, t2):
    g = Grid(1, 4.0, 16)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    P = PsiFunctional(0.0, "centered", CriticalRadiusProfile(Potential.hermite(), g))
    lo, hi = sorted((t1, t2))
    assert np.all(P.with_theta(lo).values(C) <= P.with_theta(hi).values(C) * (1 + 1e-12))


def test_reverse_holder():
    C = enumerate_cubes(Grid(1, 4.0, 32), "dyadic-all-shifts")
    rep = reverse_holder_check(Potential.hermite(), 2.0, C)
    assert 1.0 <= rep.constant < 3.0 and not rep.vacuous
    assert reverse_holder_check(Potential.constant(2.0), 2.0, C).constant == pytest.approx(1.0)
    assert reverse_holder_check(Potential.zero(), 2.0, C).vacuous
    with pytest.raises(ValueError):
        reverse_holder_check(Potential.hermite(), 1.0, enumerate_cubes(Grid(3, 1.0, 4), "dyadic-all-shifts"))


def test_regularity_diagnostics():
    pts = np.linspace(-4, 4, 9)[:, None]
    rep = regularity_diagnostics(Potential.hermite(), pts)
    assert rep.radius_residual_max <= 1e-6
    assert np.isfinite(rep.C0) and rep.C0 >= 1.0
    const = regularity_diagnostics(Potential.constant(1.0), pts)
    # int_B(x,2r) c = 2 int_B(x,r) c and r^(2-n) int_B(x,r) c = 2 c r^2 in 1-D
    assert const.doubling_order == pytest.approx(1.0, abs=1e-9)
    assert const.small_ball_exponent == pytest.approx(2.0, abs=1e-9)
    assert regularity_diagnostics(Potential.zero(), pts).sentinel
