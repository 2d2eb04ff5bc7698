import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from schrodinger_weights.grid import CubeCollection, Grid, build_lattice, enumerate_cubes
from schrodinger_weights.potential import CriticalRadiusProfile, Potential, PsiFunctional
from schrodinger_weights.weights import (
    ExponentError, ExponentSet, Weight, ap_theta, apq_alpha_theta, ar_restricted, restricted_chars,
    tilde_comparison,
)


def hermite_radius_1d(x):
    return math.sqrt((-2 * x * x + math.sqrt(4 * x ** 4 + 8.0 / 3.0)) / (4.0 / 3.0))


def brute_ap(w, x, h, p, theta):
    """All cell-aligned intervals; penalty from the closed-form Hermite radius at the center."""
    N = w.size
    best = 0.0
    for a in range(N):
        for b in range(a + 1, N + 1):
            s = w[a:b]
            center = 0.5 * (x[a] + x[b - 1])
            pen = (1 + (b - a) * h / hermite_radius_1d(center)) ** theta
            val = (s.mean() / pen) * (np.mean(s ** (-1 / (p - 1))) / pen) ** (p - 1)
            best = max(best, val)
    return best


def test_exponent_set_relations():
    E = ExponentSet.from_p(3, 1.5, 1.0, 2.0)
    assert 1 / E.p - 1 / E.q == pytest.approx(1 / 3)
    assert E.p_prime == pytest.approx(3.0) and E.q == pytest.approx(3.0)
    assert E.gamma == pytest.approx(1.0)
    assert E.growth == pytest.approx(2 / 3)
    assert E.K == pytest.approx(8 / 3)
    F = ExponentSet(1, 2.0, 2.0)
    assert F.growth == 1.0 and F.K == 4.0
    assert ExponentSet(1, 1.0, 2.0, 0.5).p_prime == math.inf
    for bad in [dict(n=1, p=0.5, q=1.0), dict(n=1, p=2.0, q=3.0), dict(n=1, p=2.0, q=2.0, alpha=1.0),
                dict(n=1, p=2.0, q=2.0, theta=-1.0)]:
        with pytest.raises(ExponentError):
            ExponentSet(**bad)
    with pytest.raises(ExponentError):
        ExponentSet.from_p(1, 2.0, 0.5)


@pytest.mark.parametrize("p,theta", [(2.0, 0.0), (2.0, 1.0), (1.5, 2.0), (4.0, 1.0)])
def test_ap_theta_matches_brute_force(p, theta):
    g = Grid(1, 2.0, 16)
    C = enumerate_cubes(g, "exhaustive-small")
    P = PsiFunctional(theta, "centered", CriticalRadiusProfile(Potential.hermite(), g))
    rng = np.random.default_rng(int(10 * p + theta))
    w = Weight.log_uniform(g, 1.5, rng)
    got = ap_theta(w, ExponentSet(1, p, p, 0.0, theta), P, C).value
    assert got == pytest.approx(brute_ap(w.samples, g.axis, g.spacing, p, theta), rel=1e-6)


def test_two_valued_weight_root_bracket():
    # on the root interval: avg w = (a+b)/2, avg w^-1 = (1/a+1/b)/2
    g = Grid(1, 1.0, 8)
    C = CubeCollection(g, [g.root])
    a, b = 0.25, 4.0
    w = Weight.two_valued(g, a, b)
    got = restricted_chars(w, ExponentSet(1, 2.0, 2.0), C, "p").value
    assert got == pytest.approx((a + b) / 2 * (1 / a + 1 / b) / 2, rel=1e-13)


def test_a1_uses_minimum():
    g = Grid(1, 1.0, 8)
    C = build_lattice(g, 3, 0).collection
    w = Weight.from_values(g, np.arange(1.0, 9.0))
    rep = ar_restricted(w, 1.0, C)
    brute = max(np.mean(w.samples[c]) / np.min(w.samples[c]) for c in (C.cells_of(j) for j in range(len(C))))
    assert rep.value == pytest.approx(brute, rel=1e-13)


@given(st.integers(0, 2 ** 31), st.floats(0.5, 5.0), st.sampled_from([1.5, 2.0, 4.0]))
def test_characteristic_scale_invariant_and_at_least_one(seed, c, p):
    g = Grid(1, 4.0, 32)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    w = Weight.log_uniform(g, 2.0, np.random.default_rng(seed))
    E = ExponentSet(1, p, p)
    P = PsiFunctional(0.0)
    v1 = ap_theta(w, E, P, C).value
    v2 = ap_theta(w * Weight.constant(g, c), E, P, C).value
    assert v2 == pytest.approx(v1, rel=1e-10)
    assert v1 >= 1.0 - 1e-12


@given(st.integers(0, 2 ** 31))
def test_characteristic_nonincreasing_in_theta(seed):
    g = Grid(1, 4.0, 32)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    prof = CriticalRadiusProfile(Potential.hermite(), g)
    w = Weight.log_uniform(g, 2.0, np.random.default_rng(seed))
    vals = [ap_theta(w, ExponentSet(1, 2.0, 2.0, 0.0, t), PsiFunctional(t, "centered", prof), C).value
            for t in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))


@given(st.integers(0, 2 ** 31), st.sampled_from([1.5, 2.0, 3.0]))
def test_ap_duality(seed, p):
    # [w]_{A_p} = [w^(1-p')]_{A_p'}^(p-1)
    g = Grid(1, 4.0, 32)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    w = Weight.log_uniform(g, 2.0, np.random.default_rng(seed))
    pp = p / (p - 1)
    P = PsiFunctional(0.0)
    lhs = ap_theta(w, ExponentSet(1, p, p), P, C).value
    rhs = ap_theta(w.pow(1 - pp), ExponentSet(1, pp, pp), P, C).value ** (p - 1)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_apq_reduces_to_power_of_ap():
    # alpha = 0: [w]_{A_pp} = [w^p]_{A_p}
    g = Grid(1, 4.0, 32)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    w = Weight.power(g, 0.3)
    P = PsiFunctional(0.0)
    E = ExponentSet(1, 2.0, 2.0)
    assert apq_alpha_theta(w, E, P, C).value == pytest.approx(ap_theta(w.pow(2.0), E, P, C).value, rel=1e-12)


def test_theta_mismatch_rejected():
    g = Grid(1, 1.0, 8)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    with pytest.raises(ExponentError):
        ap_theta(Weight.constant(g), ExponentSet(1, 2.0, 2.0, 0.0, 1.0), PsiFunctional(2.0), C)


@given(st.integers(0, 2 ** 31), st.sampled_from([1.0, 2.0]))
def test_tilde_easy_direction(seed, theta):
    g = Grid(1, 4.0, 32)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    P = PsiFunctional(theta, "centered", CriticalRadiusProfile(Potential.hermite(), g))
    w = Weight.log_uniform(g, 2.0, np.random.default_rng(seed))
    assert tilde_comparison(w, ExponentSet(1, 2.0, 2.0, 0.0, theta), P, C).easy_direction_holds


def test_report_rows_and_argmax():
    g = Grid(1, 2.0, 8)
    C = enumerate_cubes(g, "exhaustive-small")
    rep = ap_theta(Weight.power(g, 0.8), ExponentSet(1, 2.0, 2.0), PsiFunctional(0.0), C)
    rows = rep.to_rows()
    assert len(rows) == len(C)
    assert max(r["product"] for r in rows) == pytest.approx(rep.value, rel=1e-12)
    assert rep.argmax_cube == C.cubes[rep.argmax]
    assert rep.summary()["n_cubes"] == len(C)


def test_extreme_weights_stay_finite():
    g = Grid(1, 4.0, 64)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    w = Weight.gaussian(g, 40.0)  # exp(640) overflows a double
    assert np.isfinite(ap_theta(w, ExponentSet(1, 2.0, 2.0), PsiFunctional(0.0), C).log_value)
