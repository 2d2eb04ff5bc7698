import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from schrodinger_weights.bmo import (
    bmo_theta_norm, exp_log_backward, exp_log_bound, exp_log_forward, john_nirenberg_profile, mean_oscillations,
)
from schrodinger_weights.grid import CubeCollection, Grid, enumerate_cubes
from schrodinger_weights.potential import CriticalRadiusProfile, Potential, PsiFunctional
from schrodinger_weights.weights import ExponentSet, Weight


def test_mean_oscillation_brute_force():
    g = Grid(1, 2.0, 16)
    C = enumerate_cubes(g, "exhaustive-small")
    f = np.random.default_rng(3).normal(size=g.size)
    brute = []
    for j in range(len(C)):
        s = f[C.cells_of(j)]
        brute.append(np.mean(np.abs(s - s.mean())))
    np.testing.assert_allclose(mean_oscillations(f, C), brute, rtol=1e-12, atol=1e-15)


def test_step_function_oscillation():
    # 1_{x>0} on the root interval oscillates by exactly 1/2
    g = Grid(1, 1.0, 16)
    f = (g.axis > 0).astype(float)
    assert mean_oscillations(f, CubeCollection(g, [g.root]))[0] == pytest.approx(0.5)
    C = enumerate_cubes(g, "exhaustive-small")
    assert bmo_theta_norm(f, 0.0, PsiFunctional(0.0), C) == pytest.approx(0.5)


@given(st.integers(0, 2 ** 31), st.floats(-5, 5), st.floats(-3, 3))
def test_norm_invariances(seed, shift, scale):
    g = Grid(1, 4.0, 32)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    P = PsiFunctional(1.0, "centered", CriticalRadiusProfile(Potential.hermite(), g))
    f = np.random.default_rng(seed).normal(size=g.size)
    base = bmo_theta_norm(f, 1.0, P, C)
    assert bmo_theta_norm(f + shift, 1.0, P, C) == pytest.approx(base, rel=1e-9, abs=1e-12)
    assert bmo_theta_norm(scale * f, 1.0, P, C) == pytest.approx(abs(scale) * base, rel=1e-9, abs=1e-12)
    assert bmo_theta_norm(f, 2.0, P, C) <= base * (1 + 1e-12)


def test_exp_log_bound_formula():
    assert exp_log_bound(2.0, 2.0) == pytest.approx(4.0)
    assert exp_log_bound(2.0, 3.0) == pytest.approx(2.0 * max(2.0, 2.0 * math.sqrt(2.0)))


@given(st.integers(0, 2 ** 31), st.sampled_from([1.5, 2.0, 4.0]), st.sampled_from([1.0, 2.0]),
       st.sampled_from(["zero", "constant", "hermite"]))
def test_exp_log_forward_holds(seed, p, theta, fam):
    g = Grid(1, 4.0, 32)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    V = {"zero": Potential.zero(), "constant": Potential.constant(1.0), "hermite": Potential.hermite()}[fam]
    P = PsiFunctional(theta, "centered", CriticalRadiusProfile(V, g))
    w = Weight.log_uniform(g, 2.0, np.random.default_rng(seed))
    assert exp_log_forward(w, ExponentSet(1, p, p, 0.0, theta), P, C).holds


def test_backward_sweep_reports_everything():
    g = Grid(1, 4.0, 32)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    P = PsiFunctional(2.0, "centered", CriticalRadiusProfile(Potential.hermite(), g))
    etas = [0.0, 0.1, 0.5, 5.0]
    sw = exp_log_backward(g.radius ** 2, etas, ExponentSet(1, 2.0, 2.0, 0.0, 2.0), P, C)
    assert sw.etas == etas and len(sw.characteristics) == 4
    assert sw.characteristics[0] == pytest.approx(ap_const := sw.ceiling / 10.0)
    assert sw.best_eta in etas[1:]
    assert ap_const <= 1.0


def test_john_nirenberg_log_rate():
    # for log|x| on [-1, 1], avg = -1 and |{|log|x| + 1| > l}|/2 = e^(-1-l) for l >= 1
    g = Grid(1, 1.0, 4096)
    f = np.log(np.abs(g.axis))
    lam = np.linspace(1.0, 4.0, 13)
    prof = john_nirenberg_profile(f, g.root, 0.0, lam, PsiFunctional(0.0), CubeCollection(g, [g.root]))
    assert prof.rate == pytest.approx(1.0, abs=0.05)
    np.testing.assert_allclose(prof.fractions, np.exp(-1 - lam), rtol=0.05)
    assert np.isfinite(prof.exp_average) and prof.exp_average > 1.0


def test_john_nirenberg_constant_function():
    g = Grid(1, 1.0, 16)
    prof = john_nirenberg_profile(np.ones(g.size), g.root, 0.0, [0.0, 1.0], PsiFunctional(0.0),
                                  CubeCollection(g, [g.root]))
    assert prof.rate == math.inf and prof.exp_average == 1.0
