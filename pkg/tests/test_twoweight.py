import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from schrodinger_weights.grid import CubeCollection, Grid, build_lattice, enumerate_cubes
from schrodinger_weights.harness import smooth_log_weight
from schrodinger_weights.operators import restricted_frac_int, stratify
from schrodinger_weights.potential import CriticalRadiusProfile, Potential, PsiFunctional
from schrodinger_weights.twoweight import (
    EntropyFunction, bump_characteristic, dual_form_identity, frac_int_matrix, rho_w, rho_w_all,
    two_weight_check,
)
from schrodinger_weights.weights import ExponentSet, Weight


@pytest.mark.parametrize("p", [1.0, 1.2, 2.0, 4.0])
@pytest.mark.parametrize("delta", [0.05, 0.5, 1.0, 3.0])
def test_entropy_normalization_is_one(p, delta):
    # int_1^inf dt / (t eps^p) = delta int_0^inf (1 + u)^(-1-delta) du = 1
    assert EntropyFunction(p, delta).normalization() == pytest.approx(1.0, abs=1e-8)


def test_entropy_values_and_validation():
    e = EntropyFunction(2.0, 1.0)
    assert e(math.e) == pytest.approx(2.0 ** (2.0 / 2.0))
    assert e(0.5) == e(1.0)  # clamped below
    assert e.from_log(1e6) == pytest.approx((1 + 1e6))
    assert e.is_monotone()
    with pytest.raises(ValueError):
        EntropyFunction(0.5)
    with pytest.raises(ValueError):
        EntropyFunction(2.0, 0.0)


def brute_rho_w(w, lo, hi, intervals):
    loc = np.zeros_like(w)
    loc[lo:hi] = w[lo:hi]
    M = np.zeros_like(w)
    for a, b in intervals + [(lo, hi)]:
        M[a:b] = np.maximum(M[a:b], loc[a:b].mean())
    return M[lo:hi].sum() / w[lo:hi].sum()


def test_rho_w_brute_force():
    g = Grid(1, 1.0, 16)
    C = build_lattice(g, 4, 0).collection
    w = Weight.log_uniform(g, 2.0, np.random.default_rng(3))
    intervals = [(int(c[0]), int(c[-1]) + 1) for c in (C.cells_of(j) for j in range(len(C)))]
    for j, (a, b) in enumerate(intervals):
        assert rho_w(w, j, C) == pytest.approx(brute_rho_w(w.samples, a, b, intervals), rel=1e-12)


@given(st.integers(0, 2 ** 31))
def test_rho_w_at_least_one_and_constant_is_one(seed):
    g = Grid(1, 4.0, 32)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    w = Weight.log_uniform(g, 2.0, np.random.default_rng(seed))
    assert np.all(rho_w_all(w, C) >= 1 - 1e-12)
    np.testing.assert_allclose(rho_w_all(Weight.constant(g, 2.5), C), 1.0, rtol=1e-12)


def test_frac_int_matrix_matches_operator():
    g = Grid(1, 4.0, 32)
    C = build_lattice(g, 5, 1).collection
    T = frac_int_matrix(0.25, C)
    f = np.random.default_rng(0).normal(size=32)
    np.testing.assert_allclose(T @ f, restricted_frac_int(f, 0.25, C).samples, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(T, T.T, atol=1e-14)
    assert not frac_int_matrix(0.25, CubeCollection(g, [])).any()


@given(st.integers(0, 2 ** 31), st.sampled_from([(2.0, 2.0), (1.5, 3.0), (3.0, 3.0)]))
def test_dual_form_identity(seed, pq):
    p, q = pq
    g = Grid(1, 4.0, 32)
    rng = np.random.default_rng(seed)
    T = frac_int_matrix(0.25, build_lattice(g, 5, 0).collection)
    out = dual_form_identity(T, Weight.log_uniform(g, 1.0, rng), Weight.log_uniform(g, 1.0, rng), p, q,
                             [rng.exponential(size=32) for _ in range(4)])
    assert out["probe_max_rel_diff"] <= 1e-12
    if p == q == 2:
        assert out["svd_rel_diff"] <= 1e-10


def test_bump_per_stratum_and_empty_flags():
    g = Grid(1, 4.0, 64)
    theta = 2.0
    P = PsiFunctional(theta, "sup", CriticalRadiusProfile(Potential.hermite(), g))
    S = stratify(build_lattice(g, 4, 0), theta, P)
    E = ExponentSet.from_p(1, 2.0, 0.25, theta)
    one = Weight.constant(g)
    rep = bump_characteristic(one, one, E, EntropyFunction(E.p), EntropyFunction(E.q_prime), S, P)
    for r in S.levels:
        assert rep.per_stratum[r] == pytest.approx(np.max(rep.beta[S.members[r]]))
    assert set(rep.empty_strata) == set(rep.per_stratum) - set(S.levels)
    # w = sigma = 1: beta = |Q|^(1/p' + 1/q - 1 + alpha) eps_p(1) eps_q'(1) and 1/p' + 1/q = 1 - alpha;
    # rho is clamped at 1 + 1e-9 so the factor rho^(1/p + 1/q') shifts beta by about 1e-9
    np.testing.assert_allclose(rep.beta, EntropyFunction(E.p)(1.0) * EntropyFunction(E.q_prime)(1.0), rtol=1e-8)


@given(st.integers(0, 2 ** 31), st.sampled_from(["zero", "constant", "hermite"]), st.sampled_from([1.0, 2.0]))
def test_testing_ratio_within_budget(seed, fam, theta):
    V = {"zero": Potential.zero(), "constant": Potential.constant(1.0), "hermite": Potential.hermite()}[fam]
    g = Grid(1, 4.0, 64)
    rng = np.random.default_rng(seed)
    P = PsiFunctional(theta, "sup", CriticalRadiusProfile(V, g))
    S = stratify(build_lattice(g, 4, int(rng.integers(3))), theta, P)
    x = g.axis
    probes = [np.ones(64), np.exp(-x ** 2), np.exp(-((x - 1.5) / 0.3) ** 2)]
    rep = two_weight_check(smooth_log_weight(g, rng), smooth_log_weight(g, rng), ExponentSet.from_p(1, 2.0, 0.25, theta),
                           S, probes, psi=P)
    assert rep.passed and 0 < rep.max_ratio <= 10.0
    assert set(rep.to_dict()) >= {"max_ratio", "per_stratum", "composed_ratio", "budget", "passed"}
