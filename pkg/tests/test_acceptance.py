"""Acceptance criteria at their stated sizes and tolerances.

Each test records one PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion still reports what was measured.
"""
import time

import pytest

from schrodinger_weights import harness
from schrodinger_weights.harness import HarnessConfig

from conftest import ACCEPTANCE_LINES

CFG = HarnessConfig()


def _fmt(x):
    return "-" if x is None else f"{x:.4g}"


def run_criterion(k, title, checks, budget_s=None):
    ctx = harness._quiet()
    t0 = time.perf_counter()
    try:
        results = [r for fn in checks for r in fn(CFG)]
    finally:
        ctx.__exit__(None, None, None)
    elapsed = time.perf_counter() - t0
    failed = [r for r in results if r.passed is False]
    slow = budget_s is not None and elapsed >= budget_s
    ok = not failed and not slow
    summary = "; ".join(f"{r.check}={_fmt(r.fitted_constant)}" + ("" if r.passed is not False else " FAIL")
                        for r in results)
    ACCEPTANCE_LINES[k] = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {title}  [{elapsed:.1f}s] {summary}"
    return results, failed, elapsed


def test_criterion_01_critical_radius_closed_forms():
    results, failed, elapsed = run_criterion(1, "critical radius closed forms",
                                             [harness.check_radius_closed_forms], budget_s=5.0)
    closed = [r for r in results if r.check == "critical_radius_closed_form"]
    assert len(closed) == 2 and all(abs(r.fitted_constant - 1.0) <= 1e-3 for r in closed)
    assert all(r.fitted_constant <= 1e-6 for r in results if r.check == "critical_radius_residual")
    assert not failed and elapsed < 5.0


def test_criterion_02_hermite_radius_band():
    results, failed, elapsed = run_criterion(2, "hermite radius band", [harness.check_hermite_band], budget_s=30.0)
    assert {r.params["n"] for r in results} == {1, 3}
    assert all(r.fitted_constant < 10 for r in results)
    assert not failed and elapsed < 30.0


def test_criterion_03_classical_degeneration():
    results, failed, _ = run_criterion(3, "classical degeneration", [harness.check_classical_degeneration])
    d = results[0].details
    assert d["psi_dev"] == 0.0 and d["char_dev"] <= 1e-9 and d["maximal_dev"] <= 1e-12
    assert not failed


def test_criterion_04_exp_log_bound():
    results, failed, elapsed = run_criterion(4, "log w oscillation bound", [harness.check_exp_log_bound],
                                             budget_s=120.0)
    assert results[0].params["trials"] == 100
    assert not failed and elapsed < 120.0


def test_criterion_05_adapted_class_exhibit():
    results, failed, _ = run_criterion(5, "adapted class strictly larger", [harness.check_example_exhibit])
    r = results[0]
    assert r.fitted_constant <= 10.0 and r.witness["eta"] > 0 and r.witness["classical"] > 1e3
    assert not failed


def test_criterion_06_dyadic_weak_type():
    results, failed, _ = run_criterion(6, "dyadic weak type constant one", [harness.check_weak_type])
    assert results[0].params["trials"] == 200 and results[0].fitted_constant <= 1 + 1e-9
    assert not failed


def test_criterion_07_heat_domination():
    results, failed, _ = run_criterion(7, "heat semigroup domination", [harness.check_heat_domination])
    stable = [r for r in results if r.check == "heat_domination_stable"]
    assert {r.params["theta"] for r in stable} == {1.0, 2.0, 4.0}
    assert not failed, [(r.check, r.params, r.details) for r in failed]


def test_criterion_08_rubio_de_francia():
    results, failed, _ = run_criterion(8, "rubio de francia iteration", [harness.check_rdf])
    assert results[0].params["trials"] == 100
    assert not failed, [(r.check, r.fitted_constant, r.witness, r.details) for r in failed]


def test_criterion_09_stratification():
    _, failed, _ = run_criterion(9, "stratification", [harness.check_stratification])
    assert not failed


def test_criterion_10_stratum_characteristics():
    _, failed, _ = run_criterion(10, "stratum characteristic growth", [harness.check_stratum_characteristics])
    assert not failed


def test_criterion_11_fractional_domination():
    results, failed, _ = run_criterion(11, "dyadic domination of the fractional power",
                                       [harness.check_frac_domination])
    assert {r.params["V"] for r in results} == {"zero", "hermite"}
    assert not failed


def test_criterion_12_norm_exponent_slope():
    _, failed, _ = run_criterion(12, "norm exponent slope", [harness.check_slope])
    assert not failed


def test_criterion_13_two_weight():
    results, failed, _ = run_criterion(13, "two-weight testing ratio", [harness.check_two_weight])
    by = {r.check: r for r in results}
    assert by["entropy_normalization"].fitted_constant <= 1e-6
    assert by["two_weight_testing_ratio"].fitted_constant <= 10.0
    assert not failed


def test_criterion_14_negative_controls():
    results, failed, _ = run_criterion(14, "negative controls detected", [harness.check_negative_controls])
    assert len(results) == 2
    assert not failed
