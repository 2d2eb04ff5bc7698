import numpy as np
import pytest

from schrodinger_weights.grid import Grid
from schrodinger_weights.harness import (
    HarnessConfig, SUITES, check_negative_controls, random_function, random_weight, refinement_sweep, run_suite,
    smooth_log_weight,
)

SMALL = {"weight_trials": 4, "weak_trials": 4, "rdf_trials": 6, "twoweight_trials": 2, "stratum_trials": 3}


def test_same_seed_gives_identical_json():
    a = run_suite("rdf", {**SMALL, "seed": 5}).to_json()
    b = run_suite("rdf", {**SMALL, "seed": 5}).to_json()
    assert a == b
    assert run_suite("rdf", {**SMALL, "seed": 6}).to_json() != a


def test_threaded_run_matches_serial(monkeypatch):
    serial = run_suite("weights", SMALL).to_json()
    monkeypatch.setenv("SCHRODINGER_WEIGHTS_THREADS", "4")
    assert run_suite("weights", SMALL).to_json() == serial


def test_empty_matrix_is_a_no_op():
    rep = run_suite("all", {"p_values": [], "theta_values": []})
    assert rep.results == [] and rep.passed
    assert rep.to_dict()["n_checks"] == 0


@pytest.mark.parametrize("bad", [
    {"p_values": [0.5]}, {"theta_values": [-1.0]}, {"heat_cells": [256, 128]}, {"heat_cells": [100, 200]},
    {"rdf_trials": -1}, {"seed": -3}, {"no_such_setting": 1},
])
def test_invalid_config_rejected(bad):
    with pytest.raises(Exception) as exc:
        run_suite("rho", bad)
    assert isinstance(exc.value, (ValueError, TypeError))


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suite("nope")
    assert set(SUITES) == {"rho", "weights", "bmo", "maximal", "heat", "fracint", "rdf", "twoweight", "controls"}


def test_single_n_sweep_is_vacuous():
    st = refinement_sweep("heat_kernel_bound", [128])
    assert st.vacuous and st.stable and st.growth == []
    with pytest.raises(ValueError):
        refinement_sweep("heat_kernel_bound", [256, 128])
    with pytest.raises(ValueError):
        refinement_sweep("no_such_check", [128])


def test_negative_controls_are_flagged():
    res = {r.check: r for r in check_negative_controls(HarnessConfig(heat_cells=(128, 256)))}
    assert res["control_wrong_gaussian_constant"].passed
    assert res["control_psi_exponent_off_by_one"].passed
    assert res["control_psi_exponent_off_by_one"].fitted_constant > 1.0


def test_report_serialization():
    rep = run_suite("rdf", SMALL)
    d = rep.to_dict()
    assert d["suite"] == "rdf" and d["n_failed"] == len(rep.failures)
    for r in d["results"]:
        assert {"check", "params", "fitted_constant", "pass", "witness", "details"} <= set(r)
        assert r["params"]["suite"] == "rdf"
    assert [row["check"] for row in rep.to_rows()] == [r.check for r in rep.results]


def test_generators_are_seeded_and_positive():
    g = Grid(1, 4.0, 64)
    for fam in ("constant", "two-valued", "power", "gaussian", "log-uniform"):
        w1, f1 = random_weight(g, np.random.default_rng(1), fam)
        w2, _ = random_weight(g, np.random.default_rng(1), fam)
        assert f1 == fam and np.all(w1.samples > 0)
        np.testing.assert_array_equal(w1.samples, w2.samples)
    assert np.all(smooth_log_weight(g, np.random.default_rng(0)).samples > 0)
    assert random_function(g, np.random.default_rng(0)).shape == (64,)
