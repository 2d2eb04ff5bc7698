import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from schrodinger_weights.cli import main
from schrodinger_weights.config import ConfigError, load_config, parse_config


@given(st.sampled_from([1, 2, 3]), st.sampled_from([8, 16, 32]), st.floats(0.5, 20.0),
       st.sampled_from([1.5, 2.0, 4.0]), st.sampled_from([0.0, 1.0, 2.5]),
       st.sampled_from(["zero", "constant", "hermite"]), st.integers(0, 2 ** 64 - 1))
def test_config_round_trip(dim, cells, R, p, theta, fam, seed):
    raw = {"grid": {"dim": dim, "cells": cells, "half_extent": R},
           "potential": {"family": fam, "param": 1.0 if fam == "constant" else None},
           "exponents": {"p": p, "theta": theta}, "seed": seed, "heat": {"c": 4.0}}
    c = parse_config(raw)
    again = parse_config(json.loads(c.to_json()))
    assert again == c and again.to_json() == c.to_json()
    assert again.q is None and again.exponents().q == pytest.approx(p)


def test_seed_flag_overrides_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"seed": 3}))
    assert load_config(path).seed == 3
    assert load_config(path, seed=9).seed == 9


@pytest.mark.parametrize("raw", [
    {"grid": {"cells": 6}}, {"grid": {"dim": 4}}, {"potential": {"family": "coulomb"}},
    {"exponents": {"p": 2.0, "q": 3.0}}, {"exponents": {"p": 0.5}}, {"weight": {"family": "nope"}},
    {"collection": {"strategy": "random"}}, {"seed": -1}, {"bogus": 1}, {"heat": {"bogus": 1}},
    {"suite": {"p_values": [0.1]}}, "not an object",
])
def test_bad_configs_raise(raw):
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_verify_rho_writes_report(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["verify", "rho", "--seed", "1", "--out", str(out)]) == 0
    rep = json.loads((out / "verify_rho.json").read_text())
    assert rep["suite"] == "rho" and rep["seed"] == 1 and rep["passed"] is True
    assert json.loads(capsys.readouterr().out) == rep


def test_missing_config_exits_2(tmp_path):
    assert main(["char", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["char", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["frobnicate"]) == 2
    assert main(["rho", "--no-such-flag"]) == 2
    assert main(["verify", "nosuite"]) == 2
    assert main([]) == 2
    assert main(["rho", "--format", "xml"]) == 2


def test_rho_csv_columns(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"grid": {"dim": 1, "cells": 64, "half_extent": 8.0},
                               "potential": {"family": "hermite"}}))
    assert main(["rho", "--config", str(cfg), "--format", "csv", "--out", str(tmp_path / "o")]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert list(rows[0]) == ["x", "rho", "(1+|x|)*rho"]
    band = np.array([float(r["(1+|x|)*rho"]) for r in rows])
    assert band.max() / band.min() < 2.0
    assert (tmp_path / "o" / "rho.csv").exists()


@pytest.mark.parametrize("cmd", ["char", "bmo", "maximal", "fracint", "twoweight"])
def test_subcommands_run(cmd, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"grid": {"dim": 1, "cells": 32, "half_extent": 4.0},
                               "weight": {"family": "log-uniform", "param": 1.0}}))
    code = main([cmd, "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code in (0, 1)
    assert isinstance(json.loads(capsys.readouterr().out), dict)
    assert any((tmp_path / "o").glob("*.json"))


def test_heat_rejects_unsupported_dimension(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"grid": {"dim": 2, "cells": 8}}))
    assert main(["heat", "--config", str(cfg), "--out", str(tmp_path)]) == 2
