"""Batch command-line entry point.

Exit status: 0 when every assertion of the run holds, 1 when one fails
(outputs are still written), 2 for usage or configuration errors.
Primary tables go to stdout in the chosen format; all outputs are also
written under ``--out``.
"""
from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bmo, harness, operators, potential, semigroup, twoweight, weights
from .config import ConfigError, RunConfig, load_config
from .grid import GridError, build_lattice, enumerate_cubes, max_depth
from .operators import CoverageWarning, ConvergenceWarning
from .potential import CriticalRadiusProfile, PsiFunctional
from .reporting import dumps_json, rows_to_csv, write_json, write_rows, grid_function_to_csv
from .semigroup import DiscreteOperator
from .weights import ExponentError, Weight

__all__ = ["main", "build_parser"]

SUBCOMMANDS = ("rho", "char", "bmo", "maximal", "heat", "fracint", "rdf", "twoweight", "verify", "sweep")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="JSON run configuration")
    p.add_argument("--seed", type=int, default=d(None), help="RNG seed (unsigned 64-bit)")
    p.add_argument("--out", default=d("out"), help="output directory (default: ./out)")
    p.add_argument("--format", choices=("csv", "json"), default=d("json"), help="stdout format")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="schrodinger-weights",
                     description="Weights, maximal functions and fractional integrals adapted to -Δ + V.")
    _add_common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}", parser_class=_Parser)
    helps = {
        "rho": "tabulate the critical radius along an axis",
        "char": "weight characteristics over the configured collection",
        "bmo": "penalized oscillation of log w, exp sweep and level-set decay",
        "maximal": "adapted maximal function and its weak-type ratio",
        "heat": "spectrum, kernel slice and Gaussian kernel bound",
        "fracint": "stratified dyadic fractional integrals",
        "rdf": "Rubio de Francia iteration",
        "twoweight": "entropy-bump two-weight testing ratio",
        "verify": "run a verification suite",
        "sweep": "refinement sweep of one fitted constant",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        _add_common(sp, suppress=True)
        if name == "verify":
            sp.add_argument("suite", choices=sorted(harness.SUITES) + ["all"])
    return parser


# helpers ---------------------------------------------------------------------------

def _emit(rows, summary, fmt: str, out: Path, stem: str):
    write_rows(out / f"{stem}.csv", rows)
    write_json(out / f"{stem}.json", summary)
    sys.stdout.write(rows_to_csv(rows) if fmt == "csv" else dumps_json(summary))


def _function(cfg: RunConfig, name: str) -> np.ndarray:
    g = cfg.grid()
    r2 = g.radius ** 2
    if name == "gaussian":
        return np.exp(-r2)
    if name == "indicator":
        return (g.radius <= g.half_extent / 4).astype(float)
    if name == "square":
        return r2
    if name == "log-weight":
        return _weight(cfg).log_samples
    raise ConfigError(f"unknown function {name!r}; expected gaussian, indicator, square or log-weight")


def _weight(cfg: RunConfig, wspec: dict | None = None) -> Weight:
    wspec = wspec or cfg.weight
    return Weight.from_family(cfg.grid(), wspec["family"], wspec.get("param"), rng=np.random.default_rng(cfg.seed))


def _collection(cfg: RunConfig):
    return enumerate_cubes(cfg.grid(), cfg.strategy, cfg.depth)


def _lattices(cfg: RunConfig, count: int | None = None):
    g = cfg.grid()
    depth = cfg.depth if cfg.depth is not None else max_depth(g)
    count = 3 ** g.dim if count is None else min(count, 3 ** g.dim)
    return [build_lattice(g, depth, s) for s in range(count)]


def _operator(cfg: RunConfig) -> DiscreteOperator:
    return DiscreteOperator(cfg.grid(), cfg.make_potential())


# subcommands -----------------------------------------------------------------------

def cmd_rho(cfg: RunConfig, fmt: str, out: Path) -> bool:
    b = cfg.block("rho")
    g = cfg.grid()
    V = cfg.make_potential()
    extent = b["extent"] if b["extent"] is not None else g.half_extent
    x = g.axis if b["samples"] is None else np.linspace(-extent, extent, int(b["samples"]))
    x = x[np.abs(x) <= extent]
    pts = np.zeros((x.size, g.dim))
    axis = int(b["axis"])
    if not 0 <= axis < g.dim:
        raise ConfigError("rho.axis out of range")
    pts[:, axis] = x
    rho = potential.critical_radius(V, pts, tol=b["tol"])
    rows = [{"x": float(a), "rho": float(r), "(1+|x|)*rho": float((1 + abs(a)) * r)} for a, r in zip(x, rho)]
    ok = True
    summary = {"potential": V.to_dict(), "points": int(x.size)}
    if not V.is_zero:
        res = CriticalRadiusProfile(V).residuals(pts)
        finite = res[np.isfinite(res)]
        summary["residual_max"] = float(finite.max()) if finite.size else 0.0
        ok = summary["residual_max"] <= b["tol"]
        band = np.array([r["(1+|x|)*rho"] for r in rows])
        summary["band_ratio"] = float(band.max() / band.min())
        diag = potential.regularity_diagnostics(V, pts[:: max(1, x.size // 16)])
        write_json(out / "rho_diagnostics.json", diag.to_dict())
    summary["passed"] = ok
    write_rows(out / "rho.csv", rows, ["x", "rho", "(1+|x|)*rho"])
    write_json(out / "rho.json", summary)
    sys.stdout.write(rows_to_csv(rows, ["x", "rho", "(1+|x|)*rho"]) if fmt == "csv" else dumps_json(summary))
    return ok


def cmd_char(cfg: RunConfig, fmt: str, out: Path) -> bool:
    E = cfg.exponents()
    C = _collection(cfg)
    w = _weight(cfg)
    prof = CriticalRadiusProfile(cfg.make_potential(), cfg.grid())
    P = PsiFunctional(E.theta, "centered", prof)
    summary, ok = {"exponents": E.to_dict(), "weight": cfg.weight}, True
    kinds = cfg.block("char")["kinds"]
    main = None
    if "ap" in kinds and E.alpha == 0 and E.q == E.p:
        main = weights.ap_theta(w, E, P, C)
        summary["ap_theta"] = main.summary()
    if "apq" in kinds and E.p > 1:
        rep = weights.apq_alpha_theta(w, E, P.with_mode("sup"), C)
        summary["apq_alpha_theta"] = rep.summary()
        main = main or rep
    if "tilde" in kinds and E.alpha == 0 and E.q == E.p:
        tc = weights.tilde_comparison(w, E, P, C)
        summary["tilde"] = tc.to_dict()
        ok = tc.easy_direction_holds
    summary["passed"] = ok
    _emit(main.to_rows() if main is not None else [], summary, fmt, out, "char")
    return ok


def cmd_bmo(cfg: RunConfig, fmt: str, out: Path) -> bool:
    b = cfg.block("bmo")
    E = cfg.exponents()
    C = _collection(cfg)
    g = cfg.grid()
    P = PsiFunctional(E.theta, "centered", CriticalRadiusProfile(cfg.make_potential(), g))
    w = _weight(cfg)
    fwd = bmo.exp_log_forward(w, E, P, C)
    f = _function(cfg, b["function"])
    etas = b["eta_grid"] if b["eta_grid"] is not None else list(np.geomspace(0.01, 2.0, 12))
    sweep = bmo.exp_log_backward(f, etas, E, P, C, ceiling=b["ceiling"])
    decay = bmo.john_nirenberg_profile(f, g.root, b["theta_prime"], b["lambda_grid"], P, C)
    summary = {"forward": fwd.to_dict(), "backward": sweep.to_dict(), "decay": decay.summary(),
               "passed": fwd.holds}
    write_rows(out / "bmo_sweep.csv", [{"eta": e, "characteristic": c}
                                       for e, c in zip(sweep.etas, sweep.characteristics)])
    _emit(decay.to_rows(), summary, fmt, out, "bmo")
    return fwd.holds


def cmd_maximal(cfg: RunConfig, fmt: str, out: Path) -> bool:
    b = cfg.block("maximal")
    E = cfg.exponents()
    g = cfg.grid()
    prof = CriticalRadiusProfile(cfg.make_potential(), g)
    P = PsiFunctional(E.theta, "centered", prof)
    f = _function(cfg, b["function"])
    C = _collection(cfg)
    Mf = operators.maximal_adapted(f, E.alpha, P, C)
    lat = _lattices(cfg, 1)[0].collection
    weak = operators.weak_type_check(f, _weight(cfg), E.with_theta(E.theta), P, lat) if E.p == E.q else None
    summary = {"exponents": E.to_dict(), "collection": C.tag}
    ok = True
    if weak is not None:
        summary["weak_type"] = weak.to_dict()
        ok = weak.max_ratio <= 1 + 1e-9
    if g.dim == 1 and g.cells_per_axis <= semigroup.MAX_SPECTRAL_CELLS:
        ts = b["t_grid"] if b["t_grid"] is not None else [0.0] + list(np.geomspace(1e-3, 10.0, 25))
        Cu = enumerate_cubes(g, "centered-sweep").union(enumerate_cubes(g, "dyadic-all-shifts"))
        summary["heat_domination"] = operators.heat_domination_check(_operator(cfg), prof, f, E.theta, ts, Cu).to_dict()
    summary["passed"] = ok
    (out / "maximal_function.csv").write_text(grid_function_to_csv(Mf))
    write_json(out / "maximal_function.json", g.to_dict())
    rows = [{"index": i, "f": float(a), "Mf": float(m)} for i, (a, m) in enumerate(zip(f, Mf.samples))]
    _emit(rows, summary, fmt, out, "maximal")
    return ok


def cmd_heat(cfg: RunConfig, fmt: str, out: Path) -> bool:
    b = cfg.block("heat")
    L = _operator(cfg)
    g = L.grid
    prof = CriticalRadiusProfile(cfg.make_potential(), g)
    ts = b["t_grid"] if b["t_grid"] is not None else list(np.geomspace(0.05, 4.0, 8))
    rep = semigroup.heat_kernel_bound_check(L, prof, ts, b["n_exponent"], b["c"])
    ok = math.isfinite(rep.fitted_constant) and rep.fitted_constant <= b["budget"]
    write_rows(out / "spectrum.csv", L.to_spectrum_rows(), ["j", "lambda"])
    mid = int(np.argmin(np.abs(g.axis)))
    K = L.heat_kernel(b["slice_time"])[mid]
    rows = [{"y": float(y), "p_t": float(k)} for y, k in zip(g.axis, K)]
    write_rows(out / "kernel_slice.csv", rows, ["y", "p_t"])
    summary = {"bound": rep.to_dict(), "slice": {"t": b["slice_time"], "x": float(g.axis[mid])},
               "budget": b["budget"], "passed": ok}
    _emit(rep.per_time, summary, fmt, out, "heat")
    return ok


def cmd_fracint(cfg: RunConfig, fmt: str, out: Path) -> bool:
    b = cfg.block("fracint")
    E = cfg.exponents()
    g = cfg.grid()
    prof = CriticalRadiusProfile(cfg.make_potential(), g)
    if E.theta <= 0:
        raise ConfigError("fracint needs theta > 0")
    P = PsiFunctional(E.theta, "sup", prof)
    lats = _lattices(cfg, int(b["lattices"]))
    w = _weight(cfg)
    rows, ok = [], True
    for s, D in enumerate(lats):
        S = operators.stratify(D, E.theta, P)
        ok &= S.is_partition()
        for row in operators.stratum_characteristic_check(w, E, S, P):
            rows.append({"lattice": s, **row.to_dict()})
            ok &= row.passed
    summary = {"exponents": E.to_dict(), "lattices": len(lats)}
    if g.dim == 1 and E.alpha > 0 and g.cells_per_axis <= semigroup.MAX_SPECTRAL_CELLS:
        try:
            dom = operators.domination_check(_operator(cfg), prof, _function(cfg, b["function"]), E, lats)
            summary["domination"] = dom.to_dict()
        except semigroup.SingularOperatorError as exc:
            summary["domination"] = {"error": str(exc)}
    summary["passed"] = bool(ok)
    _emit(rows, summary, fmt, out, "fracint")
    return bool(ok)


def cmd_rdf(cfg: RunConfig, fmt: str, out: Path) -> bool:
    b = cfg.block("rdf")
    Q = _lattices(cfg, 1)[0].collection
    res = operators.rdf_iterate(_function(cfg, b["function"]), _weight(cfg), b["r0"], b["r"], Q,
                                K_terms=int(b["K_terms"]))
    ok = res.majorizes and res.norm_ok and res.tail_ok
    summary = {**res.to_dict(), "passed": ok}
    rows = [{"index": i, "G": float(v)} for i, v in enumerate(res.G)]
    _emit(rows, summary, fmt, out, "rdf")
    return ok


def cmd_twoweight(cfg: RunConfig, fmt: str, out: Path) -> bool:
    b = cfg.block("twoweight")
    E = cfg.exponents()
    g = cfg.grid()
    if E.theta <= 0:
        raise ConfigError("twoweight needs theta > 0")
    P = PsiFunctional(E.theta, "sup", CriticalRadiusProfile(cfg.make_potential(), g))
    S = operators.stratify(build_lattice(g, int(b["depth"]), 0), E.theta, P)
    sig = _weight(cfg, b["sigma"])
    w = _weight(cfg)
    probes = [np.ones(g.size), _function(cfg, "gaussian"), _function(cfg, "indicator")]
    eps_p = twoweight.EntropyFunction(E.p, b["delta"])
    eps_qp = twoweight.EntropyFunction(E.q_prime, b["delta"])
    rep = twoweight.two_weight_check(sig, w, E, S, probes, eps_p, eps_qp, P, b["budget"])
    summary = {**rep.to_dict(), "bump": rep.bump.summary()}
    write_rows(out / "twoweight_strata.csv", [{"r": r, "ratio": v, "bump": rep.bump.per_stratum[r]}
                                              for r, v in sorted(rep.per_stratum.items())])
    _emit(rep.bump.to_rows(), summary, fmt, out, "twoweight")
    return rep.passed


def cmd_verify(cfg: RunConfig, fmt: str, out: Path, suite: str) -> bool:
    block = dict(cfg.block("suite"))
    block["seed"] = cfg.seed
    report = harness.run_suite(suite, block)
    (out / f"verify_{suite}.json").parent.mkdir(parents=True, exist_ok=True)
    (out / f"verify_{suite}.json").write_text(report.to_json() + "\n")
    write_rows(out / f"verify_{suite}.csv", report.to_rows(), ["check", "params", "fitted_constant", "pass"])
    sys.stdout.write(rows_to_csv(report.to_rows(), ["check", "params", "fitted_constant", "pass"])
                     if fmt == "csv" else report.to_json() + "\n")
    return report.passed


def cmd_sweep(cfg: RunConfig, fmt: str, out: Path) -> bool:
    b = cfg.block("sweep")
    kw = {"potential": cfg.make_potential(), "theta": b["theta"]}
    try:
        st = harness.refinement_sweep(b["check"], b["cells"], **kw)
    except ValueError as exc:
        raise ConfigError(f"sweep: {exc}") from exc
    summary = {"check": st.check, "cells": st.cells, "constants": st.constants, "growth": st.growth,
               "stable": st.stable, "vacuous": st.vacuous, "passed": st.stable}
    _emit(st.to_rows(), summary, fmt, out, f"sweep_{st.check}")
    return st.stable


COMMANDS = {"rho": cmd_rho, "char": cmd_char, "bmo": cmd_bmo, "maximal": cmd_maximal, "heat": cmd_heat,
            "fracint": cmd_fracint, "rdf": cmd_rdf, "twoweight": cmd_twoweight, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    warnings.simplefilter("ignore", CoverageWarning)
    warnings.simplefilter("ignore", ConvergenceWarning)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "verify":
            ok = cmd_verify(cfg, args.format, out, args.suite)
        else:
            ok = COMMANDS[args.command](cfg, args.format, out)
    except (ConfigError, GridError, ExponentError, semigroup.UnsupportedModeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
