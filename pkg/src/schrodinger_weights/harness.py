"""Verification suites, random generators, refinement sweeps and negative controls.

Every check returns :class:`CheckResult` records.  Assertable checks carry
``passed`` True/False; report-only checks carry ``passed=None`` and a fitted
constant.  Reports contain no timings, so a fixed seed reproduces them byte
for byte.
"""
from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import bmo, operators, potential, semigroup, twoweight, weights
from .grid import CubeCollection, Grid, build_lattice, enumerate_cubes, max_depth
from .operators import CoverageWarning, ConvergenceWarning
from .potential import CriticalRadiusProfile, Potential, PsiFunctional
from .semigroup import DiscreteOperator
from .weights import ExponentSet, Weight

__all__ = [
    "CheckResult",
    "SuiteReport",
    "StabilityTable",
    "SUITES",
    "run_suite",
    "refinement_sweep",
    "random_weight",
    "random_function",
    "smooth_log_weight",
    "HarnessConfig",
]

THREADS_ENV = "SCHRODINGER_WEIGHTS_THREADS"
STABILITY_GROWTH = 0.10
HEAT_BOUND_BUDGET = 100.0


@dataclass
class CheckResult:
    check: str
    params: dict
    passed: bool | None
    fitted_constant: float | None = None
    witness: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"check": self.check, "params": self.params, "fitted_constant": self.fitted_constant,
                "pass": self.passed, "witness": self.witness, "details": self.details}


@dataclass
class SuiteReport:
    suite: str
    seed: int
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed is not False for r in self.results)

    @property
    def failures(self) -> list:
        return [r for r in self.results if r.passed is False]

    def to_dict(self) -> dict:
        return {"suite": self.suite, "seed": self.seed, "passed": self.passed,
                "n_checks": len(self.results), "n_failed": len(self.failures),
                "results": [r.to_dict() for r in self.results]}

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), sort_keys=True, indent=1)

    def to_rows(self) -> list[dict]:
        return [{"check": r.check, "params": json.dumps(_clean(r.params), sort_keys=True),
                 "fitted_constant": r.fitted_constant, "pass": r.passed} for r in self.results]


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


@dataclass
class HarnessConfig:
    """Sizes and trial counts; defaults are the acceptance sizes."""

    seed: int = 0
    weight_trials: int = 100
    weak_trials: int = 200
    rdf_trials: int = 100
    twoweight_trials: int = 50
    stratum_trials: int = 40
    heat_cells: tuple = (128, 256, 512)
    p_values: tuple = (1.5, 2.0, 4.0)
    theta_values: tuple = (1.0, 2.0, 4.0)

    @classmethod
    def from_dict(cls, d: dict | None) -> "HarnessConfig":
        d = dict(d or {})
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown harness settings {sorted(unknown)}")
        for k in ("heat_cells", "p_values", "theta_values"):
            if k in known:
                known[k] = tuple(known[k])
        cfg = cls(**known)
        cfg.validate()
        return cfg

    def validate(self):
        """Reject inconsistent settings before any computation."""
        for p in self.p_values:
            ExponentSet(1, float(p), float(p))
        if any(t < 0 for t in self.theta_values):
            raise ValueError("theta values must be non-negative")
        cells = [int(n) for n in self.heat_cells]
        if any(b <= a for a, b in zip(cells, cells[1:])) or any(n & (n - 1) for n in cells):
            raise ValueError("heat_cells must be ascending powers of two")
        for k in ("weight_trials", "weak_trials", "rdf_trials", "twoweight_trials", "stratum_trials"):
            if getattr(self, k) < 0:
                raise ValueError(f"{k} must be non-negative")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def empty(self) -> bool:
        return not self.p_values or not self.theta_values


# generators -------------------------------------------------------------------

def random_weight(grid: Grid, rng: np.random.Generator, family: str | None = None) -> tuple[Weight, str]:
    """A positive weight from the constant, two-valued, power, gaussian or log-uniform family."""
    fam = family or str(rng.choice(["constant", "two-valued", "power", "gaussian", "log-uniform"]))
    if fam == "constant":
        return Weight.constant(grid, float(np.exp(rng.uniform(-2, 2)))), fam
    if fam == "two-valued":
        lo, hi = np.exp(rng.uniform(-3, 3, 2))
        return Weight.two_valued(grid, lo, hi, axis=int(rng.integers(grid.dim))), fam
    if fam == "power":
        return Weight.power(grid, float(rng.uniform(-0.9, 2.0)) * (1.0 if grid.dim == 1 else grid.dim / 2.0)), fam
    if fam == "gaussian":
        return Weight.gaussian(grid, float(rng.uniform(-0.5, 0.5))), fam
    return Weight.log_uniform(grid, float(rng.uniform(0.1, 2.5)), rng), fam


def smooth_log_weight(grid: Grid, rng: np.random.Generator, modes: int = 4, amp: float = 1.0) -> Weight:
    """``exp`` of a random low-frequency cosine series; the same draw resamples on any ``N``."""
    a = rng.normal(0.0, amp / np.arange(1, modes + 1))
    b = rng.uniform(0.0, 2.0 * np.pi, (modes, grid.dim))
    x = grid.centers / grid.half_extent
    log = np.zeros(grid.size)
    for j in range(modes):
        log += a[j] * np.prod(np.cos(np.pi * (j + 1) * x + b[j]), axis=1)
    return Weight(grid, log)


def random_function(grid: Grid, rng: np.random.Generator, kind: str | None = None) -> np.ndarray:
    """Non-negative test function: sparse spikes, bumps, an indicator or noise."""
    kind = kind or str(rng.choice(["spikes", "bump", "indicator", "noise"]))
    if kind == "spikes":
        f = np.zeros(grid.size)
        k = int(rng.integers(1, 4))
        f[rng.integers(0, grid.size, k)] = rng.exponential(1.0, k)
        return f
    if kind == "bump":
        c = rng.uniform(-0.7, 0.7, grid.dim) * grid.half_extent
        s = rng.uniform(0.05, 0.5) * grid.half_extent
        return np.exp(-np.sum((grid.centers - c) ** 2, axis=1) / s ** 2)
    if kind == "indicator":
        lo = rng.uniform(-1, 0.5, grid.dim) * grid.half_extent
        hi = lo + rng.uniform(0.1, 1.0, grid.dim) * grid.half_extent
        return np.all((grid.centers >= lo) & (grid.centers < hi), axis=1).astype(float)
    return rng.exponential(1.0, grid.size) * (rng.uniform(size=grid.size) < rng.uniform(0.1, 1.0))


def _potentials():
    return [Potential.zero(), Potential.constant(1.0), Potential.hermite()]


def _quiet():
    ctx = warnings.catch_warnings()
    ctx.__enter__()
    warnings.simplefilter("ignore", CoverageWarning)
    warnings.simplefilter("ignore", ConvergenceWarning)
    return ctx


# refinement sweeps --------------------------------------------------------------

@dataclass
class StabilityTable:
    check: str
    cells: list
    constants: list
    growth: list
    stable: bool
    vacuous: bool
    params: dict = field(default_factory=dict)

    def to_rows(self):
        return [{"cells": n, "constant": c} for n, c in zip(self.cells, self.constants)]

    def to_dict(self):
        return asdict(self)


def _sweep_value(check: str, N: int, **kw) -> float:
    if check in ("heat_domination",):
        V = kw.get("potential", Potential.hermite())
        R = kw.get("half_extent", 8.0)
        g = Grid(1, R, N)
        L = DiscreteOperator(g, V)
        prof = CriticalRadiusProfile(V, g)
        C = enumerate_cubes(g, "centered-sweep").union(enumerate_cubes(g, "dyadic-all-shifts"))
        f = kw.get("f", lambda x: np.exp(-x ** 2))(g.axis)
        ts = kw.get("t_grid", np.concatenate([[0.0], np.geomspace(1e-3, 10.0, 25)]))
        return operators.heat_domination_check(L, prof, f, kw.get("theta", 1.0), ts, C).fitted_constant
    if check in ("heat_kernel_bound", "heat_kernel_bound_wrong_c"):
        V = kw.get("potential", Potential.hermite())
        g = Grid(1, kw.get("half_extent", 8.0), N)
        L = DiscreteOperator(g, V)
        prof = CriticalRadiusProfile(V, g)
        c = 1.0 if check.endswith("wrong_c") else kw.get("c", 5.0)
        ts = kw.get("t_grid", np.geomspace(0.05, 4.0, 8))
        return semigroup.heat_kernel_bound_check(L, prof, ts, kw.get("n_exponent", 2.0), c).fitted_constant
    if check == "frac_domination":
        V = kw.get("potential", Potential.hermite())
        g = Grid(1, kw.get("half_extent", 8.0), N)
        L = DiscreteOperator(g, V)
        prof = CriticalRadiusProfile(V, g)
        alpha = kw.get("alpha", 0.5)
        theta = kw.get("theta", 1.0)
        E = ExponentSet.from_p(1, kw.get("p", 1.5), alpha, theta)
        lats = [build_lattice(g, max_depth(g), s) for s in range(3)]
        f = kw.get("f", lambda x: np.exp(-x ** 2))(g.axis)
        return operators.domination_check(L, prof, f, E, lats).fitted_constant
    if check == "two_weight":
        V = kw.get("potential", Potential.hermite())
        g = Grid(1, kw.get("half_extent", 4.0), N)
        prof = CriticalRadiusProfile(V, g)
        theta = kw.get("theta", 2.0)
        P = PsiFunctional(theta, "sup", prof)
        S = operators.stratify(build_lattice(g, kw.get("depth", 4), 0), theta, P)
        rng = np.random.default_rng(kw.get("draw_seed", 0))
        sig, w = smooth_log_weight(g, rng), smooth_log_weight(g, rng)
        E = kw.get("exponents", ExponentSet.from_p(1, 2.0, 0.25, theta))
        return twoweight.two_weight_check(sig, w, E, S, _two_weight_probes(g), psi=P).max_ratio
    raise ValueError(f"unknown sweep check {check!r}")


def refinement_sweep(check: str, N_list, **kw) -> StabilityTable:
    """Fitted constant per ``N``; stable when every doubling grows it by less than 10%.

    Non-finite constants are never stable.  A single ``N`` is vacuously stable.
    """
    Ns = [int(n) for n in N_list]
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ValueError("N_list must be ascending")
    ctx = _quiet()
    try:
        vals = [float(_sweep_value(check, N, **kw)) for N in Ns]
    finally:
        ctx.__exit__(None, None, None)
    growth = [b / a - 1.0 if a > 0 else math.inf for a, b in zip(vals, vals[1:])]
    finite = all(math.isfinite(v) for v in vals)
    stable = finite and all(gr < STABILITY_GROWTH for gr in growth)
    params = {k: (v.to_dict() if hasattr(v, "to_dict") else v) for k, v in kw.items()
              if isinstance(v, (int, float, str)) or hasattr(v, "to_dict")}
    return StabilityTable(check, Ns, vals, growth, stable, len(Ns) < 2, params)


# suite: rho -----------------------------------------------------------------------

def check_radius_closed_forms(cfg: HarnessConfig) -> list[CheckResult]:
    out = []
    rng = np.random.default_rng(cfg.seed)
    for n, c in ((3, 3.0 / (4.0 * np.pi)), (1, 0.5)):
        V = Potential.constant(c)
        rho0 = potential.critical_radius(V, np.zeros(n))
        pts = rng.uniform(-4, 4, (50, n))
        prof = CriticalRadiusProfile(V)
        res = float(np.nanmax(prof.residuals(pts)))
        ok = abs(rho0 - 1.0) <= 1e-3 and res <= 1e-6
        out.append(CheckResult("critical_radius_closed_form", {"n": n, "V": V.to_dict()}, ok, rho0,
                               details={"residual_max": res, "n_points": 50}))
    for n in (1, 3):
        V = Potential.hermite()
        pts = rng.uniform(-8, 8, (50, n))
        res = float(np.nanmax(CriticalRadiusProfile(V).residuals(pts)))
        out.append(CheckResult("critical_radius_residual", {"n": n, "V": V.to_dict()}, res <= 1e-6, res))
    rho = potential.critical_radius(Potential.zero(), [0.0])
    out.append(CheckResult("critical_radius_sentinel", {"V": "zero"}, bool(np.isinf(rho)), None))
    return out


def hermite_band(n: int, N: int, R: float = 8.0) -> tuple[float, np.ndarray, np.ndarray]:
    """``max/min`` of ``rho(x)(1 + |x|)`` along an axis over the cell centers ``|x| <= R``."""
    g = Grid(n, R, N)
    x = g.axis
    pts = np.zeros((x.size, n))
    pts[:, 0] = x
    rho = potential.critical_radius(Potential.hermite(), pts)
    band = rho * (1.0 + np.abs(x))
    return float(band.max() / band.min()), x, band


def check_hermite_band(cfg: HarnessConfig) -> list[CheckResult]:
    out = []
    for n in (1, 3):
        r1, _, _ = hermite_band(n, 256)
        r2, _, _ = hermite_band(n, 512)
        ok = r1 < 10 and r2 < 10 and r2 <= r1 * (1.0 + 1e-2)
        out.append(CheckResult("hermite_radius_band", {"n": n, "cells": [256, 512]}, ok, r2,
                               details={"ratio_N": r1, "ratio_2N": r2, "growth": r2 / r1 - 1.0}))
    return out


def check_regularity(cfg: HarnessConfig) -> list[CheckResult]:
    out = []
    for V in (Potential.constant(1.0), Potential.hermite()):
        pts = np.linspace(-4, 4, 9)[:, None]
        rep = potential.regularity_diagnostics(V, pts)
        out.append(CheckResult("regularity_diagnostics", {"V": V.to_dict()}, rep.radius_residual_max <= 1e-6,
                               rep.C0, details=rep.to_dict()))
    g = Grid(1, 4.0, 64)
    rh = potential.reverse_holder_check(Potential.hermite(), 2.0, enumerate_cubes(g, "dyadic-all-shifts"))
    out.append(CheckResult("reverse_holder", {"V": "hermite", "sigma": 2.0}, None, rh.constant))
    return out


# suite: weights ---------------------------------------------------------------------

def classical_maximal_oracle(f: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Brute-force 1-D maximal function over all cell-aligned intervals."""
    N = f.size
    F = np.concatenate([[0.0], np.cumsum(np.abs(f))])
    out = np.zeros(N)
    for i in range(N):
        best = 0.0
        for a in range(0, i + 1):
            for b in range(i + 1, N + 1):
                best = max(best, (F[b] - F[a]) / (b - a))
        out[i] = best
    return out


def classical_ap_oracle(w: np.ndarray, p: float) -> float:
    """Brute-force 1-D ``A_p`` bracket over all cell-aligned intervals."""
    N = w.size
    best = 0.0
    for a in range(N):
        for b in range(a + 1, N + 1):
            s = w[a:b]
            best = max(best, s.mean() * np.mean(s ** (-1.0 / (p - 1.0))) ** (p - 1.0))
    return best


def check_classical_degeneration(cfg: HarnessConfig) -> list[CheckResult]:
    out = []
    rng = np.random.default_rng(cfg.seed + 1)
    g = Grid(1, 1.0, 32)
    C = enumerate_cubes(g, "exhaustive-small")
    prof = CriticalRadiusProfile(Potential.zero(), g)
    worst_psi, worst_char, worst_max, worst_oracle = 0.0, 0.0, 0.0, 0.0
    for theta in cfg.theta_values:
        P = PsiFunctional(theta, "centered", prof)
        worst_psi = max(worst_psi, float(np.max(np.abs(P.values(C) - 1.0))))
        for p in cfg.p_values:
            E = ExponentSet(1, p, p, 0.0, theta)
            worst_char = max(worst_char, abs(weights.ap_theta(Weight.constant(g), E, P, C).value - 1.0))
        f = random_function(g, rng)
        Mt = operators.maximal_adapted(f, 0.0, P, C).samples
        worst_max = max(worst_max, float(np.max(np.abs(Mt - classical_maximal_oracle(f)))))
    w = Weight.power(g, 0.5)
    char = weights.ap_theta(w, ExponentSet(1, 2.0, 2.0), PsiFunctional(0.0, "centered", prof), C).value
    worst_oracle = abs(char - classical_ap_oracle(w.samples, 2.0))
    ok = worst_psi == 0.0 and worst_char <= 1e-9 and worst_max <= 1e-12 and worst_oracle <= 1e-12
    return [CheckResult("classical_degeneration", {"V": "zero", "cells": 32, "collection": "exhaustive-small"},
                        ok, worst_max, details={"psi_dev": worst_psi, "char_dev": worst_char,
                                                "maximal_dev": worst_max, "ap_oracle_dev": worst_oracle})]


def check_tilde_direction(cfg: HarnessConfig) -> list[CheckResult]:
    out = []
    rng = np.random.default_rng(cfg.seed + 2)
    g = Grid(1, 4.0, 64)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    ok, ratios = True, []
    for V in _potentials():
        prof = CriticalRadiusProfile(V, g)
        for theta in (1.0, 2.0):
            for _ in range(5):
                w, _ = random_weight(g, rng)
                tc = weights.tilde_comparison(w, ExponentSet(1, 2.0, 2.0, 0.0, theta),
                                              PsiFunctional(theta, "centered", prof), C)
                ok &= tc.easy_direction_holds
                ratios.append(tc.ratio)
    out.append(CheckResult("tilde_easy_direction", {"cells": 64}, ok, float(max(ratios))))
    return out


def example_exhibit(N: int = 256, R: float = 4.0, theta: float = 4.0, p: float = 2.0, etas=None):
    g = Grid(1, R, N)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    prof = CriticalRadiusProfile(Potential.hermite(), g)
    E = ExponentSet(1, p, p, 0.0, theta)
    etas = np.geomspace(0.01, 2.0, 12) if etas is None else np.asarray(etas)
    sweep = bmo.exp_log_backward(g.radius ** 2, etas, E, PsiFunctional(theta, "centered", prof), C, ceiling=10.0)
    classical = [weights.ap_theta(Weight.gaussian(g, e), E.with_theta(0.0), PsiFunctional(0.0), C).value
                 for e in etas]
    hits = [(float(e), a, c) for e, a, c in zip(etas, sweep.characteristics, classical) if a <= 10 and c > 1e3]
    return hits, sweep, classical


def check_example_exhibit(cfg: HarnessConfig) -> list[CheckResult]:
    hits, sweep, classical = example_exhibit()
    best = hits[0] if hits else None
    return [CheckResult("adapted_class_strictly_larger",
                        {"V": "hermite", "cells": 256, "half_extent": 4.0, "theta": 4.0, "p": 2.0},
                        bool(hits), best[1] if best else None,
                        witness={"eta": best[0], "classical": best[2]} if best else {},
                        details={"etas": sweep.etas, "adapted": sweep.characteristics, "classical": classical})]


def check_characteristic_properties(cfg: HarnessConfig) -> list[CheckResult]:
    rng = np.random.default_rng(cfg.seed + 3)
    g = Grid(1, 4.0, 32)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    prof = CriticalRadiusProfile(Potential.hermite(), g)
    mono, duality = True, 0.0
    for _ in range(10):
        w, _ = random_weight(g, rng)
        vals = [weights.ap_theta(w, ExponentSet(1, 2.0, 2.0, 0.0, t), PsiFunctional(t, "centered", prof), C).value
                for t in (0.0, 1.0, 2.0, 4.0)]
        mono &= all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
        E = ExponentSet.from_p(1, 2.0, 0.25)
        lhs = weights.restricted_chars(w.pow(-1.0), ExponentSet(1, E.q_prime, E.p_prime, 0.25), C).value
        rhs = weights.restricted_chars(w, E, C).value ** (E.p_prime / E.q)
        duality = max(duality, abs(lhs / rhs - 1.0))
    return [CheckResult("characteristic_nonincreasing_in_theta", {"cells": 32}, mono, None),
            CheckResult("characteristic_duality", {"cells": 32}, duality <= 1e-10, duality)]


# suite: bmo ---------------------------------------------------------------------------

def check_exp_log_bound(cfg: HarnessConfig) -> list[CheckResult]:
    rng = np.random.default_rng(cfg.seed + 4)
    g = Grid(1, 4.0, 64)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    profs = {V.family: CriticalRadiusProfile(V, g) for V in _potentials()}
    violations, worst, witness = 0, 0.0, {}
    for k in range(cfg.weight_trials):
        fam = str(rng.choice(list(profs)))
        p = float(rng.choice([1.5, 2.0, 4.0]))
        theta = float(rng.choice([1.0, 2.0]))
        w, wfam = random_weight(g, rng)
        r = bmo.exp_log_forward(w, ExponentSet(1, p, p, 0.0, theta), PsiFunctional(theta, "centered", profs[fam]), C)
        ratio = r.norm / r.bound if r.bound > 0 else 0.0
        if not r.holds:
            violations += 1
        if ratio > worst:
            worst, witness = ratio, {"trial": k, "V": fam, "p": p, "theta": theta, "weight": wfam}
    return [CheckResult("exp_log_bound", {"trials": cfg.weight_trials, "cells": 64}, violations == 0, worst,
                        witness=witness, details={"violations": violations})]


def check_bmo_properties(cfg: HarnessConfig) -> list[CheckResult]:
    rng = np.random.default_rng(cfg.seed + 5)
    g = Grid(1, 4.0, 64)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    prof = CriticalRadiusProfile(Potential.hermite(), g)
    P = PsiFunctional(1.0, "centered", prof)
    ok = True
    for _ in range(10):
        f = rng.normal(size=g.size)
        vals = [bmo.bmo_theta_norm(f, t, P, C) for t in (0.0, 1.0, 2.0)]
        ok &= all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
        c = rng.normal() * 3
        ok &= abs(bmo.bmo_theta_norm(f + c, 1.0, P, C) - vals[1]) <= 1e-10 * (1 + vals[1])
        ok &= abs(bmo.bmo_theta_norm(c * f, 1.0, P, C) - abs(c) * vals[1]) <= 1e-10 * (1 + abs(c) * vals[1])
    n1 = bmo.bmo_theta_norm(g.radius ** 2, 1.0, P, C)
    g2 = g.refined()
    n2 = bmo.bmo_theta_norm(g2.radius ** 2, 1.0, PsiFunctional(1.0, "centered", CriticalRadiusProfile(Potential.hermite(), g2)),
                            enumerate_cubes(g2, "dyadic-all-shifts"))
    prof0 = CriticalRadiusProfile(Potential.zero(), g)
    gl = Grid(1, 1.0, 1024)
    jn = bmo.john_nirenberg_profile(np.log(np.abs(gl.axis)), gl.root, 0.0, np.linspace(0, 4, 17),
                                    PsiFunctional(0.0, "centered", CriticalRadiusProfile(Potential.zero(), gl)),
                                    CubeCollection(gl, [gl.root]))
    return [CheckResult("bmo_norm_properties", {"cells": 64}, bool(ok), None),
            CheckResult("bmo_square_hermite_refinement", {"theta": 1.0}, abs(n2 / n1 - 1) < 0.1, n2,
                        details={"N": n1, "2N": n2}),
            CheckResult("john_nirenberg_decay", {"f": "log|x|", "V": "zero"},
                        bool(jn.rate > 0 and np.isfinite(jn.exp_average)
                             and np.all(np.diff(jn.fractions) <= 0)), jn.rate, details=jn.summary())]


# suite: maximal ------------------------------------------------------------------------

def check_weak_type(cfg: HarnessConfig) -> list[CheckResult]:
    rng = np.random.default_rng(cfg.seed + 6)
    grids = [Grid(1, 4.0, 64), Grid(2, 4.0, 16)]
    colls = {(g.dim, s): build_lattice(g, max_depth(g), s).collection
             for g in grids for s in range(3 ** g.dim)}
    profs = {(g.dim, V.family): CriticalRadiusProfile(V, g) for g in grids for V in _potentials()}
    worst, witness, viol = 0.0, {}, 0
    for k in range(cfg.weak_trials):
        g = grids[0] if k % 4 else grids[1]
        s = int(rng.integers(3 ** g.dim))
        fam = str(rng.choice(["zero", "constant", "hermite"]))
        p = float(rng.choice(cfg.p_values))
        theta = float(rng.choice(cfg.theta_values))
        w, wfam = random_weight(g, rng)
        f = random_function(g, rng)
        ctx = _quiet()
        try:
            rep = operators.weak_type_check(f, w, ExponentSet(g.dim, p, p, 0.0, theta),
                                            PsiFunctional(theta, "centered", profs[(g.dim, fam)]), colls[(g.dim, s)])
        finally:
            ctx.__exit__(None, None, None)
        if rep.max_ratio > 1 + 1e-9:
            viol += 1
        if rep.max_ratio > worst:
            worst, witness = rep.max_ratio, {"trial": k, "dim": g.dim, "shift": s, "V": fam, "p": p,
                                             "theta": theta, "weight": wfam}
    return [CheckResult("dyadic_weak_type_constant_one", {"trials": cfg.weak_trials}, viol == 0, worst,
                        witness=witness, details={"violations": viol})]


def heat_domination_table(cfg: HarnessConfig):
    table = {}
    for V in (Potential.hermite(), Potential.constant(1.0)):
        for theta in (1.0, 2.0, 4.0):
            table[(V.family, theta)] = refinement_sweep("heat_domination", cfg.heat_cells, potential=V, theta=theta)
    return table


def check_heat_domination(cfg: HarnessConfig) -> list[CheckResult]:
    table = heat_domination_table(cfg)
    out = []
    for (fam, theta), st in table.items():
        out.append(CheckResult("heat_domination_stable", {"V": fam, "theta": theta, "cells": st.cells},
                               st.stable, st.constants[-1], details={"constants": st.constants, "growth": st.growth}))
    for fam in ("hermite", "constant"):
        finest = [table[(fam, t)].constants[-1] for t in (1.0, 2.0, 4.0)]
        mono = all(b <= a for a, b in zip(finest, finest[1:]))
        out.append(CheckResult("heat_domination_nonincreasing_in_theta", {"V": fam, "theta": [1.0, 2.0, 4.0]},
                               mono, None, details={"constants": finest}))
    return out


def check_maximal_properties(cfg: HarnessConfig) -> list[CheckResult]:
    rng = np.random.default_rng(cfg.seed + 7)
    g = Grid(1, 4.0, 32)
    C = enumerate_cubes(g, "dyadic-all-shifts")
    prof = CriticalRadiusProfile(Potential.hermite(), g)
    ok_order, ok_major, worst_major, ok_sub = True, True, 0.0, True
    doob = 0.0
    for _ in range(10):
        f, h = random_function(g, rng), random_function(g, rng)
        theta = float(rng.choice([1.0, 2.0]))
        alpha = float(rng.choice([0.0, 0.25]))
        Pc = PsiFunctional(theta, "centered", prof)
        m_c = operators.maximal_adapted(f, alpha, Pc, C).samples
        m_s = operators.maximal_adapted(f, alpha, Pc.with_mode("sup"), C).samples
        ok_order &= bool(np.all(m_c <= m_s * (1 + 1e-12)))
        mfh = operators.maximal_adapted(f + h, alpha, Pc, C).samples
        ok_sub &= bool(np.all(mfh <= m_c + operators.maximal_adapted(h, alpha, Pc, C).samples + 1e-12))
        w, _ = random_weight(g, rng, "log-uniform")
        E = ExponentSet.from_p(1, 2.0, alpha, theta)
        holds, ratio = operators.majorization_check(f, w, E, Pc, C)
        ok_major &= holds
        worst_major = max(worst_major, ratio)
        lat = build_lattice(g, max_depth(g), 0).collection
        Mf = operators.maximal_weighted(f, w, 0.0, lat).samples
        lp = lambda x: float(np.sum(np.abs(x) ** 2 * w.samples)) ** 0.5
        if lp(f) > 0:
            doob = max(doob, lp(Mf) / lp(f))
    return [CheckResult("centered_penalty_maximal_below_sup", {"cells": 32}, ok_order, None),
            CheckResult("maximal_sublinear", {"cells": 32}, ok_sub, None),
            CheckResult("pointwise_majorization", {"cells": 32}, ok_major, worst_major),
            CheckResult("weighted_doob_ratio", {"p": 2.0}, doob <= 2.0, doob, details={"budget": 2.0})]


# suite: heat ----------------------------------------------------------------------------

def check_heat_semigroup(cfg: HarnessConfig) -> list[CheckResult]:
    rng = np.random.default_rng(cfg.seed + 8)
    out = []
    g = Grid(1, 10.0, 512)
    L = DiscreteOperator(g, Potential.hermite())
    ground = L.eigenvectors[:, 0]
    lam0 = L.eigenvalues[0]
    t = 0.7
    err = float(np.max(np.abs(semigroup.heat_apply(L, ground, t).samples - np.exp(-lam0 * t) * ground)))
    out.append(CheckResult("hermite_ground_state", {"cells": 512, "half_extent": 10.0},
                           abs(lam0 - 1.0) <= 0.01 and err <= 1e-10, float(lam0)))
    g2 = Grid(1, 8.0, 256)
    ok = True
    for V in _potentials():
        L2 = DiscreteOperator(g2, V)
        ok &= L2.orthogonality_error() <= 1e-8
        f = rng.exponential(size=g2.size)
        a = L2.heat(L2.heat(f, 0.3), 0.5)
        b = L2.heat(f, 0.8)
        ok &= float(np.max(np.abs(a - b))) <= 1e-10 * max(1.0, np.max(np.abs(b)))
        ok &= bool(np.all(L2.heat(f, 0.4) >= -1e-12))
        ok &= np.linalg.norm(L2.heat(f - f.mean(), 0.2)) <= np.linalg.norm(f - f.mean()) * (1 + 1e-12)
        ok &= bool(np.all(L2.heat_kernel(0.3) <= L2.free.heat_kernel(0.3) + 1e-12))
    out.append(CheckResult("semigroup_properties", {"cells": 256}, bool(ok), None))
    qerr = 0.0
    for V in (Potential.zero(), Potential.hermite()):
        L3 = DiscreteOperator(Grid(1, 8.0, 256), V)
        for alpha in (0.25, 0.5):
            for j in range(4):
                f = rng.normal(size=256)
                a = semigroup.frac_power_apply(L3, f, alpha, "spectral").samples
                b = semigroup.frac_power_apply(L3, f, alpha, "quadrature").samples
                qerr = max(qerr, float(np.max(np.abs(a - b)) / np.max(np.abs(a))))
    out.append(CheckResult("frac_power_quadrature_agreement", {"alpha": [0.25, 0.5]}, qerr <= 1e-3, qerr))
    for V in (Potential.hermite(), Potential.constant(1.0)):
        st = refinement_sweep("heat_kernel_bound", cfg.heat_cells, potential=V)
        ok = st.stable and all(c <= HEAT_BOUND_BUDGET for c in st.constants)
        out.append(CheckResult("heat_kernel_gaussian_bound", {"V": V.family, "c": 5.0, "N_exponent": 2.0,
                                                               "cells": st.cells}, ok, st.constants[-1],
                               details={"constants": st.constants, "growth": st.growth, "budget": HEAT_BOUND_BUDGET}))
    for V in (Potential.zero(), Potential.hermite()):
        L4 = DiscreteOperator(Grid(1, 8.0, 256), V)
        rep = semigroup.frac_kernel_bound_check(L4, CriticalRadiusProfile(V, L4.grid), 0.5, 2.0 if not V.is_zero else 0.0)
        out.append(CheckResult("frac_kernel_bound", {"V": V.family, "alpha": 0.5, "phi": rep.phi}, None,
                               rep.fitted_constant, witness=rep.witness))
    return out


# suite: fracint ---------------------------------------------------------------------------

def check_stratification(cfg: HarnessConfig) -> list[CheckResult]:
    rng = np.random.default_rng(cfg.seed + 9)
    ok_part, ok_recon, ok_exact, worst = True, True, True, 0.0
    for g in (Grid(1, 4.0, 64), Grid(2, 4.0, 64)):
        for V in (Potential.hermite(), Potential.constant(1.0), Potential.zero()):
            prof = CriticalRadiusProfile(V, g)
            for s in range(3 ** g.dim):
                D = build_lattice(g, max_depth(g), s)
                for theta in (1.0, 2.0) if g.dim == 2 else (1.0, 2.0, 4.0):
                    P = PsiFunctional(theta, "sup", prof)
                    S = operators.stratify(D, theta, P)
                    ok_part &= S.is_partition()
                    f = random_function(g, rng)
                    alpha = 0.5 if g.dim == 1 else 1.0
                    full = operators.dyadic_frac_int(f, alpha, P, D).samples
                    Ssum = S.stratified_sum(f, alpha)
                    parts = np.zeros_like(full)
                    for r, Qr in S.strata.items():
                        parts += operators.dyadic_frac_int(f, alpha, P, Qr).samples
                    ok_exact &= bool(np.allclose(parts, full, rtol=1e-12, atol=1e-14))
                    gap = np.abs(full - Ssum)
                    lim = (2.0 ** theta - 1.0) * Ssum
                    ok_recon &= bool(np.all(gap <= lim * (1 + 1e-12) + 1e-14))
                    with np.errstate(divide="ignore", invalid="ignore"):
                        worst = max(worst, float(np.nanmax(np.where(lim > 0, gap / lim, 0.0))))
    return [CheckResult("stratification_partition", {"cells": 64}, bool(ok_part and ok_exact), None),
            CheckResult("stratification_reconstruction", {"cells": 64}, bool(ok_recon), worst)]


def check_stratum_characteristics(cfg: HarnessConfig) -> list[CheckResult]:
    rng = np.random.default_rng(cfg.seed + 10)
    g = Grid(1, 4.0, 64)
    viol, worst = 0, 0.0
    profs = {V.family: CriticalRadiusProfile(V, g) for V in _potentials()}
    lats = [build_lattice(g, 6, s) for s in range(3)]
    for k in range(cfg.stratum_trials):
        fam = str(rng.choice(list(profs)))
        theta = float(rng.choice([1.0, 2.0, 4.0]))
        p = float(rng.choice([1.5, 2.0, 4.0]))
        alpha = float(rng.choice([0.0, 0.25, 0.5]))
        if 1.0 / p - alpha <= 0:
            alpha = 0.0
        E = ExponentSet.from_p(1, p, alpha, theta)
        w, _ = random_weight(g, rng)
        P = PsiFunctional(theta, "sup", profs[fam])
        S = operators.stratify(lats[k % 3], theta, P)
        for row in operators.stratum_characteristic_check(w, E, S, P):
            viol += not row.passed
            worst = max(worst, row.bracket / row.bound)
    return [CheckResult("stratum_characteristic_growth", {"trials": cfg.stratum_trials, "cells": 64}, viol == 0,
                        worst, details={"violations": viol})]


def check_frac_domination(cfg: HarnessConfig) -> list[CheckResult]:
    out = []
    for V in (Potential.zero(), Potential.hermite()):
        for theta in (1.0, 2.0):
            st = refinement_sweep("frac_domination", cfg.heat_cells, potential=V, theta=theta, alpha=0.5)
            out.append(CheckResult("frac_power_dyadic_domination", {"V": V.family, "alpha": 0.5, "theta": theta,
                                                                    "cells": st.cells},
                                   st.stable, st.constants[-1],
                                   details={"constants": st.constants, "growth": st.growth}))
    return out


def slope_experiment(N: int = 256, deltas=(0.2, 0.1, 0.05, 0.025)):
    """Log-log slope of the empirical norm of the dyadic fractional integral against ``[w]``.

    Exponents ``(p, q) = (2, 6)`` with ``alpha/n = 1/3`` on a 1-D grid,
    power weights ``|x|^(1/2 - delta)`` and the unshifted lattice.
    """
    g = Grid(1, 4.0, N)
    D = build_lattice(g, max_depth(g), 0).collection
    E = ExponentSet(1, 2.0, 6.0, 1.0 / 3.0, 0.0)
    xs, ys, rows = [], [], []
    T = lambda f: operators.restricted_frac_int(f, E.alpha, D).samples
    for d in deltas:
        w = Weight.power(g, 0.5 - d)
        sig = w.pow(-E.p_prime).samples
        char = weights.restricted_chars(w, E, D, "pq").value
        probes = [sig * D.indicator(j) for j in range(len(D))]
        probes += [D.indicator(j) for j in range(len(D))]
        nb, _ = operators.norm_estimate(T, E.p, E.q, w, probes)
        xs.append(math.log(char))
        ys.append(math.log(nb))
        rows.append({"delta": d, "characteristic": char, "norm_lower_bound": nb})
    slope = float(np.polyfit(xs, ys, 1)[0])
    return slope, E.growth, rows


def check_slope(cfg: HarnessConfig) -> list[CheckResult]:
    slope, pred, rows = slope_experiment()
    return [CheckResult("norm_exponent_slope", {"p": 2.0, "q": 6.0, "alpha_over_n": 1 / 3, "cells": 256},
                        slope <= pred + 0.1, slope, details={"predicted": pred, "rows": rows})]


def check_base_weak(cfg: HarnessConfig) -> list[CheckResult]:
    rng = np.random.default_rng(cfg.seed + 11)
    g = Grid(1, 4.0, 32)
    worst, viol = 0.0, 0
    for k in range(30):
        alpha = float(rng.choice([0.25, 0.5]))
        lat = build_lattice(g, max_depth(g), int(rng.integers(3))).collection
        idx = np.sort(rng.choice(len(lat), size=int(rng.integers(1, len(lat))), replace=False))
        Q = lat.subset(idx)
        w, _ = random_weight(g, rng)
        rep = operators.base_weak_check(random_function(g, rng), w, alpha, Q)
        viol += not rep.passed
        worst = max(worst, rep.max_ratio / rep.budget)
    return [CheckResult("base_weak_type", {"trials": 30}, viol == 0, worst, details={"violations": viol})]


# suite: rdf ---------------------------------------------------------------------------------

def check_rdf(cfg: HarnessConfig) -> list[CheckResult]:
    rng = np.random.default_rng(cfg.seed + 12)
    g = Grid(1, 4.0, 32)
    lats = [build_lattice(g, max_depth(g), s).collection for s in range(3)]
    counts = {"majorizes": 0, "norm": 0, "tail": 0, "sublinear": 0}
    ratios, worst_norm = [], 0.0
    witness = {}
    for k in range(cfg.rdf_trials):
        gg = random_function(g, rng)
        if not np.any(gg > 0):
            gg[int(rng.integers(g.size))] = 1.0
        v, fam = random_weight(g, rng)
        r0 = float(rng.choice([1.0, 1.5, 2.0]))
        r = r0 + float(rng.uniform(0.5, 3.0))
        Q = lats[k % 3]
        ctx = _quiet()
        try:
            res = operators.rdf_iterate(gg, v, r0, r, Q, K_terms=30)
        finally:
            ctx.__exit__(None, None, None)
        counts["majorizes"] += res.majorizes
        counts["norm"] += res.norm_ok
        counts["tail"] += res.tail_ok
        counts["sublinear"] += res.sublinear_ok
        ratios.append(res.char_ratio)
        if res.G_norm / res.g_norm > worst_norm:
            worst_norm = res.G_norm / res.g_norm
            witness = {"trial": k, "r0": r0, "r": r, "weight": fam}
    n = cfg.rdf_trials
    return [CheckResult("rdf_majorant", {"trials": n}, counts["majorizes"] == n, None),
            CheckResult("rdf_norm_doubling", {"trials": n}, counts["norm"] == n, worst_norm, witness=witness,
                        details={"passed_trials": counts["norm"]}),
            CheckResult("rdf_tail_bound", {"trials": n}, counts["tail"] == n, None,
                        details={"passed_trials": counts["tail"]}),
            CheckResult("rdf_subadditive_step", {"trials": n}, counts["sublinear"] == n, None),
            CheckResult("rdf_characteristic_ratio", {"trials": n}, None,
                        float(np.max([x for x in ratios if np.isfinite(x)] or [np.nan])),
                        details={"majorant_with_zeros": int(np.sum(~np.isfinite(ratios)))})]


# suite: twoweight ------------------------------------------------------------------------------

def _two_weight_probes(g: Grid) -> list[np.ndarray]:
    x = g.axis
    return [np.ones(g.size)] + [np.exp(-((x - c) / s) ** 2) for c in (-2.0, 0.0, 1.5) for s in (0.3, 1.0)]


def check_two_weight(cfg: HarnessConfig) -> list[CheckResult]:
    rng = np.random.default_rng(cfg.seed + 13)
    out = []
    norm_dev = 0.0
    for p in (1.2, 1.5, 2.0, 3.0, 4.0):
        for delta in (0.05, 0.1, 0.5, 1.0, 2.0):
            norm_dev = max(norm_dev, abs(twoweight.EntropyFunction(p, delta).normalization() - 1.0))
    out.append(CheckResult("entropy_normalization", {"p": [1.2, 1.5, 2.0, 3.0, 4.0], "delta": [0.05, 0.1, 0.5, 1.0, 2.0]},
                           norm_dev <= 1e-6, norm_dev))
    g = Grid(1, 4.0, 64)
    profs = {V.family: CriticalRadiusProfile(V, g) for V in _potentials()}
    worst, witness = 0.0, {}
    for k in range(cfg.twoweight_trials):
        fam = str(rng.choice(list(profs)))
        theta = float(rng.choice([1.0, 2.0]))
        p = float(rng.choice([1.5, 2.0]))
        alpha = float(rng.choice([0.0, 0.25]))
        E = ExponentSet.from_p(1, p, alpha, theta)
        P = PsiFunctional(theta, "sup", profs[fam])
        S = operators.stratify(build_lattice(g, 4, int(rng.integers(3))), theta, P)
        sig, w = smooth_log_weight(g, rng), smooth_log_weight(g, rng)
        rep = twoweight.two_weight_check(sig, w, E, S, _two_weight_probes(g), psi=P)
        if rep.max_ratio > worst:
            worst, witness = rep.max_ratio, {"trial": k, "V": fam, "theta": theta, "p": p, "alpha": alpha}
    out.append(CheckResult("two_weight_testing_ratio", {"trials": cfg.twoweight_trials, "budget": 10.0},
                           worst <= 10.0, worst, witness=witness))
    stable, growths = True, []
    for k in range(5):
        st = refinement_sweep("two_weight", (64, 128, 256), draw_seed=cfg.seed * 1000 + k)
        stable &= st.stable
        growths.append(max(abs(x) for x in st.growth))
    out.append(CheckResult("two_weight_refinement", {"cells": [64, 128, 256], "depth": 4}, bool(stable),
                           float(max(growths))))
    v = smooth_log_weight(g, rng)
    w = smooth_log_weight(g, rng)
    T = twoweight.frac_int_matrix(0.25, build_lattice(g, 6, 0).collection)
    probes = [rng.exponential(size=g.size) for _ in range(5)]
    ident = twoweight.dual_form_identity(T, v, w, 2.0, 2.0, probes)
    out.append(CheckResult("dual_form_identity", {"p": 2.0, "q": 2.0},
                           ident["probe_max_rel_diff"] <= 1e-12 and ident["svd_rel_diff"] <= 1e-10,
                           ident["svd_rel_diff"], details=ident))
    return out


# suite: controls ---------------------------------------------------------------------------------

def check_negative_controls(cfg: HarnessConfig) -> list[CheckResult]:
    """Both planted bugs must be detected; ``passed`` means "detected"."""
    out = []
    st = refinement_sweep("heat_kernel_bound_wrong_c", cfg.heat_cells, potential=Potential.hermite())
    flagged = (not st.stable) or any(c > HEAT_BOUND_BUDGET for c in st.constants)
    out.append(CheckResult("control_wrong_gaussian_constant", {"c": 1.0, "cells": st.cells}, flagged,
                           st.constants[-1], details={"constants": st.constants, "stable": st.stable}))
    g = Grid(1, 4.0, 64)
    prof = CriticalRadiusProfile(Potential.hermite(), g)
    theta = 2.0
    P = PsiFunctional(theta, "sup", prof)
    S = operators.stratify(build_lattice(g, 6, 0), theta, P)
    E = ExponentSet.from_p(1, 2.0, 0.25, theta)
    rows = operators.stratum_characteristic_check(Weight.constant(g), E, S, P, edge_offset=0)
    good = operators.stratum_characteristic_check(Weight.constant(g), E, S, P, edge_offset=1)
    flagged = any(not r.passed for r in rows) and all(r.passed for r in good)
    out.append(CheckResult("control_psi_exponent_off_by_one", {"theta": theta, "weight": "constant"}, flagged,
                           max(r.bracket / r.bound for r in rows)))
    return out


SUITES: dict[str, list[Callable]] = {
    "rho": [check_radius_closed_forms, check_hermite_band, check_regularity],
    "weights": [check_classical_degeneration, check_tilde_direction, check_example_exhibit,
                check_characteristic_properties],
    "bmo": [check_exp_log_bound, check_bmo_properties],
    "maximal": [check_weak_type, check_heat_domination, check_maximal_properties],
    "heat": [check_heat_semigroup],
    "fracint": [check_stratification, check_stratum_characteristics, check_frac_domination, check_slope,
                check_base_weak],
    "rdf": [check_rdf],
    "twoweight": [check_two_weight],
    "controls": [check_negative_controls],
}


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_suite(name: str, config: HarnessConfig | dict | None = None) -> SuiteReport:
    """Run one suite (or ``"all"``) and collect its checks.

    Checks share no mutable state; with ``SCHRODINGER_WEIGHTS_THREADS > 1``
    they run on a thread pool and results are assembled in suite order, so
    the report does not depend on scheduling.  An empty ``p`` or ``theta``
    matrix gives an empty report.
    """
    if isinstance(config, HarnessConfig):
        cfg = config
        cfg.validate()
    else:
        cfg = HarnessConfig.from_dict(config)
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise KeyError(f"unknown suite {name!r}; expected one of {sorted(SUITES) + ['all']}")
    if cfg.empty:
        return SuiteReport(name, cfg.seed, [])
    jobs = [(n, fn) for n in names for fn in SUITES[n]]
    results = []
    ctx = _quiet()
    try:
        workers = _worker_count()
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                batches = list(pool.map(lambda job: job[1](cfg), jobs))
        else:
            batches = [fn(cfg) for _, fn in jobs]
    finally:
        ctx.__exit__(None, None, None)
    for (n, _), batch in zip(jobs, batches):
        for r in batch:
            r.params = {"suite": n, **r.params}
            results.append(r)
    return SuiteReport(name, cfg.seed, results)
