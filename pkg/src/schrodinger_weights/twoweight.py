"""Entropy-bump testing quantities for two-weight fractional integral bounds."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .grid import Cube, CubeCollection, GridFunction
from .operators import CoverageWarning, Stratification, maximal_classical, restricted_frac_int
from .potential import PsiFunctional
from .weights import ExponentSet, Weight

__all__ = [
    "EntropyFunction",
    "rho_w",
    "rho_w_all",
    "BumpReport",
    "bump_characteristic",
    "TwoWeightReport",
    "two_weight_check",
    "frac_int_matrix",
    "dual_form_identity",
]

_CLAMP = 1.0 + 1e-9


@dataclass(frozen=True)
class EntropyFunction:
    """``eps(t) = delta^(-1/p) (log(e t))^((1 + delta)/p)`` on ``(1, inf)``."""

    p: float
    delta: float = 1.0

    def __post_init__(self):
        if not self.p >= 1 or not self.delta > 0:
            raise ValueError("need p >= 1 and delta > 0")

    def from_log(self, log_t):
        """``eps`` as a function of ``log t`` (no overflow for huge ``t``)."""
        return self.delta ** (-1.0 / self.p) * (1.0 + np.asarray(log_t, dtype=float)) ** ((1.0 + self.delta) / self.p)

    def log_from_log(self, log_t):
        return (-math.log(self.delta) + (1.0 + self.delta) * np.log1p(np.asarray(log_t, dtype=float))) / self.p

    def __call__(self, t):
        t = np.maximum(np.asarray(t, dtype=float), _CLAMP)
        out = self.from_log(np.log(t))
        return float(out) if np.ndim(out) == 0 else out

    def normalization(self) -> float:
        """``int_1^inf dt / (t eps(t)^p)`` by adaptive quadrature.

        Substituting ``t = exp(exp(v) - 1)`` maps the slowly decaying tail
        onto an exponentially decaying integrand on ``[0, inf)``.
        """
        def integrand(v):
            with np.errstate(over="ignore"):
                return float(np.exp(v - self.p * self.log_from_log(np.expm1(v))))

        val, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
        return float(val)

    def is_monotone(self, samples: int = 200) -> bool:
        t = np.geomspace(_CLAMP, 1e12, samples)
        return bool(np.all(np.diff(self(t)) >= 0))


def rho_w(w: Weight, Q: Cube | int, C: CubeCollection) -> float:
    """``(1/w(Q)) int_Q M(w 1_Q)`` with ``M`` the plain maximal over ``C`` plus ``Q`` itself."""
    if isinstance(Q, Cube):
        single = CubeCollection(C.grid, [Q])
        cells = single.cells_of(0)
        C = C.union(single, tag=C.tag)
    else:
        cells = C.cells_of(int(Q))
    wv = w.samples
    loc = np.zeros_like(wv)
    loc[cells] = wv[cells]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CoverageWarning)
        M = maximal_classical(loc, C).samples
    return float(np.sum(M[cells]) / np.sum(wv[cells]))


def rho_w_all(w: Weight, C: CubeCollection, within: CubeCollection | None = None) -> np.ndarray:
    """``rho_w`` for every cube of ``C`` (maximal operator over ``within`` or ``C``)."""
    base = within if within is not None else C
    if within is not None:
        return np.array([rho_w(w, Q, base) for Q in C.cubes])
    return np.array([rho_w(w, j, base) for j in range(len(C))])


@dataclass
class BumpReport:
    """Per-cube ``beta(Q)`` with the per-stratum suprema and the penalized global value."""

    beta: np.ndarray
    rho_sigma: np.ndarray
    rho_w: np.ndarray
    per_stratum: dict
    empty_strata: list
    global_value: float
    collection: str
    psi_theta: float

    def to_rows(self):
        return [{"index": j, "beta": float(b), "rho_sigma": float(rs), "rho_w": float(rw)}
                for j, (b, rs, rw) in enumerate(zip(self.beta, self.rho_sigma, self.rho_w))]

    def summary(self):
        return {"per_stratum": {str(k): v for k, v in self.per_stratum.items()},
                "empty_strata": self.empty_strata, "global": self.global_value,
                "collection": self.collection, "psi_theta": self.psi_theta}


def _beta(sigma: Weight, w: Weight, E: ExponentSet, eps_p: EntropyFunction, eps_qp: EntropyFunction,
          C: CubeCollection, within: CubeCollection | None = None):
    n = C.grid.dim
    s_mass, w_mass = sigma.mass(C), w.mass(C)
    rs = np.maximum(rho_w_all(sigma, C, within), _CLAMP)
    rw = np.maximum(rho_w_all(w, C, within), _CLAMP)
    beta = (s_mass ** (1.0 / E.p_prime) * w_mass ** (1.0 / E.q) / C.volumes ** (1.0 - E.alpha / n)
            * rs ** (1.0 / E.p) * eps_p(rs) * rw ** (1.0 / E.q_prime) * eps_qp(rw))
    return beta, rs, rw


def bump_characteristic(sigma: Weight, w: Weight, E: ExponentSet, eps_p: EntropyFunction,
                        eps_qp: EntropyFunction, strat: Stratification,
                        psi: PsiFunctional | None = None) -> BumpReport:
    """``beta(Q)`` on the stratified lattice.

    Per-stratum values are suprema of ``beta`` over each stratum (an empty
    stratum reports 0 and is flagged).  The global value divides ``beta`` by
    the centered penalty at ``theta/2``.
    """
    C = strat.source
    beta, rs, rw = _beta(sigma, w, E, eps_p, eps_qp, C)
    per, empty = {}, []
    top = max(strat.levels) if strat.levels else -1
    for r in range(0, top + 1):
        idx = np.flatnonzero(strat.index == r)
        if idx.size == 0:
            per[r] = 0.0
            empty.append(r)
        else:
            per[r] = float(np.max(beta[idx]))
    half = strat.theta / 2.0
    lpsi = psi.with_mode("centered").with_theta(half).log_values(C) if psi is not None else np.zeros(len(C))
    glob = float(np.max(beta * np.exp(-lpsi)))
    return BumpReport(beta, rs, rw, per, empty, glob, C.tag, half)


def frac_int_matrix(alpha: float, Qr: CubeCollection) -> np.ndarray:
    """Dense matrix of ``f -> sum_Q |Q|^(alpha/n) avg_Q f 1_Q``."""
    n = Qr.grid.dim
    if len(Qr) == 0:
        return np.zeros((Qr.grid.size, Qr.grid.size))
    coef = (Qr.sides ** n) ** (alpha / n) / Qr.counts
    M = Qr.membership
    return np.asarray((M.T @ M.multiply(coef[:, None])).todense())


@dataclass
class TwoWeightReport:
    max_ratio: float
    per_stratum: dict
    composed_ratio: float
    budget: float
    bump: BumpReport = field(repr=False, default=None)

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.budget

    def to_dict(self):
        return {"max_ratio": self.max_ratio, "per_stratum": {str(k): v for k, v in self.per_stratum.items()},
                "composed_ratio": self.composed_ratio, "budget": self.budget, "passed": self.passed}


def _lp(f, weight, p, hv):
    return float(np.sum(np.abs(f) ** p * weight) * hv) ** (1.0 / p)


def two_weight_check(sigma: Weight, w: Weight, E: ExponentSet, strat: Stratification, probes,
                     eps_p: EntropyFunction | None = None, eps_qp: EntropyFunction | None = None,
                     psi: PsiFunctional | None = None, budget: float = 10.0) -> TwoWeightReport:
    """Testing ratio ``||I^{Q_r}(sigma f)||_{L^q(w)} / (||f||_{L^p(sigma)} [sigma, w]_r)``.

    The maximum runs over probes and nonempty strata.  ``composed_ratio``
    compares the stratified sum ``sum_r 2^(-r theta) I^{Q_r}(sigma f)``
    with the penalized global bump value.
    """
    eps_p = eps_p or EntropyFunction(E.p)
    eps_qp = eps_qp or EntropyFunction(E.q_prime)
    bump = bump_characteristic(sigma, w, E, eps_p, eps_qp, strat, psi)
    hv = strat.source.grid.cell_volume
    sv, wv = sigma.samples, w.samples
    per = {}
    composed = 0.0
    for f in probes:
        fv = f.samples if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
        den = _lp(fv, sv, E.p, hv)
        if den == 0:
            continue
        total = np.zeros_like(fv)
        for r in strat.levels:
            Tf = restricted_frac_int(sv * fv, E.alpha, strat.strata[r]).samples
            total += 2.0 ** (-r * strat.theta) * Tf
            ratio = _lp(Tf, wv, E.q, hv) / (den * bump.per_stratum[r])
            per[r] = max(per.get(r, 0.0), ratio)
        composed = max(composed, _lp(total, wv, E.q, hv) / (den * bump.global_value))
    mx = max(per.values()) if per else 0.0
    return TwoWeightReport(float(mx), per, float(composed), budget, bump)


def dual_form_identity(T: np.ndarray, v: Weight, w: Weight, p: float, q: float, probes) -> dict:
    """Both sides of ``||T: L^p(v) -> L^q(w)|| = ||T(sigma .): L^p(sigma) -> L^q(w)||``.

    ``sigma = v^(1 - p')``.  Probe ratios are compared one to one (``f =
    sigma g``); for ``p = q = 2`` the exact norms come from singular values.
    """
    hv = v.grid.cell_volume
    pp = p / (p - 1.0)
    sig = np.exp((1.0 - pp) * v.log_samples)
    vv, wv = v.samples, w.samples
    worst = 0.0
    for g in probes:
        g = np.asarray(g, dtype=float)
        a_den = _lp(sig * g, vv, p, hv)
        b_den = _lp(g, sig, p, hv)
        if a_den == 0:
            continue
        a = _lp(T @ (sig * g), wv, q, hv) / a_den
        b = _lp(T @ (sig * g), wv, q, hv) / b_den
        worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    out = {"probe_max_rel_diff": worst}
    if p == 2 and q == 2:
        lhs = np.linalg.norm(np.sqrt(wv)[:, None] * T / np.sqrt(vv)[None, :], 2)
        rhs = np.linalg.norm(np.sqrt(wv)[:, None] * T * np.sqrt(sig)[None, :], 2)
        out.update({"svd_lhs": float(lhs), "svd_rhs": float(rhs),
                    "svd_rel_diff": float(abs(lhs - rhs) / max(rhs, 1e-300))})
    return out
