"""Adapted maximal operators, dyadic fractional integrals and their checks.

Every operator runs over a declared ``CubeCollection``.  Cube values are
computed with the collection's segment reductions and pushed back onto the
cells by a scatter-max (maximal operators) or scatter-sum (dyadic sums).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import CubeCollection, DyadicLattice, GridFunction
from .potential import CriticalRadiusProfile, PsiFunctional
from .semigroup import DiscreteOperator
from .weights import ExponentError, ExponentSet, Weight, apq_alpha_theta, ar_restricted, restricted_chars

__all__ = [
    "CoverageWarning",
    "ConvergenceWarning",
    "maximal_adapted",
    "maximal_classical",
    "maximal_weighted",
    "WeakTypeReport",
    "weak_type_check",
    "HeatDominationReport",
    "heat_domination_check",
    "dyadic_frac_int",
    "Stratification",
    "stratify",
    "restricted_frac_int",
    "DominationReport",
    "domination_check",
    "RdfResult",
    "rdf_iterate",
    "BaseWeakReport",
    "base_weak_check",
    "base_weak_budget",
    "norm_estimate",
    "exponent_calculator",
    "StratumRow",
    "stratum_characteristic_check",
    "majorization_check",
]


class CoverageWarning(UserWarning):
    pass


class ConvergenceWarning(UserWarning):
    pass


def _vals(f) -> np.ndarray:
    return f.samples if isinstance(f, GridFunction) else np.asarray(f, dtype=float)


def _scatter(C: CubeCollection, cube_values) -> np.ndarray:
    out, covered = C.scatter_max(cube_values, fill=0.0)
    if not covered.all():
        warnings.warn(f"{int((~covered).sum())} cells are not covered by {C.tag!r}; set to 0",
                      CoverageWarning, stacklevel=3)
    return out


# maximal operators ------------------------------------------------------------

def maximal_cube_values(f, alpha: float, psi: PsiFunctional | None, C: CubeCollection) -> np.ndarray:
    """``(psi(Q)|Q|)^(-(1 - alpha/n)) int_Q |f|`` per cube."""
    C.require_nonempty()
    n = C.grid.dim
    lpsi = psi.log_values(C) if psi is not None else np.zeros(len(C))
    vol = C.volumes
    return C.integrals(np.abs(_vals(f))) * np.exp(-(1.0 - alpha / n) * (lpsi + np.log(vol)))


def maximal_adapted(f, E: ExponentSet | float, psi: PsiFunctional | None, C: CubeCollection) -> GridFunction:
    """``sup_{Q ∋ x} (psi(Q)|Q|)^(-(1 - alpha/n)) int_Q |f|`` over ``C``.

    ``E`` supplies ``alpha`` (a bare number is taken as ``alpha``).  Uncovered
    cells get 0 and a :class:`CoverageWarning`.
    """
    alpha = E.alpha if isinstance(E, ExponentSet) else float(E)
    if not 0 <= alpha < C.grid.dim:
        raise ExponentError("alpha must lie in [0, n)")
    return GridFunction(C.grid, _scatter(C, maximal_cube_values(f, alpha, psi, C)))


def maximal_classical(f, C: CubeCollection, alpha: float = 0.0) -> GridFunction:
    return maximal_adapted(f, alpha, None, C)


def maximal_weighted(f, mu: Weight, alpha: float, C: CubeCollection) -> GridFunction:
    """``sup_{Q ∋ x} mu(Q)^(-(1 - alpha/n)) int_Q |f| dmu``."""
    C.require_nonempty()
    n = C.grid.dim
    if not 0 <= alpha < n:
        raise ExponentError("alpha must lie in [0, n)")
    lmass = C.log_means_exp(mu.log_samples) + np.log(C.volumes)
    integral = C.integrals(np.abs(_vals(f)) * mu.samples)
    vals = integral * np.exp(-(1.0 - alpha / n) * lmass)
    return GridFunction(C.grid, _scatter(C, vals))


# weak type ------------------------------------------------------------------

@dataclass
class WeakTypeReport:
    max_ratio: float
    argmax_lambda: float | None
    characteristic: float
    n_lambdas: int

    def to_dict(self):
        return dict(self.__dict__)


def weak_type_check(f, w: Weight, E: ExponentSet, psi: PsiFunctional, dyadicC: CubeCollection,
                    lambda_grid=None) -> WeakTypeReport:
    """``max_lambda w({M f > lambda}) lambda^p / ([w]_{A_p^theta} ||f||^p_{L^p(w)})``.

    ``M`` and the characteristic use the same collection and penalty.  The
    default ``lambda`` grid is every attained value of ``M f`` shrunk by a
    factor ``1 - 1e-12``, which realizes the supremum over ``lambda``.
    """
    from .weights import ap_theta

    fv = np.abs(_vals(f))
    grid = dyadicC.grid
    wv = w.samples
    normp = float(np.sum(fv ** E.p * wv) * grid.cell_volume)
    char = ap_theta(w, E.with_theta(psi.theta), psi, dyadicC).value
    if normp == 0:
        return WeakTypeReport(0.0, None, char, 0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CoverageWarning)
        Mf = maximal_adapted(fv, 0.0, psi, dyadicC).samples
    if lambda_grid is None:
        lam = np.unique(Mf[Mf > 0]) * (1.0 - 1e-12)
    else:
        lam = np.asarray(lambda_grid, dtype=float)
        lam = lam[lam > 0]
    order = np.argsort(Mf)
    sorted_M = Mf[order]
    tail = np.concatenate([np.cumsum((wv[order])[::-1])[::-1], [0.0]]) * grid.cell_volume
    idx = np.searchsorted(sorted_M, lam, side="right")
    level = tail[idx]
    ratios = level * lam ** E.p / (char * normp)
    k = int(np.argmax(ratios)) if ratios.size else None
    return WeakTypeReport(float(ratios[k]) if k is not None else 0.0,
                          float(lam[k]) if k is not None else None, char, int(lam.size))


# heat domination ------------------------------------------------------------

@dataclass
class HeatDominationReport:
    fitted_constant: float
    theta: float
    witness: dict
    cells_per_axis: int

    def to_dict(self):
        return dict(self.__dict__)


def heat_domination_check(Lop: DiscreteOperator, rho_profile: CriticalRadiusProfile, f, theta: float,
                          t_grid, C: CubeCollection) -> HeatDominationReport:
    """``sup_{x, t} |e^{-tL} f(x)| / M^theta f(x)`` with ``0/0 = 0``."""
    psi = PsiFunctional(theta, "centered", rho_profile)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CoverageWarning)
        Mf = maximal_adapted(f, 0.0, psi, C).samples
    ts = np.asarray(t_grid, dtype=float)
    H = np.abs(Lop.heat(f, ts))
    H = H.reshape(len(ts), -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(H == 0, 0.0, H / Mf[None, :])
    k = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    return HeatDominationReport(float(ratio[k]), float(theta),
                                {"t": float(ts[k[0]]), "x": float(Lop.grid.axis[k[1]])},
                                Lop.grid.cells_per_axis)


# dyadic fractional integrals -------------------------------------------------

def dyadic_frac_int(f, E: ExponentSet | float, psi_tilde: PsiFunctional, D: DyadicLattice | CubeCollection) -> GridFunction:
    """``sum_Q side(Q)^alpha / psi_tilde(Q) avg_Q f 1_Q`` over the lattice."""
    alpha = E.alpha if isinstance(E, ExponentSet) else float(E)
    C = D.collection if isinstance(D, DyadicLattice) else D
    if not 0 < alpha < C.grid.dim:
        raise ExponentError("alpha must lie in (0, n)")
    coef = C.sides ** alpha * np.exp(-psi_tilde.log_values(C))
    return GridFunction(C.grid, C.scatter_sum(coef * C.means(_vals(f))))


def restricted_frac_int(f, alpha: float, Qr: CubeCollection) -> GridFunction:
    """``sum_{Q in Qr} |Q|^(alpha/n) avg_Q f 1_Q``; zero for an empty collection."""
    if len(Qr) == 0:
        return GridFunction(Qr.grid, np.zeros(Qr.grid.size))
    n = Qr.grid.dim
    coef = (Qr.sides ** n) ** (alpha / n)
    return GridFunction(Qr.grid, Qr.scatter_sum(coef * Qr.means(_vals(f))))


@dataclass
class Stratification:
    """Cubes of a lattice binned by ``psi_tilde`` in ``[2^(r theta), 2^((r+1) theta))``."""

    theta: float
    source: CubeCollection
    index: np.ndarray
    strata: dict

    @property
    def levels(self) -> list[int]:
        return sorted(self.strata)

    def is_partition(self) -> bool:
        seen = np.zeros(len(self.source), dtype=int)
        for r, idx in self.members.items():
            seen[idx] += 1
        return bool(np.all(seen == 1)) and sum(len(c) for c in self.strata.values()) == len(self.source)

    @property
    def members(self) -> dict:
        return {r: np.flatnonzero(self.index == r) for r in self.levels}

    def stratified_sum(self, f, alpha: float) -> np.ndarray:
        """``sum_r 2^(-r theta) I^{Q_r} f``."""
        out = np.zeros(self.source.grid.size)
        for r, Qr in self.strata.items():
            out += 2.0 ** (-r * self.theta) * restricted_frac_int(f, alpha, Qr).samples
        return out

    def to_rows(self) -> list[dict]:
        return [{"r": r, "n_cubes": len(self.strata[r])} for r in self.levels]


def stratify(D: DyadicLattice | CubeCollection, theta: float, psi_tilde: PsiFunctional) -> Stratification:
    """Bin lattice cubes by ``r = floor(log2(1 + side / rho_tilde))``.

    This is the same as ``psi_tilde_theta(Q) in [2^(r theta), 2^((r+1) theta))``
    with lower-closed bins, so ``r = 0`` holds the cubes with penalty 1.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    C = D.collection if isinstance(D, DyadicLattice) else D
    rho = psi_tilde.with_mode("sup").radii(C)
    with np.errstate(divide="ignore"):
        base = np.log1p(C.sides / rho) / math.log(2.0)
    r = np.floor(base + 1e-12).astype(int)
    strata = {}
    for k in np.unique(r):
        strata[int(k)] = C.subset(np.flatnonzero(r == k), tag=f"stratum r={int(k)}")
    return Stratification(theta, C, r, strata)


@dataclass
class DominationReport:
    fitted_constant: float
    witness: dict
    alpha: float
    theta: float
    cells_per_axis: int

    def to_dict(self):
        return dict(self.__dict__)


def domination_check(Lop: DiscreteOperator, rho_profile: CriticalRadiusProfile, f, E: ExponentSet,
                     lattices, theta: float | None = None) -> DominationReport:
    """``sup_x |L^{-alpha/2} f(x)| / sum_lattices I^D_{alpha,theta} f(x)`` (``f >= 0``)."""
    from .semigroup import frac_power_apply

    fv = _vals(f)
    if np.any(fv < 0):
        raise ValueError("f must be non-negative")
    th = E.theta if theta is None else theta
    lhs = np.abs(frac_power_apply(Lop, fv, E.alpha).samples)
    psi_t = PsiFunctional(th, "sup", rho_profile)
    rhs = np.zeros_like(lhs)
    for D in lattices:
        rhs += dyadic_frac_int(fv, E.alpha, psi_t, D).samples
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lhs == 0, 0.0, lhs / rhs)
    k = int(np.argmax(ratio))
    return DominationReport(float(ratio[k]), {"x": float(Lop.grid.axis[k])}, E.alpha, th,
                            Lop.grid.cells_per_axis)


# Rubio de Francia iteration ---------------------------------------------------

@dataclass
class RdfResult:
    G: np.ndarray
    operator_bound: float
    terms_used: int
    converged: bool
    g_norm: float
    G_norm: float
    tail_bound: float
    tail_norm: float
    majorizes: bool
    norm_ok: bool
    tail_ok: bool
    sublinear_ok: bool
    Gv_char: float
    v_char: float
    exponent: float

    @property
    def char_ratio(self) -> float:
        return self.Gv_char / self.v_char

    def to_dict(self):
        d = {k: v for k, v in self.__dict__.items() if k != "G"}
        d["char_ratio"] = self.char_ratio
        return d


def _weighted_norm(g, v: Weight, s: float, cell_volume: float) -> float:
    return float((np.sum(np.abs(g) ** s * v.samples) * cell_volume) ** (1.0 / s))


def rdf_iterate(g, v: Weight, r0: float, r: float, Q: CubeCollection, K_terms: int = 40,
                tol: float = 1e-12, tail_terms: int | None = None) -> RdfResult:
    """Neumann-series majorant ``G = sum_k R^k g / (2 ||R||)^k``.

    ``R g = (M^Q(g^(1/t) v) / v)^t`` with ``t = (r - r0)/(r - 1)`` and
    ``||R|| = [v]_{A_r^Q}^t``.  Summation stops once a term's sup falls
    below ``tol`` or after ``K_terms`` terms.  The checks compare against
    the untruncated series, continued for ``tail_terms`` more terms.
    """
    if not 1 <= r0 < r:
        raise ValueError("need 1 <= r0 < r")
    gv = _vals(g)
    if np.any(gv < 0):
        raise ValueError("g must be non-negative")
    t = (r - r0) / (r - 1.0)
    s = r / (r - r0)
    vchar = ar_restricted(v, r, Q).value
    bound = vchar ** t
    vs = v.samples
    hv = Q.grid.cell_volume

    def R(x):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CoverageWarning)
            m = maximal_classical(np.abs(x) ** (1.0 / t) * vs, Q).samples
        return (m / vs) ** t

    terms = [gv.copy()]
    G = gv.copy()
    term = gv
    converged = False
    for k in range(1, K_terms):
        term = R(term) / (2.0 * bound)
        if np.max(term) < tol:
            converged = True
            break
        terms.append(term)
        G = G + term
    used = len(terms)
    if not converged and used == K_terms:
        warnings.warn(f"series not converged after {K_terms} terms; tail bound "
                      f"{2.0 ** (-K_terms + 1):.3e} ||g||", ConvergenceWarning, stacklevel=2)
    # continue the series to measure the truncated tail
    extra = tail_terms if tail_terms is not None else K_terms
    tail = np.zeros_like(gv)
    nxt = term if not converged else np.zeros_like(gv)
    if not converged:
        for _ in range(extra):
            nxt = R(nxt) / (2.0 * bound)
            tail += nxt
            if np.max(nxt) < tol * 1e-3:
                break
    g_norm = _weighted_norm(gv, v, s, hv)
    G_norm = _weighted_norm(G, v, s, hv)
    tail_norm = _weighted_norm(tail, v, s, hv)
    tail_bound = 2.0 ** (-used + 1) * g_norm
    # R G_K <= 2 ||R|| G_{K+1} from subadditivity of R
    RG = R(G)
    G_next = G + (R(terms[-1]) / (2.0 * bound))
    sub_ok = bool(np.all(RG <= 2.0 * bound * G_next * (1 + 1e-10) + 1e-300))
    Gv = Weight.from_values(Q.grid, np.maximum(G, 1e-300) * vs) if np.all(G > 0) else None
    Gv_char = ar_restricted(Gv, r0, Q).value if Gv is not None else float("inf")
    return RdfResult(G, bound, used, converged, g_norm, G_norm, tail_bound, tail_norm,
                     bool(np.all(gv <= G)), bool(G_norm <= 2.0 * g_norm * (1 + 1e-12)),
                     bool(tail_norm <= tail_bound * (1 + 1e-12)), sub_ok, Gv_char, vchar, s)


# base weak-type estimate ------------------------------------------------------

def base_weak_budget(n: int, alpha: float) -> float:
    """``q0' / (1 - 2^(-n/q0))`` with ``q0 = n/(n - alpha)``.

    The geometric factor bounds the sum of ``|Q|^(-1/q0)`` along a dyadic
    chain by its smallest cube; ``q0'`` is the normability constant of weak
    ``L^q0`` used when integrating the kernel's weak norms.
    """
    q0 = n / (n - alpha)
    q0p = q0 / (q0 - 1.0)
    return q0p / (1.0 - 2.0 ** (-n / q0))


@dataclass
class BaseWeakReport:
    max_ratio: float
    budget: float
    characteristic: float
    argmax_lambda: float | None
    n_maximal_cubes: int

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.budget

    def to_dict(self):
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def base_weak_check(f, w: Weight, alpha: float, Q: CubeCollection, lambda_grid=None) -> BaseWeakReport:
    """``max_lambda lambda u({I^Q f > lambda})^(1/q0) / ([w]_{A_{1,q0}^Q}^(1-alpha/n) ||f||_{L^1(w)})``."""
    n = Q.grid.dim
    q0 = n / (n - alpha)
    fv = np.abs(_vals(f))
    E = ExponentSet(n, 1.0, q0, alpha, 0.0)
    char = restricted_chars(w, E, Q, "pq").value
    budget = base_weak_budget(n, alpha)
    n_max = len(Q.maximal_indices())
    l1 = float(np.sum(fv * w.samples) * Q.grid.cell_volume)
    if l1 == 0:
        return BaseWeakReport(0.0, budget, char, None, n_max)
    I = restricted_frac_int(fv, alpha, Q).samples
    u = np.exp(q0 * w.log_samples)
    if lambda_grid is None:
        lam = np.unique(I[I > 0]) * (1.0 - 1e-12)
    else:
        lam = np.asarray(lambda_grid, dtype=float)
        lam = lam[lam > 0]
    order = np.argsort(I)
    tail = np.concatenate([np.cumsum(u[order][::-1])[::-1], [0.0]]) * Q.grid.cell_volume
    level = tail[np.searchsorted(I[order], lam, side="right")]
    ratios = lam * level ** (1.0 / q0) / (char ** (1.0 - alpha / n) * l1)
    k = int(np.argmax(ratios)) if ratios.size else None
    return BaseWeakReport(float(ratios[k]) if k is not None else 0.0, budget, char,
                          float(lam[k]) if k is not None else None, n_max)


# norms and exponents ------------------------------------------------------------

def norm_estimate(T, p: float, q: float, w: Weight, probes) -> tuple[float, int]:
    """Largest ``||T f||_{L^q(w^q)} / ||f||_{L^p(w^p)}`` over the probes.

    Returns ``(value, index of the best probe)``; zero-norm probes are skipped.
    """
    hv = w.grid.cell_volume
    best, arg = 0.0, -1
    lw = w.log_samples
    for i, f in enumerate(probes):
        fv = _vals(f)
        den = float(np.sum(np.abs(fv) ** p * np.exp(p * lw)) * hv) ** (1.0 / p)
        if den == 0:
            continue
        Tf = _vals(T(fv))
        num = float(np.sum(np.abs(Tf) ** q * np.exp(q * lw)) * hv) ** (1.0 / q)
        if num / den > best:
            best, arg = num / den, i
    return best, arg


def exponent_calculator(E: ExponentSet, base: tuple[float, float], gamma_base: float) -> dict:
    """Power of the characteristic carried from a base pair ``(p0, q0)`` to ``(p, q)``.

    Returns ``gamma_base max(1, (q0/p0') (p'/q))`` together with the
    ``gamma`` and ``K`` of ``E``.
    """
    p0, q0 = base
    if abs((1 / E.p - 1 / E.q) - (1 / p0 - 1 / q0)) > 1e-12:
        raise ExponentError("1/p - 1/q must equal 1/p0 - 1/q0")
    p0p = math.inf if p0 == 1 else p0 / (p0 - 1.0)
    factor = (q0 / p0p) * (E.p_prime / E.q) if math.isfinite(p0p) else 0.0
    return {"exponent": gamma_base * max(1.0, factor), "gamma": E.gamma, "K": E.K,
            "growth": E.growth}


# stratum characteristics --------------------------------------------------------

@dataclass
class StratumRow:
    r: int
    n_cubes: int
    bracket: float
    bound: float
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def stratum_characteristic_check(w: Weight, E: ExponentSet, strat: Stratification,
                                 psi_tilde: PsiFunctional, edge_offset: int = 1,
                                 rtol: float = 1e-12) -> list[StratumRow]:
    """Per-stratum penalty-free bracket against ``[w]_tilde(theta/K) 2^((r+edge) (theta/K)(1 + q/p'))``.

    ``edge_offset=1`` uses the upper bin edge, which makes the bound exact;
    ``edge_offset=0`` (lower edge) is the planted off-by-one variant.
    """
    th = strat.theta / E.K
    P = psi_tilde.with_mode("sup").with_theta(th)
    big = apq_alpha_theta(w, E.with_theta(th), P, strat.source).value
    rows = []
    expo = th * (1.0 + E.q / E.p_prime)
    for r in strat.levels:
        Qr = strat.strata[r]
        bracket = restricted_chars(w, E, Qr, "pq").value
        bound = big * 2.0 ** ((r + edge_offset) * expo)
        rows.append(StratumRow(r, len(Qr), bracket, bound, bool(bracket <= bound * (1 + rtol))))
    return rows


def majorization_check(f, w: Weight, E: ExponentSet, psi_tilde: PsiFunctional, C: CubeCollection,
                       rtol: float = 1e-10) -> tuple[bool, float]:
    """Pointwise domination of the sup-mode fractional maximal function.

    With ``u = w^q``, ``sigma = w^(-p')``, ``gamma = theta / (1 + p'/q)``::

        Mtilde f <= [w]_{tilde(alpha, gamma)}^e  (M_u[(M^alpha_sigma(f/sigma))^(1/e) / u])^e

    where ``e = (p'/q)(1 - alpha/n)`` and every operator runs over ``C``.
    Returns ``(holds, max lhs/rhs)``.
    """
    n = C.grid.dim
    e = (E.p_prime / E.q) * (1.0 - E.alpha / n)
    P = psi_tilde.with_mode("sup")
    lhs = maximal_adapted(f, E.alpha, P.with_theta(E.theta), C).samples
    char = apq_alpha_theta(w, E.with_theta(E.gamma), P.with_theta(E.gamma), C).value
    u = w.pow(E.q)
    sigma = w.pow(-E.p_prime)
    inner = maximal_weighted(_vals(f) / sigma.samples, sigma, E.alpha, C).samples
    outer = maximal_weighted(inner ** (1.0 / e) / u.samples, u, 0.0, C).samples
    rhs = char ** e * outer ** e
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lhs == 0, 0.0, lhs / rhs)
    return bool(np.all(lhs <= rhs * (1 + rtol))), float(np.max(ratio))
