"""Penalized mean oscillation, the log/exp link with weights, and level-set decay."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Cube, CubeCollection, GridFunction
from .potential import PsiFunctional
from .weights import ExponentSet, Weight, ap_theta

__all__ = [
    "mean_oscillations",
    "bmo_theta_norm",
    "ExpLogForward",
    "exp_log_forward",
    "exp_log_bound",
    "BackwardSweep",
    "exp_log_backward",
    "DecayProfile",
    "john_nirenberg_profile",
]


def mean_oscillations(values, C: CubeCollection) -> np.ndarray:
    """``avg_Q |f - avg_Q f|`` for every cube."""
    v = np.asarray(values, dtype=float)
    C.require_nonempty()
    m = C.means(v)
    rows = np.repeat(np.arange(len(C)), C.counts)
    dev = np.abs(v[C.membership.indices] - m[rows])
    return np.add.reduceat(dev, C.membership.indptr[:-1]) / C.counts


def bmo_theta_norm(f, theta: float, psi: PsiFunctional, C: CubeCollection, return_argmax: bool = False):
    """``max_Q avg_Q |f - avg_Q f| / psi_theta(Q)``.

    ``theta`` overrides the exponent carried by ``psi``.
    """
    vals = f.samples if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
    osc = mean_oscillations(vals, C)
    ratio = osc * np.exp(-psi.with_theta(theta).log_values(C))
    j = int(np.argmax(ratio))
    return (float(ratio[j]), j) if return_argmax else float(ratio[j])


def exp_log_bound(char: float, p: float) -> float:
    """``[w] max([w], (p-1) [w]^(1/(p-1)))``."""
    return char * max(char, (p - 1.0) * char ** (1.0 / (p - 1.0)))


@dataclass
class ExpLogForward:
    norm: float
    characteristic: float
    bound: float
    holds: bool
    argmax_cube: Cube | None = None

    def to_dict(self):
        d = {k: v for k, v in self.__dict__.items() if k != "argmax_cube"}
        d["argmax_cube"] = self.argmax_cube.to_dict() if self.argmax_cube else None
        return d


def exp_log_forward(w: Weight, E: ExponentSet, psi: PsiFunctional, C: CubeCollection,
                    rtol: float = 1e-12) -> ExpLogForward:
    """``||log w||`` at penalty exponent ``p theta`` against the bound from ``[w]_{A_p^theta}``."""
    char = ap_theta(w, E, psi.with_theta(E.theta), C).value
    norm, j = bmo_theta_norm(w.log_samples, E.p * E.theta, psi, C, return_argmax=True)
    bound = exp_log_bound(char, E.p)
    return ExpLogForward(norm, char, bound, bool(norm <= bound * (1 + rtol)), C[j])


@dataclass
class BackwardSweep:
    etas: list
    characteristics: list
    ceiling: float
    best_eta: float | None

    def to_dict(self):
        return dict(self.__dict__)


def exp_log_backward(f, eta_grid, E: ExponentSet, psi: PsiFunctional, C: CubeCollection,
                     ceiling: float | None = None) -> BackwardSweep:
    """Characteristic of ``exp(eta f)`` along ``eta_grid``.

    ``best_eta`` is the largest positive ``eta`` whose characteristic stays
    below ``ceiling`` (default ten times the constant-weight value).  The
    full sweep is reported; no monotonicity in ``eta`` is assumed.
    """
    vals = f.samples if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
    grid = C.grid
    P = psi.with_theta(E.theta)
    if ceiling is None:
        ceiling = 10.0 * ap_theta(Weight.constant(grid), E, P, C).value
    chars = []
    for eta in eta_grid:
        chars.append(ap_theta(Weight(grid, eta * vals), E, P, C).value)
    ok = [eta for eta, c in zip(eta_grid, chars) if eta > 0 and c <= ceiling]
    return BackwardSweep(list(map(float, eta_grid)), chars, float(ceiling),
                         float(max(ok)) if ok else None)


@dataclass
class DecayProfile:
    lambdas: np.ndarray
    fractions: np.ndarray
    rate: float
    norm: float
    exp_average: float
    exp_gamma: float
    rows: list = field(default_factory=list, repr=False)

    def to_rows(self):
        return [{"lambda": float(l), "fraction": float(fr)} for l, fr in zip(self.lambdas, self.fractions)]

    def summary(self):
        return {"rate": self.rate, "norm": self.norm, "exp_average": self.exp_average,
                "gamma": self.exp_gamma, "exp_average_finite": bool(np.isfinite(self.exp_average))}


def john_nirenberg_profile(f, Q: Cube, theta_prime: float, lambda_grid, psi: PsiFunctional,
                           C: CubeCollection) -> DecayProfile:
    """Level-set fractions of ``|f - avg_Q f|`` on ``Q`` and an exponential average.

    The decay rate is the negated slope of ``log(fraction)`` against
    ``lambda`` over the positive fractions.  The exponential average is
    ``avg_Q exp(gamma |f - avg_Q f| / (norm psi_theta'(Q)))`` with
    ``gamma = 1/(2^(n+1) e)`` and ``norm`` the penalized oscillation norm of
    ``f`` over ``C`` at ``psi.theta``.
    """
    vals = f.samples if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
    grid = C.grid
    single = CubeCollection(grid, [Q])
    cells = single.cells_of(0)
    dev = np.abs(vals[cells] - vals[cells].mean())
    lam = np.asarray(lambda_grid, dtype=float)
    fr = np.array([np.mean(dev > l) for l in lam])
    pos = fr > 0
    if pos.sum() >= 2 and np.ptp(lam[pos]) > 0:
        rate = -float(np.polyfit(lam[pos], np.log(fr[pos]), 1)[0])
    else:
        rate = math.inf if not np.any(dev > 0) else float("nan")
    norm = bmo_theta_norm(vals, psi.theta, psi, C)
    gamma = 1.0 / (2 ** (grid.dim + 1) * math.e)
    if norm > 0:
        psi_q = float(psi.with_theta(theta_prime).values(single)[0])
        expavg = float(np.mean(np.exp(gamma * dev / (norm * psi_q))))
    else:
        expavg = 1.0
    return DecayProfile(lam, fr, rate, norm, expavg, gamma)
