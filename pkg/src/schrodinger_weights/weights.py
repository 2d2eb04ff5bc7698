"""Log-domain weights, exponent bookkeeping and Muckenhoupt-type characteristics.

Each characteristic is a maximum over a declared cube collection of a
product of two (penalized) averages.  Averages are taken with a per-cube
log-mean-exp, so weights like ``exp(eta |x|^2)`` never overflow; the product
is formed in log space and exponentiated once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Cube, CubeCollection, Grid, GridError
from .potential import PsiFunctional

__all__ = [
    "ExponentError",
    "Weight",
    "ExponentSet",
    "CharacteristicReport",
    "ap_theta",
    "apq_alpha_theta",
    "restricted_chars",
    "TildeComparison",
    "tilde_comparison",
    "WEIGHT_FAMILIES",
]

WEIGHT_FAMILIES = ("constant", "two-valued", "power", "gaussian", "log-uniform")


class ExponentError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Weight:
    """Strictly positive grid function stored as ``log w``."""

    grid: Grid
    log_samples: np.ndarray

    def __post_init__(self):
        s = np.ascontiguousarray(np.asarray(self.log_samples, dtype=float).ravel())
        if s.size != self.grid.size:
            raise GridError(f"expected {self.grid.size} samples, got {s.size}")
        if not np.all(np.isfinite(s)):
            raise GridError("weight log-samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "log_samples", s)

    @property
    def samples(self) -> np.ndarray:
        return np.exp(self.log_samples)

    @classmethod
    def from_values(cls, grid: Grid, values) -> "Weight":
        v = np.asarray(values, dtype=float)
        if np.any(v <= 0):
            raise GridError("weights must be strictly positive")
        return cls(grid, np.log(v))

    @classmethod
    def constant(cls, grid: Grid, c: float = 1.0) -> "Weight":
        return cls(grid, np.full(grid.size, math.log(c)))

    @classmethod
    def power(cls, grid: Grid, a: float) -> "Weight":
        """``|x|^a``; cell centers never sit at the origin."""
        return cls(grid, a * np.log(grid.radius))

    @classmethod
    def gaussian(cls, grid: Grid, eta: float) -> "Weight":
        """``exp(eta |x|^2)``."""
        return cls(grid, eta * grid.radius ** 2)

    @classmethod
    def two_valued(cls, grid: Grid, low: float, high: float, axis: int = 0) -> "Weight":
        """``low`` on ``x_axis < 0`` and ``high`` elsewhere."""
        left = grid.centers[:, axis] < 0
        return cls(grid, np.where(left, math.log(low), math.log(high)))

    @classmethod
    def log_uniform(cls, grid: Grid, spread: float, rng: np.random.Generator) -> "Weight":
        return cls(grid, rng.uniform(-spread, spread, grid.size))

    @classmethod
    def from_family(cls, grid: Grid, family: str, param=None, rng=None) -> "Weight":
        if family == "constant":
            return cls.constant(grid, 1.0 if param is None else float(param))
        if family == "two-valued":
            lo, hi = (0.5, 2.0) if param is None else param
            return cls.two_valued(grid, lo, hi)
        if family == "power":
            return cls.power(grid, 0.5 if param is None else float(param))
        if family == "gaussian":
            return cls.gaussian(grid, 0.05 if param is None else float(param))
        if family == "log-uniform":
            return cls.log_uniform(grid, 1.0 if param is None else float(param),
                                   rng if rng is not None else np.random.default_rng(0))
        raise ValueError(f"unknown weight family {family!r}")

    def pow(self, s: float) -> "Weight":
        return Weight(self.grid, s * self.log_samples)

    def __mul__(self, other: "Weight") -> "Weight":
        return Weight(self.grid, self.log_samples + other.log_samples)

    def mass(self, C: CubeCollection) -> np.ndarray:
        """``w(Q)`` for every cube."""
        return np.exp(C.log_means_exp(self.log_samples)) * C.volumes


@dataclass(frozen=True)
class ExponentSet:
    """``(n, p, q, alpha, theta)`` tied by ``1/p - 1/q = alpha/n``.

    ``p = 1`` is allowed (then ``p' = inf``); ``q`` must be finite.
    """

    n: int
    p: float
    q: float
    alpha: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not self.p >= 1:
            raise ExponentError("p must be at least 1")
        if not 0 <= self.alpha < self.n:
            raise ExponentError("alpha must lie in [0, n)")
        if not (math.isfinite(self.q) and self.q >= self.p):
            raise ExponentError("q must be finite and at least p")
        if abs(1.0 / self.p - 1.0 / self.q - self.alpha / self.n) > 1e-12:
            raise ExponentError(
                f"1/p - 1/q = {1 / self.p - 1 / self.q:.6g} differs from alpha/n = {self.alpha / self.n:.6g}")
        if self.theta < 0:
            raise ExponentError("theta must be non-negative")

    @classmethod
    def from_p(cls, n: int, p: float, alpha: float = 0.0, theta: float = 0.0) -> "ExponentSet":
        inv = 1.0 / p - alpha / n
        if inv <= 0:
            raise ExponentError("alpha/n >= 1/p leaves no finite q")
        return cls(n, p, 1.0 / inv, alpha, theta)

    def with_theta(self, theta: float) -> "ExponentSet":
        return ExponentSet(self.n, self.p, self.q, self.alpha, theta)

    @property
    def p_prime(self) -> float:
        return math.inf if self.p == 1 else self.p / (self.p - 1.0)

    @property
    def q_prime(self) -> float:
        return math.inf if self.q == 1 else self.q / (self.q - 1.0)

    @property
    def gamma(self) -> float:
        """Solves ``gamma p'/q + gamma = theta``."""
        return self.theta / (1.0 + self.p_prime / self.q)

    @property
    def growth(self) -> float:
        """``(1 - alpha/n) max(1, p'/q)``, the power of the characteristic."""
        return (1.0 - self.alpha / self.n) * max(1.0, self.p_prime / self.q)

    @property
    def K(self) -> float:
        """Solves ``(1/K)(1 + q/p') growth = 1/2``."""
        return 2.0 * (1.0 + self.q / self.p_prime) * self.growth

    def to_dict(self) -> dict:
        return {"n": self.n, "p": self.p, "q": self.q, "alpha": self.alpha, "theta": self.theta}


@dataclass
class CharacteristicReport:
    """Per-cube factors of a characteristic and their maximum."""

    name: str
    collection: str
    log_factor1: np.ndarray
    log_factor2: np.ndarray
    cubes: list = field(repr=False, default_factory=list)

    @property
    def log_products(self) -> np.ndarray:
        return self.log_factor1 + self.log_factor2

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.log_products))

    @property
    def log_value(self) -> float:
        return float(self.log_products[self.argmax])

    @property
    def value(self) -> float:
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_value))

    @property
    def products(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_products)

    @property
    def argmax_cube(self) -> Cube:
        return self.cubes[self.argmax]

    def to_rows(self) -> list[dict]:
        with np.errstate(over="ignore"):
            f1, f2 = np.exp(self.log_factor1), np.exp(self.log_factor2)
        rows = []
        for j, Q in enumerate(self.cubes):
            rows.append({"index": j, "center": " ".join(repr(c) for c in Q.center),
                         "side": Q.side, "factor1": float(f1[j]), "factor2": float(f2[j]),
                         "product": float(f1[j] * f2[j])})
        return rows

    def summary(self) -> dict:
        Q = self.argmax_cube
        return {"name": self.name, "collection": self.collection, "value": self.value,
                "log_value": self.log_value, "argmax_cube": Q.to_dict(), "n_cubes": len(self.cubes)}


def _require(C: CubeCollection):
    C.require_nonempty()


def _bracket(name, C, log_a, log_b, power_b, log_psi, inf_second=False):
    """``(avg a / psi) * (avg b / psi)^power_b`` per cube, in logs.

    With ``inf_second`` the second factor is ``1 / min(a)`` and carries no
    penalty.
    """
    _require(C)
    lf1 = C.log_means_exp(log_a) - log_psi
    if inf_second:
        lf2 = -C.minima(log_a)
    else:
        lf2 = power_b * (C.log_means_exp(log_b) - log_psi)
    return CharacteristicReport(name, C.tag, lf1, lf2, C.cubes)


def ap_theta(w: Weight, E: ExponentSet, psi: PsiFunctional, C: CubeCollection) -> CharacteristicReport:
    """``max_Q (avg_Q w / psi)(avg_Q w^(-1/(p-1)) / psi)^(p-1)``.

    ``psi`` in sup mode gives the tilde characteristic.  ``p = 1`` uses
    ``avg_Q w / (psi min_Q w)``.
    """
    if abs(psi.theta - E.theta) > 1e-15:
        raise ExponentError("psi.theta must equal E.theta")
    lpsi = psi.log_values(C)
    if E.p == 1:
        return _bracket("A_1", C, w.log_samples, None, 0.0, lpsi, inf_second=True)
    return _bracket("A_p", C, w.log_samples, -w.log_samples / (E.p - 1.0), E.p - 1.0, lpsi)


def apq_alpha_theta(w: Weight, E: ExponentSet, psi: PsiFunctional, C: CubeCollection) -> CharacteristicReport:
    """``max_Q (avg_Q w^q / psi)(avg_Q w^(-p') / psi)^(q/p')``."""
    if abs(psi.theta - E.theta) > 1e-15:
        raise ExponentError("psi.theta must equal E.theta")
    lpsi = psi.log_values(C)
    if E.p == 1:
        return _bracket("A_1q", C, E.q * w.log_samples, None, 0.0, lpsi, inf_second=True)
    return _bracket("A_pq", C, E.q * w.log_samples, -E.p_prime * w.log_samples,
                    E.q / E.p_prime, lpsi)


def restricted_chars(w: Weight, E: ExponentSet, Q: CubeCollection, kind: str = "pq") -> CharacteristicReport:
    """Penalty-free characteristics over exactly the cubes of ``Q``.

    ``kind="pq"`` is the two-exponent bracket (``p = 1`` gives
    ``avg w^q / min w^q``); ``kind="p"`` is the one-exponent bracket at ``p``.
    """
    zero = np.zeros(len(Q))
    if kind == "pq":
        if E.p == 1:
            return _bracket("A_1q^Q", Q, E.q * w.log_samples, None, 0.0, zero, inf_second=True)
        return _bracket("A_pq^Q", Q, E.q * w.log_samples, -E.p_prime * w.log_samples,
                        E.q / E.p_prime, zero)
    if kind == "p":
        if E.p == 1:
            return _bracket("A_1^Q", Q, w.log_samples, None, 0.0, zero, inf_second=True)
        return _bracket("A_p^Q", Q, w.log_samples, -w.log_samples / (E.p - 1.0), E.p - 1.0, zero)
    raise ValueError("kind must be 'pq' or 'p'")


def ar_restricted(v: Weight, r: float, Q: CubeCollection) -> CharacteristicReport:
    """``[v]_{A_r}`` over ``Q`` for a bare exponent ``r >= 1``."""
    zero = np.zeros(len(Q))
    if r == 1:
        return _bracket("A_1^Q", Q, v.log_samples, None, 0.0, zero, inf_second=True)
    return _bracket("A_r^Q", Q, v.log_samples, -v.log_samples / (r - 1.0), r - 1.0, zero)


@dataclass
class TildeComparison:
    lhs: float
    rhs: float
    ratio: float
    centered_theta: float
    sup_theta: float
    easy_direction_holds: bool

    def to_dict(self):
        return dict(self.__dict__)


def tilde_comparison(w: Weight, E: ExponentSet, psi: PsiFunctional, C: CubeCollection,
                     rtol: float = 1e-12) -> TildeComparison:
    """Compare ``[w]`` with sup-mode penalty at ``3 theta`` against centered at ``theta``.

    Returns ``lhs`` (sup mode, ``3 theta``), ``rhs`` (centered, ``theta``)
    and ``lhs / rhs``.  Also checks, at the same ``theta``, that the centered
    characteristic does not exceed the sup-mode one (the sup-mode radius is
    at least the centered radius, so its penalty is smaller).
    """
    th = E.theta
    centered = psi.with_mode("centered").with_theta(th)
    sup = psi.with_mode("sup").with_theta(th)
    rhs = ap_theta(w, E, centered, C)
    lhs = ap_theta(w, E.with_theta(3 * th), psi.with_mode("sup").with_theta(3 * th), C)
    same = ap_theta(w, E, sup, C)
    holds = bool(np.all(rhs.log_products <= same.log_products + rtol * (1 + np.abs(same.log_products))))
    return TildeComparison(lhs.value, rhs.value, lhs.value / rhs.value, th, 3 * th, holds)
