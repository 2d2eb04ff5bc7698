"""Non-negative potentials, the critical radius and the cube penalties built on it.

The critical radius of ``V`` at ``x`` is the largest ``r`` with

    F(r) = r^(2-n) * integral of V over B(x, r)  <=  1,

and is ``inf`` when no such bound is ever reached (``V == 0``).  Ball
integrals use closed forms, so ``rho`` describes ``V`` on all of R^n and not
only on the truncated box.
"""
from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .grid import CubeCollection, Cube, Grid

__all__ = [
    "AlgorithmError",
    "Potential",
    "unit_ball_volume",
    "ball_integral",
    "critical_radius",
    "CriticalRadiusProfile",
    "PsiFunctional",
    "psi",
    "ReverseHolderReport",
    "reverse_holder_check",
    "DiagnosticsReport",
    "regularity_diagnostics",
    "FAMILIES",
]

log = logging.getLogger(__name__)

FAMILIES = ("zero", "constant", "power", "hermite")


class AlgorithmError(RuntimeError):
    """Raised when a numerical precondition (such as monotonicity) fails."""


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


@dataclass(frozen=True)
class Potential:
    """``V`` from a closed-form family.

    ``param`` is the constant for ``constant`` and the exponent ``a`` for
    ``power``; ``hermite`` is ``power`` with ``a = 2``.
    """

    family: str
    param: float = 0.0

    def __post_init__(self):
        fam = self.family.lower()
        if fam in ("harmonic", "oscillator"):
            fam = "hermite"
        if fam not in FAMILIES:
            raise ValueError(f"unknown potential family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if fam == "hermite":
            object.__setattr__(self, "param", 2.0)
        if fam == "zero":
            object.__setattr__(self, "param", 0.0)
        if self.param < 0:
            raise ValueError("potential parameter must be non-negative")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, c: float):
        return cls("constant", float(c))

    @classmethod
    def power(cls, a: float):
        return cls("power", float(a))

    @classmethod
    def hermite(cls):
        return cls("hermite")

    @property
    def exponent(self) -> float | None:
        if self.family in ("power", "hermite"):
            return self.param
        return None

    @property
    def is_zero(self) -> bool:
        return self.family == "zero" or (self.family == "constant" and self.param == 0.0)

    def values(self, points) -> np.ndarray:
        """``V`` at points of shape ``(m, n)``."""
        x = np.atleast_2d(np.asarray(points, dtype=float))
        if self.family == "zero":
            return np.zeros(x.shape[0])
        if self.family == "constant":
            return np.full(x.shape[0], self.param)
        r2 = np.sum(x ** 2, axis=1)
        a = self.param
        if a == 2.0:
            return r2
        return r2 ** (a / 2.0)

    def on_grid(self, grid: Grid) -> np.ndarray:
        return self.values(grid.centers)

    def to_dict(self) -> dict:
        d = {"family": self.family}
        if self.family in ("constant", "power"):
            d["param"] = self.param
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Potential":
        fam = d.get("family", "zero")
        param = d.get("param", d.get("exponent", d.get("value", 0.0)))
        return cls(fam, float(param if param is not None else 0.0))


# ball integrals ------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(96)


def _sphere_share(n: int, s, d, r):
    """Measure of ``{|y| = s} ∩ B(x, r)`` with ``|x| = d`` for the partial shell."""
    cosang = np.clip((s ** 2 + d ** 2 - r ** 2) / (2.0 * s * d), -1.0, 1.0)
    if n == 2:
        return 2.0 * s * np.arccos(cosang)
    # n == 3: spherical cap area 2 pi s^2 (1 - cos)
    return 2.0 * np.pi * s ** 2 * (1.0 - cosang)


def _power_ball_integral_nd(n: int, a: float, d: float, r: float) -> float:
    """Integral of ``|y|^a`` over ``B(x, r)``, ``|x| = d``, for ``n`` in {2, 3}."""
    surf = n * unit_ball_volume(n)
    total = 0.0
    inner = r - d
    if inner > 0:
        total += surf * inner ** (n + a) / (n + a)
    lo, hi = max(d - r, 0.0, inner), d + r
    if hi > lo and d > 0:
        # cosine substitution clusters nodes at both ends (square-root endpoints)
        tau = 0.5 * (_GL_NODES + 1.0)
        s = lo + (hi - lo) * 0.5 * (1.0 - np.cos(np.pi * tau))
        ds = (hi - lo) * 0.5 * np.pi * np.sin(np.pi * tau) * 0.5
        vals = s ** a * _sphere_share(n, s, d, r)
        total += float(np.sum(_GL_WEIGHTS * vals * ds))
    return total


def ball_integral(V: Potential, x, r, dim: int | None = None) -> np.ndarray | float:
    """Integral of ``V`` over ``B(x, r)``.

    ``x`` is a point or an array of points ``(m, n)``; ``r`` broadcasts
    against the points.  Returns a float for a single point and scalar ``r``.
    """
    pts = np.asarray(x, dtype=float)
    scalar = pts.ndim <= 1 and np.ndim(r) == 0
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(1, -1) if dim is None or dim == pts.size else pts.reshape(-1, 1)
    n = pts.shape[1]
    rr = np.broadcast_to(np.asarray(r, dtype=float), (pts.shape[0],)) if np.ndim(r) <= 1 else np.asarray(r)
    if np.any(rr <= 0):
        raise ValueError("ball radius must be positive")
    omega = unit_ball_volume(n)
    d = np.sqrt(np.sum(pts ** 2, axis=1))
    fam = V.family
    if fam == "zero":
        out = np.zeros_like(rr)
    elif fam == "constant":
        out = V.param * omega * rr ** n
    else:
        a = V.param
        if a == 0.0:
            out = omega * rr ** n
        elif a == 2.0:
            out = omega * rr ** n * d ** 2 + n * omega * rr ** (n + 2) / (n + 2)
        elif n == 1:
            def G(y):
                return np.sign(y) * np.abs(y) ** (a + 1.0) / (a + 1.0)
            xs = pts[:, 0]
            out = G(xs + rr) - G(xs - rr)
        else:
            out = np.array([
                n * omega * ri ** (n + a) / (n + a) if di == 0.0
                else _power_ball_integral_nd(n, a, di, ri)
                for di, ri in zip(d, rr)])
    out = np.asarray(out, dtype=float)
    return float(out[0]) if scalar else out


def _F(V: Potential, pts, r):
    n = pts.shape[1]
    return r ** (2.0 - n) * ball_integral(V, pts, r)


def critical_radius(V: Potential, x, tol: float = 1e-6, r_min: float = 1e-3,
                    r_max: float = 64.0, check_monotone: bool = True):
    """Critical radius ``sup{r : r^(2-n) int_B(x,r) V <= 1}`` at one or many points.

    Bisection in ``log r`` on ``[r_min, r_max]``; the lower end is pushed down
    if ``F(r_min) > 1``.  Points where ``F(r_max) < 1`` get ``inf``.  The
    returned radius satisfies ``|F(rho) - 1| <= tol``.

    Raises
    ------
    AlgorithmError
        If ``F`` is found decreasing on the sampled radii.
    """
    pts = np.asarray(x, dtype=float)
    scalar = pts.ndim <= 1
    pts = np.atleast_2d(pts) if pts.ndim == 1 else (pts.reshape(1, 1) if pts.ndim == 0 else pts)
    m = pts.shape[0]
    if V.is_zero:
        out = np.full(m, np.inf)
        return float(out[0]) if scalar else out
    if check_monotone:
        rs = np.geomspace(r_min, r_max, 24)
        Fs = np.stack([_F(V, pts, np.full(m, ri)) for ri in rs], axis=1)
        if np.any(np.diff(Fs, axis=1) < -1e-12 * np.maximum(Fs[:, 1:], 1e-300)):
            raise AlgorithmError("r -> r^(2-n) int_B V is not monotone on the sampled radii")
    lo = np.full(m, float(r_min))
    hi = np.full(m, float(r_max))
    for _ in range(200):
        bad = _F(V, pts, lo) > 1.0
        if not bad.any():
            break
        hi[bad] = lo[bad]
        lo[bad] = lo[bad] / 16.0
    else:
        raise AlgorithmError("could not bracket the critical radius from below")
    out = np.full(m, np.inf)
    finite = _F(V, pts, hi) >= 1.0
    if finite.any():
        a, b = np.log(lo[finite]), np.log(hi[finite])
        p = pts[finite]
        for _ in range(200):
            mid = 0.5 * (a + b)
            below = _F(V, p, np.exp(mid)) <= 1.0
            a = np.where(below, mid, a)
            b = np.where(below, b, mid)
            if np.max(b - a) < 1e-14:
                break
        rho = np.exp(0.5 * (a + b))
        res = np.abs(_F(V, p, rho) - 1.0)
        if np.any(res > tol):
            raise AlgorithmError(f"critical radius residual {res.max():.3e} exceeds {tol}")
        out[finite] = rho
    return float(out[0]) if scalar else out


class CriticalRadiusProfile:
    """Critical radius of a potential with a write-once cache of grid values.

    Parameters
    ----------
    potential : Potential
    grid : Grid, optional
        Sets the default bracket ``[h/4, 8R]``.
    tol : float
        Residual tolerance on ``|F(rho) - 1|``.
    """

    def __init__(self, potential: Potential, grid: Grid | None = None, tol: float = 1e-6,
                 r_max: float | None = None):
        self.potential = potential
        self.grid = grid
        self.tol = tol
        self.r_min = grid.spacing / 4.0 if grid is not None else 1e-3
        self.r_max = r_max if r_max is not None else (8.0 * grid.half_extent if grid is not None else 64.0)
        self._cache: dict[tuple, float] = {}
        self._lock = threading.Lock()
        self._grid_values = None

    @property
    def infinity_sentinel(self) -> bool:
        return self.potential.is_zero

    def at(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        keys = [tuple(np.round(p, 12)) for p in pts]
        missing = [i for i, k in enumerate(keys) if k not in self._cache]
        if missing:
            vals = critical_radius(self.potential, pts[missing], self.tol, self.r_min, self.r_max)
            with self._lock:
                for i, v in zip(missing, np.atleast_1d(vals)):
                    self._cache.setdefault(keys[i], float(v))
        return np.array([self._cache[k] for k in keys])

    def on_grid(self, grid: Grid | None = None) -> np.ndarray:
        g = grid or self.grid
        if g is None:
            raise ValueError("no grid bound to this profile")
        if g is self.grid and self._grid_values is not None:
            return self._grid_values
        vals = critical_radius(self.potential, g.centers, self.tol, self.r_min, self.r_max)
        if g is self.grid:
            self._grid_values = vals
        return vals

    def residuals(self, points) -> np.ndarray:
        """``|F(rho(x)) - 1|`` at finite-rho points (NaN at the sentinel)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rho = self.at(pts)
        out = np.full(rho.shape, np.nan)
        fin = np.isfinite(rho)
        if fin.any():
            out[fin] = np.abs(_F(self.potential, pts[fin], rho[fin]) - 1.0)
        return out


@dataclass(frozen=True)
class PsiFunctional:
    """Cube penalty ``(1 + side / rho)^theta``.

    ``mode="centered"`` evaluates ``rho`` at the cube center; ``mode="sup"``
    uses the largest ``rho`` over the cell centers in the cube and the cube
    center itself, which can only make the penalty smaller.
    """

    theta: float
    mode: str = "centered"
    profile: CriticalRadiusProfile = field(default=None, compare=False)

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("theta must be non-negative")
        if self.mode not in ("centered", "sup"):
            raise ValueError("mode must be 'centered' or 'sup'")

    def with_theta(self, theta: float) -> "PsiFunctional":
        return PsiFunctional(theta, self.mode, self.profile)

    def with_mode(self, mode: str) -> "PsiFunctional":
        return PsiFunctional(self.theta, mode, self.profile)

    def radii(self, C: CubeCollection) -> np.ndarray:
        """``rho(c_Q)`` or the sup-mode radius for every cube."""
        if self.profile is None or self.profile.infinity_sentinel:
            return np.full(len(C), np.inf)
        centered = self.profile.at(C.centers)
        if self.mode == "centered":
            return centered
        cell_max = C.maxima(self.profile.on_grid(C.grid))
        return np.maximum(cell_max, centered)

    def log_values(self, C: CubeCollection) -> np.ndarray:
        if self.theta == 0:
            return np.zeros(len(C))
        rho = self.radii(C)
        with np.errstate(divide="ignore"):
            return self.theta * np.log1p(C.sides / rho)

    def values(self, C: CubeCollection) -> np.ndarray:
        return np.exp(self.log_values(C))

    def of(self, Q: Cube, grid: Grid | None = None) -> float:
        g = grid or (self.profile.grid if self.profile is not None else None)
        if g is None:
            if self.profile is None or self.profile.infinity_sentinel or self.theta == 0:
                return 1.0
            raise ValueError("a grid is needed to evaluate psi")
        return float(self.values(CubeCollection(g, [Q]))[0])


def psi(P: PsiFunctional, Q: Cube, grid: Grid | None = None) -> float:
    return P.of(Q, grid)


# diagnostics ---------------------------------------------------------------

@dataclass
class ReverseHolderReport:
    sigma: float
    constant: float
    argmax: int | None
    exception_cubes: list
    vacuous: bool

    def to_dict(self):
        return {"sigma": self.sigma, "constant": self.constant, "argmax": self.argmax,
                "exception_cubes": self.exception_cubes, "vacuous": self.vacuous}


def reverse_holder_check(V: Potential, sigma: float, cubes: CubeCollection) -> ReverseHolderReport:
    """Largest ``(avg V^sigma)^(1/sigma) / avg V`` over the collection."""
    n = cubes.grid.dim
    if sigma < n / 2.0:
        raise ValueError("reverse Holder exponent must be at least n/2")
    vals = V.on_grid(cubes.grid)
    if not np.any(vals > 0):
        return ReverseHolderReport(sigma, 1.0, None, [], True)
    avg = cubes.means(vals)
    # power averages in log domain to stay finite for large sigma
    with np.errstate(divide="ignore"):
        logv = np.log(vals)
    high = np.exp(cubes.log_means_exp(sigma * logv) / sigma)
    bad = avg <= 0
    ratio = np.where(bad, 0.0, high / np.where(bad, 1.0, avg))
    j = int(np.argmax(ratio))
    return ReverseHolderReport(sigma, float(ratio[j]), j,
                               [cubes[i].to_dict() for i in np.flatnonzero(bad)], False)


@dataclass
class DiagnosticsReport:
    sentinel: bool
    radius_residual_max: float = float("nan")
    C0: float = float("nan")
    k0: float = float("nan")
    C0_by_k0: dict = field(default_factory=dict)
    doubling_order: float = float("nan")
    small_ball_exponent: float = float("nan")
    remark_constants: dict = field(default_factory=dict)

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items()}


def regularity_diagnostics(V: Potential, points, radii=None, tol: float = 1e-6,
                           k0_grid=(1, 2, 3, 4, 6, 8)) -> DiagnosticsReport:
    """Fitted constants describing how ``rho`` varies and how ``V`` doubles.

    Reports the smallest ``C0`` for each ``k0`` in the two-sided comparison
    of ``rho(y)`` with ``rho(x)``, the worst residual of ``F(rho) = 1``, the
    doubling order of ``V`` on balls, the small-ball decay exponent, and the
    constants of the two-branch ball-average bound.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[1]
    if V.is_zero:
        return DiagnosticsReport(sentinel=True)
    rho = critical_radius(V, pts, tol=tol)
    if not np.all(np.isfinite(rho)):
        raise ValueError("rho must be finite on the sample points")
    rep = DiagnosticsReport(sentinel=False)
    rep.radius_residual_max = float(np.max(np.abs(_F(V, pts, rho) - 1.0)))
    dist = np.sqrt(np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1))
    rx, ry = rho[:, None], rho[None, :]
    best = (np.inf, None)
    for k0 in k0_grid:
        lower = rx / (ry * (rx + dist) ** k0)
        upper = ry / (rx * (rx + dist) ** (k0 / (1.0 + k0)))
        c0 = float(max(lower.max(), upper.max(), 1.0))
        rep.C0_by_k0[str(k0)] = c0
        if c0 < best[0]:
            best = (c0, k0)
    rep.C0, rep.k0 = best
    if radii is None:
        radii = np.geomspace(0.05, 8.0, 12)
    radii = np.asarray(radii, dtype=float)
    dbl, small = [], []
    for r in radii:
        rr = np.full(len(pts), r)
        b1 = ball_integral(V, pts, rr)
        b2 = ball_integral(V, pts, 2 * rr)
        ok = b1 > 0
        dbl.append(np.max(np.log2(b2[ok] / b1[ok])) if ok.any() else np.nan)
    rep.doubling_order = float(np.nanmax(dbl))
    # decay exponent of F below the critical scale: F(r)/F(R) <= C (r/R)^sigma0
    for x, rx0 in zip(pts, rho):
        rs = rx0 * np.geomspace(0.05, 1.0, 8)
        Fs = _F(V, np.repeat(x[None], len(rs), 0), rs)
        ok = Fs > 0
        if ok.sum() >= 2:
            small.append(np.polyfit(np.log(rs[ok]), np.log(Fs[ok]), 1)[0])
    rep.small_ball_exponent = float(np.min(small)) if small else float("nan")
    sig0, n0 = rep.small_ball_exponent, rep.doubling_order
    below, above = [], []
    omega = unit_ball_volume(n)
    for x, rx0 in zip(pts, rho):
        for s in np.geomspace(0.1, 10.0, 9):
            r = s * rx0
            avg = ball_integral(V, x, r) / (omega * r ** n)
            lhs = r ** 2 * avg
            if s <= 1:
                below.append(lhs / s ** sig0)
            else:
                above.append(lhs / s ** (n0 + 2 - n))
    rep.remark_constants = {"small_balls": float(np.max(below)), "large_balls": float(np.max(above))}
    return rep
