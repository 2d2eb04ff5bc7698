"""JSON run configuration: parsing, validation and canonical serialization.

One file fully determines a run::

    {"grid": {"dim": 1, "half_extent": 8.0, "cells": 256},
     "potential": {"family": "hermite", "param": 2.0},
     "exponents": {"p": 2.0, "q": null, "alpha": 0.0, "theta": 1.0},
     "weight": {"family": "power", "param": 0.5},
     "collection": {"strategy": "dyadic-all-shifts", "depth": null},
     "seed": 0,
     "rho": {...}, "heat": {...}, ...}

``q = null`` means "solve ``1/q = 1/p - alpha/n``".  Subcommand blocks are
merged over the defaults in :data:`BLOCK_DEFAULTS`, so ``parse`` followed by
``serialize`` gives a canonical form and ``parse(serialize(c)) == c``.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .grid import STRATEGIES, Grid, GridError
from .potential import Potential
from .weights import WEIGHT_FAMILIES, ExponentError, ExponentSet

__all__ = ["ConfigError", "RunConfig", "BLOCK_DEFAULTS", "load_config", "parse_config"]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


BLOCK_DEFAULTS: dict[str, dict] = {
    "rho": {"axis": 0, "extent": None, "samples": None, "tol": 1e-6},
    "char": {"kinds": ["ap", "apq", "tilde"]},
    "bmo": {"function": "log-weight", "eta_grid": None, "ceiling": None,
            "lambda_grid": [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0], "theta_prime": 1.0},
    "maximal": {"function": "gaussian", "t_grid": None},
    "heat": {"t_grid": None, "c": 5.0, "n_exponent": 2.0, "budget": 100.0, "slice_time": 1.0},
    "fracint": {"function": "gaussian", "lattices": 3},
    "rdf": {"r0": 2.0, "r": 3.0, "K_terms": 40, "function": "gaussian"},
    "twoweight": {"delta": 1.0, "sigma": {"family": "constant", "param": None}, "budget": 10.0, "depth": 4},
    "sweep": {"check": "heat_domination", "cells": [128, 256, 512], "theta": 1.0},
    "suite": {},
}

_TOP = {"grid", "potential", "exponents", "weight", "collection", "seed"} | set(BLOCK_DEFAULTS)
_POTENTIAL_FAMILIES = ("zero", "constant", "power", "hermite", "harmonic", "oscillator")


def _num(x, name, allow_none=False):
    if x is None and allow_none:
        return None
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{name} must be a number, got {x!r}")
    x = float(x)
    if math.isnan(x):
        raise ConfigError(f"{name} is NaN")
    return x


def _int(x, name, allow_none=False):
    if x is None and allow_none:
        return None
    if isinstance(x, bool) or not isinstance(x, int):
        if isinstance(x, float) and x.is_integer():
            return int(x)
        raise ConfigError(f"{name} must be an integer, got {x!r}")
    return int(x)


def _merge(defaults: dict, given: dict, name: str) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"block {name!r} must be an object")
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if defaults and k not in defaults:
            raise ConfigError(f"unknown key {name}.{k}")
        out[k] = copy.deepcopy(v)
    return out


@dataclass
class RunConfig:
    dim: int = 1
    half_extent: float = 8.0
    cells: int = 256
    potential: dict = field(default_factory=lambda: {"family": "hermite", "param": 2.0})
    p: float = 2.0
    q: float | None = None
    alpha: float = 0.0
    theta: float = 1.0
    weight: dict = field(default_factory=lambda: {"family": "constant", "param": None})
    strategy: str = "dyadic-all-shifts"
    depth: int | None = None
    seed: int = 0
    blocks: dict = field(default_factory=lambda: copy.deepcopy(BLOCK_DEFAULTS))

    # constructed objects ---------------------------------------------------
    def grid(self) -> Grid:
        return Grid(self.dim, self.half_extent, self.cells)

    def make_potential(self) -> Potential:
        return Potential.from_dict(self.potential)

    def exponents(self) -> ExponentSet:
        if self.q is None:
            return ExponentSet.from_p(self.dim, self.p, self.alpha, self.theta)
        return ExponentSet(self.dim, self.p, self.q, self.alpha, self.theta)

    def block(self, name: str) -> dict:
        return self.blocks[name]

    # serialization -----------------------------------------------------------
    def to_dict(self) -> dict:
        d = {"grid": {"dim": self.dim, "half_extent": self.half_extent, "cells": self.cells},
             "potential": dict(self.potential),
             "exponents": {"p": self.p, "q": self.q, "alpha": self.alpha, "theta": self.theta},
             "weight": dict(self.weight),
             "collection": {"strategy": self.strategy, "depth": self.depth},
             "seed": self.seed}
        d.update(copy.deepcopy(self.blocks))
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.to_json() == other.to_json()


def parse_config(raw: dict | None, seed: int | None = None) -> RunConfig:
    """Validate a config mapping and return the canonical :class:`RunConfig`.

    Every inconsistency (unknown keys, bad families, an exponent relation
    that does not hold, a grid that cannot be built) raises
    :class:`ConfigError` before any computation.
    """
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _TOP
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    c = RunConfig()
    g = raw.get("grid", {})
    c.dim = _int(g.get("dim", c.dim), "grid.dim")
    c.half_extent = _num(g.get("half_extent", c.half_extent), "grid.half_extent")
    c.cells = _int(g.get("cells", g.get("cells_per_axis", c.cells)), "grid.cells")
    if set(g) - {"dim", "half_extent", "cells", "cells_per_axis"}:
        raise ConfigError(f"unknown grid keys {sorted(set(g) - {'dim', 'half_extent', 'cells'})}")
    try:
        c.grid()
    except (GridError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from exc

    pot = raw.get("potential", c.potential)
    fam = pot.get("family", "hermite")
    if fam not in _POTENTIAL_FAMILIES:
        raise ConfigError(f"unknown potential family {fam!r}")
    try:
        c.potential = Potential.from_dict(pot).to_dict()
    except ValueError as exc:
        raise ConfigError(f"potential: {exc}") from exc
    c.potential.setdefault("param", None)

    ex = raw.get("exponents", {})
    if set(ex) - {"p", "q", "alpha", "theta"}:
        raise ConfigError(f"unknown exponent keys {sorted(set(ex) - {'p', 'q', 'alpha', 'theta'})}")
    c.p = _num(ex.get("p", c.p), "exponents.p")
    c.q = _num(ex.get("q", None), "exponents.q", allow_none=True)
    c.alpha = _num(ex.get("alpha", c.alpha), "exponents.alpha")
    c.theta = _num(ex.get("theta", c.theta), "exponents.theta")
    try:
        E = c.exponents()
    except (ExponentError, ValueError) as exc:
        raise ConfigError(f"exponents: {exc}") from exc
    if c.q is not None:
        c.q = E.q

    w = raw.get("weight", c.weight)
    if w.get("family") not in WEIGHT_FAMILIES:
        raise ConfigError(f"unknown weight family {w.get('family')!r}; expected one of {WEIGHT_FAMILIES}")
    c.weight = {"family": w["family"], "param": copy.deepcopy(w.get("param"))}

    col = raw.get("collection", {})
    c.strategy = col.get("strategy", c.strategy)
    if c.strategy not in STRATEGIES:
        raise ConfigError(f"unknown collection strategy {c.strategy!r}")
    c.depth = _int(col.get("depth", None), "collection.depth", allow_none=True)

    s = raw.get("seed", c.seed) if seed is None else seed
    c.seed = _int(s, "seed")
    if c.seed < 0 or c.seed >= 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")

    c.blocks = {name: _merge(defaults, raw.get(name, {}), name) for name, defaults in BLOCK_DEFAULTS.items()}
    _validate_suite(c.blocks["suite"])
    return c


def _validate_suite(block: dict):
    from .harness import HarnessConfig
    try:
        HarnessConfig.from_dict(block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"suite: {exc}") from exc


def load_config(path: str | Path | None, seed: int | None = None) -> RunConfig:
    """Read and parse a JSON config file; ``None`` gives the defaults."""
    if path is None:
        return parse_config({}, seed)
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
    return parse_config(raw, seed)
