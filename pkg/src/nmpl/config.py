"""Experiment configuration: INI-style tables of ``key = value`` pairs.

Example::

    [experiment]
    command = check-measure
    seed = 7

    [measure]
    kind = radial_stable
    beta = 1.5
    dim = 1

Coefficients and data (``b``, ``c``, ``a``, ``A11``.., ``initial``,
``exterior``, ``omega``) are expressions of ``x1.., t`` in the language of
:mod:`nmpl.expr`.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NmplError
from .expr import Expr
from .measures import (AxisCharging, ConeRestricted, HalfSpaceStable, JumpMap, PushForward,
                       RadialStable, ZeroOrderDirectional)
from .operators import NonlinearitySpec, PucciParams

COMMANDS = ("simulate", "check-measure", "reachability", "verify-barrier", "verify-appendix",
            "probe-nondegeneracy", "check-scaling", "compare")

REQUIRED = {
    "simulate": ("measure", "nonlinearity", "grid"),
    "check-measure": ("measure",),
    "reachability": ("measure", "grid"),
    "verify-barrier": ("measure", "barrier"),
    "verify-appendix": ("measure", "appendix"),
    "probe-nondegeneracy": ("measure", "nonlinearity", "probe"),
    "check-scaling": ("nonlinearity",),
    "compare": ("measure", "nonlinearity", "grid", "compare"),
}


@dataclass
class ExperimentConfig:
    """Parsed configuration: the command, its tables and the RNG seed."""

    command: str
    tables: dict
    seed: int = 0
    path: str = ""

    def table(self, name, required=True):
        if name not in self.tables:
            if required:
                raise ConfigError(f"missing [{name}] table")
            return Table(name, {})
        return Table(name, self.tables[name])


@dataclass
class Table:
    name: str
    data: dict = field(default_factory=dict)

    def __contains__(self, key):
        return key in self.data

    def raw(self, key, default=None):
        if key not in self.data:
            if default is None:
                raise ConfigError(f"[{self.name}] needs a value for {key!r}")
            return default
        return self.data[key]

    def float(self, key, default=None, lo=None, hi=None, strict_lo=False):
        v = self.raw(key, default)
        try:
            v = float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"[{self.name}] {key} = {v!r} is not a number") from None
        if not np.isfinite(v):
            raise ConfigError(f"[{self.name}] {key} must be finite")
        if lo is not None and (v < lo or (strict_lo and v == lo)):
            raise ConfigError(f"[{self.name}] {key} = {v} is out of range")
        if hi is not None and v > hi:
            raise ConfigError(f"[{self.name}] {key} = {v} is out of range")
        return v

    def int(self, key, default=None, lo=None):
        v = self.raw(key, default)
        try:
            iv = int(str(v))
        except ValueError:
            raise ConfigError(f"[{self.name}] {key} = {v!r} is not an integer") from None
        if lo is not None and iv < lo:
            raise ConfigError(f"[{self.name}] {key} = {iv} is out of range")
        return iv

    def floats(self, key, default=None):
        v = self.raw(key, default)
        if isinstance(v, (list, tuple)):
            return [float(s) for s in v]
        try:
            return [float(s) for s in str(v).replace(";", ",").split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"[{self.name}] {key} = {v!r} is not a list of numbers") from None

    def bool(self, key, default=None):
        v = str(self.raw(key, default)).strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{self.name}] {key} = {v!r} is not a boolean")

    def str(self, key, default=None):
        return str(self.raw(key, default)).strip()

    def expr(self, key, default=None):
        return Expr(self.raw(key, default))

    def coef(self, key, default):
        """A number when the expression is constant, else the compiled expression."""
        e = self.expr(key, str(default))
        return float(e()) if e.is_constant else (lambda x, t, e=e: e(x, t))


def load(path, seed=None, command=None) -> ExperimentConfig:
    """Parse a configuration file.

    Raises
    ------
    ConfigError
        Unreadable file, syntax errors, unknown command or missing tables.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    tables = {s: dict(cp.items(s)) for s in cp.sections()}
    named = tables.get("experiment", {}).get("command")
    if command is not None and named is not None and named != command:
        raise ConfigError(f"config is for {named!r}, not {command!r}")
    return from_tables(tables, command=command, seed=seed, path=str(path))


def from_tables(tables, command=None, seed=None, path="") -> ExperimentConfig:
    exp = tables.get("experiment", {})
    command = command or exp.get("command")
    if command is None:
        raise ConfigError("missing command (set [experiment] command)")
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {COMMANDS}")
    for name in REQUIRED[command]:
        if name not in tables:
            raise ConfigError(f"missing [{name}] table for command {command}")
    if seed is None:
        seed = Table("experiment", exp).int("seed", 0, lo=0)
    cfg = ExperimentConfig(command, tables, int(seed), path)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig):
    """Build every object the command needs, so range errors surface before running."""
    if "measure" in cfg.tables:
        build_measure(cfg.table("measure"))
    if "measure2" in cfg.tables:
        build_measure(cfg.table("measure2"))
    if "nonlinearity" in cfg.tables:
        build_nonlinearity(cfg.table("nonlinearity"))
    if "grid" in cfg.tables:
        g = cfg.table("grid")
        lo, hi = g.floats("lower"), g.floats("upper")
        shape = [int(v) for v in g.floats("shape")]
        if not (len(lo) == len(hi) == len(shape)) or any(n < 2 for n in shape) \
                or any(b <= a for a, b in zip(lo, hi)):
            raise ConfigError("[grid] lower, upper and shape are inconsistent")
        if g.str("boundary", "dirichlet") not in ("periodic", "dirichlet"):
            raise ConfigError("[grid] boundary must be periodic or dirichlet")


_KINDS = ("radial_stable", "half_space", "cone", "axis_charging", "zero_order")


def build_measure(t: Table):
    """Measure from a table: ``kind``, ``beta``, ``dim`` and kind-specific keys.

    ``jump_scale = k`` wraps the kernel into a Lévy-Itô push-forward by
    ``j(x, z) = k z``.
    """
    try:
        return _build_measure(t)
    except ConfigError:
        raise
    except (NmplError, ValueError, TypeError) as exc:
        raise ConfigError(f"[{t.name}] {exc}") from None


def _build_measure(t: Table):
    kind = t.str("kind")
    dim = t.int("dim", 1, lo=1)
    if kind == "radial_stable":
        m = RadialStable(t.float("beta", 1.5, lo=0, strict_lo=True), dim)
    elif kind == "half_space":
        m = HalfSpaceStable(t.float("beta", 1.5, lo=0, strict_lo=True), dim, t.int("axis", 0, lo=0))
    elif kind == "cone":
        base = RadialStable(t.float("beta", 1.5, lo=0, strict_lo=True), 2)
        m = ConeRestricted(base, t.float("alpha", 1.0, lo=0))
    elif kind == "axis_charging":
        m = AxisCharging(t.float("alpha", 1.0, lo=0), t.float("beta", 1.5, lo=0, strict_lo=True), 2)
    elif kind == "zero_order":
        g = None
        if "g" in t:
            e = t.expr("g")
            g = lambda w, e=e: e(w, 0.0)
        m = ZeroOrderDirectional(g, dim)
    else:
        raise ConfigError(f"[{t.name}] unknown kind {kind!r}; expected one of {_KINDS}")
    if "jump_scale" in t:
        k = t.float("jump_scale")
        m = PushForward(m, JumpMap.scaled(k))
    return m


def build_nonlinearity(t: Table) -> NonlinearitySpec:
    form = t.str("form")
    dim = t.int("dim", 1, lo=1)
    kw = dict(b=t.coef("b", 1.0), m=t.float("m", 2.0, lo=0), a=t.coef("a", 1.0),
              c=t.coef("c", 1.0))
    if any(f"A{i}{j}" in t for i in range(1, dim + 1) for j in range(1, dim + 1)):
        ents = [[t.expr(f"A{i}{j}", "1" if i == j else "0") for j in range(1, dim + 1)]
                for i in range(1, dim + 1)]
        if all(e.is_constant for row in ents for e in row):
            kw["A"] = np.array([[float(e()) for e in row] for row in ents])
        else:
            def A(x, tt, ents=ents):
                x = np.asarray(x, float)
                return np.stack([np.stack([np.broadcast_to(e(x, tt), x.shape[:-1]) for e in row], -1)
                                 for row in ents], -2)
            kw["A"] = A
    if "nonlocal_axes" in t:
        kw["nonlocal_axes"] = tuple(int(v) for v in t.floats("nonlocal_axes"))
    if "second_nonlocal" in t:
        kw["second_nonlocal"] = t.bool("second_nonlocal")
    if "pucci_lambda" in t or "pucci_Lambda" in t:
        kw["pucci"] = PucciParams(t.float("pucci_lambda", 1.0), t.float("pucci_Lambda", 2.0))
    try:
        return NonlinearitySpec(form, dim, **kw)
    except (NmplError, ValueError) as exc:
        raise ConfigError(f"[{t.name}] {exc}") from None


def gammas(t: Table):
    lo, hi = t.float("gamma_min", 10.0, lo=1.0), t.float("gamma_max", 1e4, lo=1.0)
    n = t.int("gamma_count", 13, lo=3)
    if hi / lo < 100 * (1 - 1e-12):
        raise ConfigError(f"[{t.name}] the gamma range must span two decades")
    return np.geomspace(lo, hi, n)
