"""A small arithmetic expression language for coefficients and data.

Grammar::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('+' | '-') unary | power
    power := atom ('^' unary)?
    atom  := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Names are the coordinates ``x`` (same as ``x1``), ``x1``, ``x2``, ``x3``, the
time ``t`` and the constants ``pi`` and ``e``.  Functions are ``cos``,
``sin``, ``exp``, ``abs``, ``min`` and ``max``.  Expressions compile to
vectorized closures over numpy arrays.
"""
from __future__ import annotations

import re

import numpy as np

from .errors import ConfigError

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
                    r"|([A-Za-z_][A-Za-z_0-9]*)|(.))")

_FUNCS = {
    "cos": (np.cos, 1), "sin": (np.sin, 1), "exp": (np.exp, 1), "abs": (np.abs, 1),
    "min": (np.minimum, 2), "max": (np.maximum, 2),
}
_CONSTS = {"pi": np.pi, "e": np.e}


def _tokenize(src):
    out = []
    pos = 0
    src = src.strip()
    while pos < len(src):
        mt = _TOKEN.match(src, pos)
        if mt is None or mt.end() == pos:
            break
        num, name, op = mt.groups()
        if num is not None:
            out.append(("num", float(num)))
        elif name is not None:
            out.append(("name", name))
        elif op is not None and not op.isspace():
            if op not in "+-*/^(),":
                raise ConfigError(f"unexpected character {op!r} in expression {src!r}")
            out.append(("op", op))
        pos = mt.end()
    out.append(("end", None))
    return out


class _Parser:
    def __init__(self, src):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0
        self.names = set()

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, val=None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (val is not None and tok[1] != val):
            want = val if val is not None else kind
            raise ConfigError(f"expected {want!r} in expression {self.src!r}, got {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        self.take("end")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            node = (lambda a, b: lambda env: a(env) + b(env))(node, rhs) if op == "+" else \
                (lambda a, b: lambda env: a(env) - b(env))(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs = self.unary()
            node = (lambda a, b: lambda env: a(env) * b(env))(node, rhs) if op == "*" else \
                (lambda a, b: lambda env: a(env) / b(env))(node, rhs)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            inner = self.unary()
            return lambda env: -inner(env)
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            ex = self.unary()
            return lambda env: np.power(base(env), ex(env))
        return base

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return lambda env, v=val: v
        if kind == "op" and val == "(":
            self.take()
            node = self.expr()
            self.take("op", ")")
            return node
        if kind == "name":
            self.take()
            if self.peek() == ("op", "("):
                if val not in _FUNCS:
                    raise ConfigError(f"unknown function {val!r} in expression {self.src!r}")
                fn, arity = _FUNCS[val]
                self.take()
                args = [self.expr()]
                while self.peek() == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.take("op", ")")
                if len(args) != arity:
                    raise ConfigError(f"{val} takes {arity} argument(s)")
                return lambda env: fn(*(a(env) for a in args))
            if val in _CONSTS:
                return lambda env, v=_CONSTS[val]: v
            if val == "t":
                self.names.add("t")
                return lambda env: env["t"]
            mt = re.fullmatch(r"x([1-9]?)", val)
            if mt:
                k = int(mt.group(1) or 1) - 1
                self.names.add(f"x{k + 1}")
                return lambda env, k=k: env["x"][..., k]
            raise ConfigError(f"unknown name {val!r} in expression {self.src!r}")
        raise ConfigError(f"unexpected {val!r} in expression {self.src!r}")


class Expr:
    """A compiled expression, called as ``expr(y, t)`` with ``y`` of shape ``(..., N)``."""

    def __init__(self, src):
        self.src = str(src)
        p = _Parser(self.src)
        self._fn = p.parse()
        self.names = frozenset(p.names)

    @property
    def dim_needed(self):
        return max([int(n[1:]) for n in self.names if n.startswith("x")] or [0])

    @property
    def is_constant(self):
        return not self.names

    def __call__(self, y=None, t=0.0):
        if y is None:
            y = np.zeros((1,))
        y = np.asarray(y, float)
        if y.ndim == 0:
            y = y[None]
        if self.dim_needed > y.shape[-1]:
            raise ConfigError(f"expression {self.src!r} uses x{self.dim_needed} "
                              f"in dimension {y.shape[-1]}")
        val = self._fn({"x": y, "t": t})
        return np.broadcast_to(np.asarray(val, float), y.shape[:-1]).copy() if y.ndim > 1 \
            else np.asarray(val, float)

    def __repr__(self):
        return f"Expr({self.src!r})"


def parse(src) -> Expr:
    return Expr(src)
