"""Test functions with closed-form derivatives, and grid functions.

A :class:`SmoothFunction` bundles values, gradient, Hessian and, optionally,
a cancellation-free compensated increment ``u(x+z) - u(x) - Du(x).z`` and a
tail model ``(limit, oscillation)`` used to close integrals at infinity.
A :class:`GridField` holds nodal values on a box with either periodic wrap or
closed-form exterior data.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator


def _as_points(y):
    y = np.asarray(y, float)
    return y


def _sin_minus_id(s):
    """``sin(s) - s`` without cancellation."""
    s = np.asarray(s, float)
    small = np.abs(s) < 1e-2
    ss = np.where(small, s, 0.0)
    series = -ss ** 3 / 6 * (1 - ss ** 2 / 20 * (1 - ss ** 2 / 42))
    return np.where(small, series, np.sin(s) - s)


def expm1_minus_id(s):
    """``exp(s) - 1 - s`` without cancellation."""
    s = np.asarray(s, float)
    small = np.abs(s) < 1e-2
    ss = np.where(small, s, 0.0)
    series = ss ** 2 / 2 * (1 + ss / 3 * (1 + ss / 4 * (1 + ss / 5 * (1 + ss / 6))))
    with np.errstate(over="ignore"):
        direct = np.expm1(s) - s
    return np.where(small, series, direct)


@dataclass(frozen=True)
class SmoothFunction:
    """A C^2 function of ``(y, t)`` with derivatives at single points.

    Parameters
    ----------
    value : callable
        ``value(y, t)`` for points ``y`` of shape ``(..., dim)``.
    grad, hess : callable
        ``grad(x, t)`` of shape ``(dim,)`` and ``hess(x, t)`` of shape
        ``(dim, dim)``.
    increment : callable, optional
        ``increment(x, z, t) = u(x+z) - u(x) - Du(x).z`` computed without
        cancellation.
    tail : callable, optional
        ``tail(x, t, R) -> (limit, osc)``: for ``|y - x| >= R`` the values
        satisfy ``|u(y) - limit| <= osc``.
    """

    value: Callable
    grad: Callable
    hess: Callable
    dim: int = 1
    increment: Optional[Callable] = None
    tail: Optional[Callable] = None

    def __call__(self, y, t=0.0):
        return np.asarray(self.value(_as_points(y), t), float)

    def diff(self, x, z, t=0.0):
        """``u(x+z) - u(x)``."""
        x = np.asarray(x, float)
        return self(x + z, t) - self(x, t)

    def comp(self, x, z, t=0.0):
        """``u(x+z) - u(x) - Du(x).z``."""
        x = np.asarray(x, float)
        if self.increment is not None:
            return np.asarray(self.increment(x, np.asarray(z, float), t), float)
        return self.diff(x, z, t) - np.asarray(z, float) @ self.grad(x, t)

    def __add__(self, other):
        return lincomb(1.0, self, 1.0, other)

    def __mul__(self, k):
        return lincomb(float(k), self, 0.0, self)

    __rmul__ = __mul__


def lincomb(a, u: SmoothFunction, b, v: SmoothFunction) -> SmoothFunction:
    """``a u + b v`` with combined increments and tail models."""
    inc = None
    if u.increment is not None or v.increment is not None:
        inc = lambda x, z, t: a * u.comp(x, z, t) + b * v.comp(x, z, t)

    def tail(x, t, R):
        lu, ou = u.tail(x, t, R)
        lv, ov = v.tail(x, t, R)
        return a * lu + b * lv, abs(a) * ou + abs(b) * ov
    return SmoothFunction(
        lambda y, t: a * u(y, t) + b * v(y, t),
        lambda x, t: a * u.grad(x, t) + b * v.grad(x, t),
        lambda x, t: a * u.hess(x, t) + b * v.hess(x, t),
        u.dim, inc, tail if u.tail is not None and v.tail is not None else None)


def constant(c=0.0, dim=1) -> SmoothFunction:
    c = float(c)
    return SmoothFunction(
        lambda y, t: np.full(np.shape(y)[:-1], c),
        lambda x, t: np.zeros(dim),
        lambda x, t: np.zeros((dim, dim)),
        dim,
        lambda x, z, t: np.zeros(np.shape(z)[:-1]),
        lambda x, t, R: (c, 0.0))


def linear(g, c=0.0) -> SmoothFunction:
    g = np.atleast_1d(np.asarray(g, float))
    dim = len(g)
    return SmoothFunction(
        lambda y, t: y @ g + c,
        lambda x, t: g.copy(),
        lambda x, t: np.zeros((dim, dim)),
        dim,
        lambda x, z, t: np.zeros(np.shape(z)[:-1]))


def cosine(k=1.0, amplitude=1.0, phase=0.0, offset=0.0) -> SmoothFunction:
    """``amplitude * cos(k.y + phase) + offset`` with wave vector ``k``."""
    k = np.atleast_1d(np.asarray(k, float))
    dim = len(k)
    A = float(amplitude)

    def value(y, t):
        return A * np.cos(y @ k + phase) + offset

    def grad(x, t):
        return -A * np.sin(x @ k + phase) * k

    def hess(x, t):
        return -A * np.cos(x @ k + phase) * np.outer(k, k)

    def increment(x, z, t):
        a = x @ k + phase
        s = z @ k
        # cos(a+s) - cos a + s sin a = cos a (cos s - 1) - sin a (sin s - s)
        return A * (-2.0 * np.cos(a) * np.sin(0.5 * s) ** 2 - np.sin(a) * _sin_minus_id(s))

    return SmoothFunction(value, grad, hess, dim, increment,
                          lambda x, t, R: (float(offset), abs(A)))


def quadratic(Q, center=None, g=None, c=0.0) -> SmoothFunction:
    """``0.5 (y-x0).Q(y-x0) + g.(y-x0) + c``."""
    Q = np.atleast_2d(np.asarray(Q, float))
    dim = Q.shape[0]
    x0 = np.zeros(dim) if center is None else np.atleast_1d(np.asarray(center, float))
    g = np.zeros(dim) if g is None else np.atleast_1d(np.asarray(g, float))

    def value(y, t):
        d = y - x0
        return 0.5 * np.einsum("...i,ij,...j->...", d, Q, d) + d @ g + c

    return SmoothFunction(
        value,
        lambda x, t: Q @ (x - x0) + g,
        lambda x, t: Q.copy(),
        dim,
        lambda x, z, t: 0.5 * np.einsum("...i,ij,...j->...", z, Q, z))


def gaussian(center=0.0, width=1.0, height=1.0, dim=None) -> SmoothFunction:
    """``height * exp(-|y - center|^2 / (2 width^2))``."""
    x0 = np.atleast_1d(np.asarray(center, float))
    if dim is not None and len(x0) == 1:
        x0 = np.full(dim, x0[0])
    dim = len(x0)
    s2 = float(width) ** 2
    H = float(height)

    def value(y, t):
        return H * np.exp(-np.sum((y - x0) ** 2, -1) / (2 * s2))

    def grad(x, t):
        return -value(x, t) * (x - x0) / s2

    def hess(x, t):
        d = x - x0
        return value(x, t) * (np.outer(d, d) / s2 - np.eye(dim)) / s2

    def increment(x, z, t):
        d = x - x0
        # exponent change q = -(2 d.z + |z|^2) / (2 s2)
        q = -(2 * (z @ d) + np.sum(z * z, -1)) / (2 * s2)
        lin = -(z @ d) / s2
        return value(x, t) * (expm1_minus_id(q) + (q - lin))

    def tail(x, t, R):
        far = max(R - np.linalg.norm(np.asarray(x) - x0), 0.0)
        return 0.0, H * np.exp(-far ** 2 / (2 * s2))

    return SmoothFunction(value, grad, hess, dim, increment, tail)


def from_callable(fun, dim=1, step=1e-4, tail=None) -> SmoothFunction:
    """Wrap ``fun(y, t)`` with centered-difference derivatives."""

    def grad(x, t):
        x = np.asarray(x, float)
        e = np.eye(dim) * step
        return np.array([(fun(x + e[i], t) - fun(x - e[i], t)) / (2 * step)
                         for i in range(dim)], float)

    def hess(x, t):
        x = np.asarray(x, float)
        e = np.eye(dim) * step
        H = np.empty((dim, dim))
        f0 = fun(x, t)
        for i in range(dim):
            for j in range(dim):
                if i == j:
                    H[i, i] = (fun(x + e[i], t) - 2 * f0 + fun(x - e[i], t)) / step ** 2
                else:
                    H[i, j] = (fun(x + e[i] + e[j], t) - fun(x + e[i] - e[j], t)
                               - fun(x - e[i] + e[j], t) + fun(x - e[i] - e[j], t)) / (4 * step ** 2)
        return H

    return SmoothFunction(lambda y, t: np.asarray(fun(y, t), float), grad, hess, dim,
                          None, tail)


def restrict(u: SmoothFunction, x, axes) -> SmoothFunction:
    """``u`` as a function of the coordinates ``axes``, the others frozen at ``x``."""
    x = np.asarray(x, float)
    axes = list(axes)
    d = len(axes)

    def embed(y):
        y = np.asarray(y, float)
        full = np.broadcast_to(x, y.shape[:-1] + x.shape).copy()
        full[..., axes] = y
        return full

    def pad(z):
        z = np.asarray(z, float)
        full = np.zeros(z.shape[:-1] + x.shape)
        full[..., axes] = z
        return full

    inc = None
    if u.increment is not None:
        inc = lambda y, z, t: u.comp(embed(y), pad(z), t)

    def tail(y, t, R):
        # frozen coordinates shift the far values; recentre on the midrange
        # of samples and widen the bound by the shift so it stays valid
        limit, osc = u.tail(embed(y), t, R)
        rng = np.random.default_rng(0)
        w = rng.normal(size=(1024, d))
        w /= np.linalg.norm(w, axis=1)[:, None]
        r = R * np.geomspace(1.0, 1e3, 1024)[:, None]
        far = u(embed(np.asarray(y, float) + r * w), t)
        mid = 0.5 * float(np.max(far) + np.min(far))
        return mid, osc + abs(mid - limit)

    return SmoothFunction(
        lambda y, t: u(embed(y), t),
        lambda y, t: np.asarray(u.grad(embed(y), t))[axes],
        lambda y, t: np.asarray(u.hess(embed(y), t))[np.ix_(axes, axes)],
        d, inc, tail if u.tail is not None else None)


@dataclass
class GridField:
    """Nodal values on a box with periodic wrap or Dirichlet exterior data.

    Periodic grids have ``n`` nodes per period (spacing ``L/n``); Dirichlet
    grids include both end points (spacing ``L/(n-1)``) and every node is an
    unknown, the exterior ``phi(y, t)`` supplying values outside the box.
    """

    lower: tuple
    upper: tuple
    values: np.ndarray
    t: float = 0.0
    exterior: Optional[Callable] = None
    periodic: bool = False
    T: float = np.inf

    def __post_init__(self):
        self.lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        self.upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        self.values = np.asarray(self.values, float)
        if self.values.ndim != len(self.lower):
            raise ValueError("values must have one axis per box dimension")
        if any(u <= l for l, u in zip(self.lower, self.upper)):
            raise ValueError("empty box")
        if not self.periodic and self.exterior is None:
            raise ValueError("a Dirichlet grid needs exterior data")
        if min(self.values.shape) < 2:
            raise ValueError("need at least two nodes per axis")

    @property
    def dim(self):
        return self.values.ndim

    @property
    def shape(self):
        return self.values.shape

    @property
    def h(self):
        n = np.array(self.shape, float)
        L = np.subtract(self.upper, self.lower)
        return L / n if self.periodic else L / (n - 1)

    def axes(self):
        return [lo + hh * np.arange(n) for lo, hh, n in zip(self.lower, self.h, self.shape)]

    def points(self):
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def with_values(self, values, t=None):
        return replace(self, values=np.asarray(values, float), t=self.t if t is None else t)

    @classmethod
    def from_function(cls, fun, lower, upper, shape, t=0.0, **kw):
        """Sample ``fun(y, t)`` on the grid nodes."""
        lower, upper = np.atleast_1d(lower), np.atleast_1d(upper)
        shape = tuple(np.atleast_1d(shape).astype(int))
        periodic = kw.get("periodic", False)
        L = upper - lower
        n = np.array(shape, float)
        h = L / n if periodic else L / (n - 1)
        ax = [lo + hh * np.arange(k) for lo, hh, k in zip(lower, h, shape)]
        pts = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1)
        return cls(tuple(lower), tuple(upper), np.asarray(fun(pts, t), float), t, **kw)

    def sample(self, y):
        """Values at arbitrary points: multilinear inside, exterior outside."""
        y = np.asarray(y, float)
        lo, h = np.array(self.lower), self.h
        if self.periodic:
            vals = np.pad(self.values, [(0, 1)] * self.dim, mode="wrap")
            L = h * np.array(self.shape)
            yy = lo + np.mod(y - lo, L)
            ax = [lo[i] + h[i] * np.arange(self.shape[i] + 1) for i in range(self.dim)]
            interp = RegularGridInterpolator(ax, vals, method="linear")
            return interp(yy.reshape(-1, self.dim)).reshape(y.shape[:-1])
        hi = np.array(self.upper)
        inside = np.all((y >= lo - 1e-12 * h) & (y <= hi + 1e-12 * h), axis=-1)
        out = np.empty(y.shape[:-1])
        if np.any(inside):
            interp = RegularGridInterpolator(self.axes(), self.values, method="linear")
            out[inside] = interp(np.clip(y[inside], lo, hi))
        if np.any(~inside):
            out[~inside] = np.asarray(self.exterior(y[~inside], self.t), float)
        return out

    def as_function(self) -> SmoothFunction:
        """View as a test function; derivatives by centered differences."""
        return grid_function(self)


def grid_function(gf: GridField) -> SmoothFunction:
    h = gf.h
    dim = gf.dim

    def value(y, t):
        return gf.sample(y)

    def grad(x, t):
        x = np.asarray(x, float)
        e = np.diag(h)
        return np.array([(gf.sample(x + e[i]) - gf.sample(x - e[i])) / (2 * h[i])
                         for i in range(dim)], float)

    def hess(x, t):
        x = np.asarray(x, float)
        e = np.diag(h)
        f0 = gf.sample(x)
        H = np.empty((dim, dim))
        for i in range(dim):
            for j in range(dim):
                if i == j:
                    H[i, i] = (gf.sample(x + e[i]) - 2 * f0 + gf.sample(x - e[i])) / h[i] ** 2
                else:
                    H[i, j] = (gf.sample(x + e[i] + e[j]) - gf.sample(x + e[i] - e[j])
                               - gf.sample(x - e[i] + e[j]) + gf.sample(x - e[i] - e[j])) / (4 * h[i] * h[j])
        return H

    def increment(x, z, t):
        # quadratic model inside one cell, interpolated values beyond
        x = np.asarray(x, float)
        z = np.asarray(z, float)
        G, H = grad(x, t), hess(x, t)
        near = np.all(np.abs(z) < h, axis=-1)
        model = 0.5 * np.einsum("...i,ij,...j->...", z, H, z)
        far = gf.sample(x + z) - gf.sample(x) - z @ G
        return np.where(near, model, far)

    tail = None
    if gf.periodic:
        mean, osc = float(np.mean(gf.values)), float(np.ptp(gf.values))
        tail = lambda x, t, R: (mean, osc)
    return SmoothFunction(value, grad, hess, dim, increment, tail)
