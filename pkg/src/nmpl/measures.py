"""Lévy measure families and the integrals of the measure conditions.

Each kernel of the catalogue is a power law ``|z|**-(N + beta)`` restricted or
reweighted by an angular factor, so all integrals go through the polar
cubature of :mod:`nmpl.quadrature`.  Axis-charging kernels live on lines and
are integrated as 1-d line integrals with unit weight per line.

Examples
--------
>>> m = RadialStable(beta=1.5, dim=1)
>>> round(measure_bound(m).value, 4)
5.3333
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import brentq

from .errors import (DegenerateFitError, DivergenceError, EmptyConeWarning,
                     PreconditionError, UndefinedAtOriginError, UnsupportedKindError)
from .quadrature import (TWO_PI, AngularMeasure, QuadratureConfig, QuadResult,
                         angle_of, integrate, unit)

DEFAULT_ETA = 0.5
DEFAULT_QUAD = QuadratureConfig()


def _norm(z):
    return np.linalg.norm(np.asarray(z, float), axis=-1)


def _ones(d):
    return np.ones(d.shape[:-1])


def _line_atoms(dim):
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    raise NotImplementedError


class MeasureSpec:
    """Base class of the kernel catalogue.

    Subclasses provide ``dim``, ``beta``, a pointwise ``density``, a
    ``support`` predicate and the angular factor used by the quadrature.
    """

    kind = "abstract"
    symmetric = False

    def density(self, z):
        raise NotImplementedError

    def support(self, z):
        raise NotImplementedError

    def angular(self) -> AngularMeasure:
        raise NotImplementedError

    def __call__(self, x):
        # a fixed measure is a constant family
        return self


@dataclass(frozen=True)
class RadialStable(MeasureSpec):
    """Rotation invariant kernel ``|z|**-(N + beta) dz``."""

    beta: float
    dim: int = 1
    kind = "radial_stable"
    symmetric = True

    def __post_init__(self):
        _check_beta(self.beta)
        _check_dim(self.dim)

    def density(self, z):
        r = _norm(z)
        return r ** (-(self.dim + self.beta))

    def support(self, z):
        return np.ones(np.shape(z)[:-1], bool)

    def angular(self):
        if self.dim == 1:
            return AngularMeasure(1, atoms=_line_atoms(1), atom_weights=np.ones(2))
        return AngularMeasure(self.dim, density=_ones)


@dataclass(frozen=True)
class HalfSpaceStable(MeasureSpec):
    """Stable kernel restricted to the half-space ``z[axis] >= 0``."""

    beta: float
    dim: int = 1
    axis: int = 0
    kind = "half_space"

    def __post_init__(self):
        _check_beta(self.beta)
        _check_dim(self.dim)
        if not 0 <= self.axis < self.dim:
            raise ValueError(f"axis {self.axis} out of range for dim {self.dim}")

    def density(self, z):
        z = np.asarray(z, float)
        return _norm(z) ** (-(self.dim + self.beta)) * (z[..., self.axis] >= 0)

    def support(self, z):
        return np.asarray(z, float)[..., self.axis] >= 0

    def angular(self):
        if self.dim == 1:
            return AngularMeasure(1, atoms=np.array([[1.0]]), atom_weights=np.ones(1))
        axis = self.axis
        breaks = (0.5 * np.pi, 1.5 * np.pi) if axis == 0 else (0.0, np.pi)
        return AngularMeasure(2, density=lambda d: (d[..., axis] >= 0).astype(float),
                              breakpoints=breaks)


@dataclass(frozen=True)
class ConeRestricted(MeasureSpec):
    """Base kernel restricted to the double cone ``|z_i| > alpha |z_j|``."""

    base: MeasureSpec
    alpha: float = 1.0
    axes: tuple = (0, 1)
    kind = "cone"

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.base.dim < 2:
            raise ValueError("cone restriction needs dimension at least 2")

    @property
    def dim(self):
        return self.base.dim

    @property
    def beta(self):
        return self.base.beta

    @property
    def symmetric(self):
        return self.base.symmetric

    def _inside(self, z):
        z = np.asarray(z, float)
        i, j = self.axes
        return np.abs(z[..., i]) > self.alpha * np.abs(z[..., j])

    def density(self, z):
        return self.base.density(z) * self._inside(z)

    def support(self, z):
        return self.base.support(z) & self._inside(z)

    def angular(self):
        inner = self.base.angular()
        if inner.discrete:
            raise UnsupportedKindError("cone restriction of an atomic kernel")
        e = np.zeros((2, 2))
        i, j = self.axes
        # boundary directions: |w_i| = alpha |w_j|
        e[0, i], e[0, j] = self.alpha, 1.0
        e[1, i], e[1, j] = -self.alpha, 1.0
        breaks = []
        for v in e:
            a = angle_of(v)
            breaks += [a, a + np.pi]
        dens = inner.density
        return AngularMeasure(2, density=lambda d: dens(d) * self._inside(d),
                              breakpoints=tuple(inner.breakpoints) + tuple(breaks))


@dataclass(frozen=True)
class AxisCharging(MeasureSpec):
    """Kernel charging the lines ``z1 = alpha z2`` and ``z1 = -alpha z2``.

    Along each line the 1-d density is ``|s|**-(1 + beta)`` in arclength
    ``s`` with unit weight per line; ``alpha = 0`` charges the single line
    ``z1 = 0``.
    """

    alpha: float = 1.0
    beta: float = 1.5
    dim: int = 2
    kind = "axis_charging"
    symmetric = True

    def __post_init__(self):
        _check_beta(self.beta)
        if self.dim != 2:
            raise ValueError("axis-charging kernels are planar")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")

    def lines(self):
        """Unit direction vectors of the charged lines."""
        dirs = [np.array([self.alpha, 1.0])]
        if self.alpha > 0:
            dirs.append(np.array([-self.alpha, 1.0]))
        return [d / np.linalg.norm(d) for d in dirs]

    def _on_line(self, z, tol=1e-12):
        z = np.asarray(z, float)
        r = _norm(z)
        hit = np.zeros(z.shape[:-1], bool)
        for d in self.lines():
            cross = z[..., 0] * d[1] - z[..., 1] * d[0]
            hit |= np.abs(cross) <= tol * np.maximum(r, 1.0)
        return hit

    def density(self, z):
        return _norm(z) ** (-(1.0 + self.beta)) * self._on_line(z)

    def support(self, z):
        return self._on_line(z)

    def angular(self):
        atoms = []
        for d in self.lines():
            atoms += [d, -d]
        return AngularMeasure(2, atoms=np.array(atoms), atom_weights=np.ones(len(atoms)))


@dataclass(frozen=True)
class ZeroOrderDirectional(MeasureSpec):
    """Order-one kernel ``g(z/|z|) |z|**-(N + 1) dz`` of the dislocation model."""

    g: Optional[Callable] = None
    dim: int = 1
    kind = "zero_order"
    beta = 1.0

    def __post_init__(self):
        _check_dim(self.dim)

    def angular_density(self, w):
        w = np.asarray(w, float)
        if self.g is None:
            return np.ones(w.shape[:-1])
        return np.asarray(self.g(w), float) * np.ones(w.shape[:-1])

    @property
    def symmetric(self):
        return self.g is None

    def density(self, z):
        z = np.asarray(z, float)
        r = _norm(z)
        return self.angular_density(z / r[..., None]) * r ** (-(self.dim + 1.0))

    def support(self, z):
        z = np.asarray(z, float)
        r = np.maximum(_norm(z), 1e-300)
        return self.angular_density(z / r[..., None]) > 0

    def angular(self):
        if self.dim == 1:
            atoms = _line_atoms(1)
            return AngularMeasure(1, atoms=atoms, atom_weights=self.angular_density(atoms))
        return AngularMeasure(2, density=self.angular_density)


@dataclass(frozen=True)
class JumpMap:
    """Jump function ``j(x, z)`` of a Lévy-Itô operator.

    Parameters
    ----------
    fn : callable
        ``fn(x, z)`` with ``x`` of shape ``(N,)`` and ``z`` of shape
        ``(..., N)``, returning displacements of the same shape as ``z``.
    c0 : float
        Constant with ``|j(x,z)| <= c0 |z|`` and
        ``|j(x,z) - j(y,z)| <= c0 |z| |x - y|``.
    homogeneous : bool
        Whether ``j(x, r z) = r j(x, z)`` for ``r > 0``; enables exact polar
        regions for cone integrals.
    """

    fn: Callable
    c0: float = 1.0
    homogeneous: bool = False

    def __call__(self, x, z):
        return np.asarray(self.fn(np.asarray(x, float), np.asarray(z, float)), float)

    @classmethod
    def identity(cls):
        return cls(lambda x, z: z, 1.0, True)

    @classmethod
    def scaled(cls, k):
        return cls(lambda x, z: k * z, abs(k), True)

    def direction(self, x, w, eps=1e-7):
        """``j(x, r w) / r`` as ``r -> 0``."""
        if self.homogeneous:
            return self(x, w)
        return self(x, eps * np.asarray(w, float)) / eps

    def check(self, xs, zs, tol=1e-12):
        """Violations of the size and Lipschitz bounds on sampled points."""
        out = []
        xs = np.atleast_2d(np.asarray(xs, float))
        zs = np.atleast_2d(np.asarray(zs, float))
        for a, x in enumerate(xs):
            jx = self(x, zs)
            size = _norm(jx) - self.c0 * _norm(zs)
            for k in np.nonzero(size > tol)[0]:
                out.append(("size", a, int(k), float(size[k])))
            for b in range(a + 1, len(xs)):
                small = _norm(zs) <= 1
                lip = (_norm(jx - self(xs[b], zs))
                       - self.c0 * _norm(zs) * np.linalg.norm(x - xs[b]))
                for k in np.nonzero((lip > tol) & small)[0]:
                    out.append(("lipschitz", (a, b), int(k), float(lip[k])))
        return out


@dataclass(frozen=True)
class PushForward(MeasureSpec):
    """Lévy-Itô kernel: the base measure displaced through a jump map."""

    base: MeasureSpec
    jump: JumpMap = field(default_factory=JumpMap.identity)
    kind = "push_forward"

    @property
    def dim(self):
        return self.base.dim

    @property
    def beta(self):
        return self.base.beta

    def density(self, z):
        raise UnsupportedKindError(
            "push-forward kernels have no pointwise density; integrate against the base")

    def support(self, z):
        raise UnsupportedKindError("use image_points to sample the support")

    def image_points(self, x, z):
        """Images under ``j(x, .)`` of the base-support points among ``z``."""
        z = np.asarray(z, float)
        keep = self.base.support(z)
        return self.jump(x, z[keep])

    def angular(self):
        return self.base.angular()


MeasureLike = Union[MeasureSpec, Callable[[np.ndarray], MeasureSpec]]


def measure_at(m: MeasureLike, x=None) -> MeasureSpec:
    """Resolve a measure family at ``x`` (fixed measures are returned as is)."""
    if isinstance(m, MeasureSpec):
        return m
    if x is None:
        raise PreconditionError("an x-dependent family needs a point x")
    return m(np.asarray(x, float))


def _check_beta(beta):
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")


def _check_dim(dim):
    if dim < 1:
        raise ValueError("dimension must be at least 1")


@dataclass(frozen=True)
class ConeSpec:
    """Cone set ``{(1 - eta)|z||p| <= |p.z| <= 1/gamma}``."""

    p: tuple
    eta: float = DEFAULT_ETA
    gamma: float = 1.0

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, float))
        object.__setattr__(self, "p", tuple(p.tolist()))
        if not np.linalg.norm(p) > 0:
            raise PreconditionError("cone direction must be nonzero")
        if not 0 <= self.eta < 1:
            raise PreconditionError("eta must lie in [0, 1)")
        if not self.gamma >= 1:
            raise PreconditionError("gamma must be at least 1")

    @property
    def vec(self):
        return np.asarray(self.p, float)

    def contains(self, z):
        z = np.asarray(z, float)
        p = self.vec
        proj = np.abs(z @ p)
        return ((1 - self.eta) * _norm(z) * np.linalg.norm(p) <= proj) & (proj <= 1 / self.gamma)

    def contains_li(self, x, z, jump: JumpMap):
        return self.contains(jump(x, z))

    def angular_mask(self, w):
        p = self.vec
        cos = np.abs(np.asarray(w, float) @ (p / np.linalg.norm(p)))
        return cos >= (1 - self.eta) * (1 - 1e-13)

    def radial_limit(self, w):
        proj = np.abs(np.asarray(w, float) @ self.vec)
        with np.errstate(divide="ignore"):
            return np.where(proj > 0, 1.0 / (self.gamma * np.maximum(proj, 1e-300)), np.inf)

    def breakpoints(self):
        if len(self.p) != 2:
            return ()
        a = angle_of(self.vec)
        h = float(np.arccos(1 - self.eta))
        return tuple(np.mod([a - h, a + h, a + np.pi - h, a + np.pi + h], TWO_PI))


@dataclass(frozen=True)
class BoundReport:
    """Numerical value of the (M) constant and its two parts.

    ``near`` is the second moment on the unit ball and ``far`` the mass
    outside it.  For zero-order kernels (M) is flagged not applicable and the
    pair is reported as is.
    """

    value: float
    near: float
    far: float
    error: float
    finite: bool
    applicable: bool = True

    @property
    def passes(self):
        return self.finite

    @property
    def pair(self):
        return (self.far, self.near)


def _check_near_convergence(ang, beta, q, weight_power=2):
    """Raise if the near-origin moment does not settle under refinement."""
    # octave contributions of r**(k - 1 - beta) are in ratio 2**-(k - beta)
    f = lambda z: _norm(z) ** weight_power
    shells = []
    for k in (q.radial_levels, q.radial_levels + 1):
        a, b = 2.0 ** (-k - 1), 2.0 ** (-k)
        shells.append(integrate(ang, beta, f, lo=a, hi=b, cfg=q).value)
    if shells[0] != 0 and abs(shells[1]) >= abs(shells[0]) * (1 - 1e-9):
        raise DivergenceError(
            f"near-origin moment does not converge (beta = {beta} >= {weight_power})")


def _base_and_jump(m, x):
    if isinstance(m, PushForward):
        if x is None:
            raise PreconditionError("push-forward integrals need the point x")
        return m.base, m.jump
    return m, None


def measure_bound(m: MeasureLike, q: QuadratureConfig = DEFAULT_QUAD, x=None) -> BoundReport:
    """Estimate ``int_B |z|^2 mu + int_{B^c} mu`` with an error bound.

    For push-forward kernels the near part is ``int_B |j(x,z)|^2`` against the
    base measure and the far part is the base mass outside ``B``.

    Raises
    ------
    DivergenceError
        If the near-origin moment does not converge (``beta >= 2``).
    """
    m = measure_at(m, x)
    base, jump = _base_and_jump(m, x)
    ang = base.angular()
    beta = base.beta
    _check_near_convergence(ang, beta, q)
    if jump is None:
        near = integrate(ang, beta, lambda z: np.sum(z * z, -1), lo=0.0, hi=1.0,
                         leading=(2, _ones), cfg=q)
    else:
        xx = np.asarray(x, float)
        near = integrate(ang, beta, lambda z: np.sum(jump(xx, z) ** 2, -1), lo=0.0, hi=1.0,
                         leading=(2, lambda d: np.sum(jump.direction(xx, d) ** 2, -1)),
                         cfg=q)
    far = integrate(ang, beta, lambda z: np.ones(z.shape[:-1]), lo=1.0, hi=np.inf,
                    tail=(1.0, 0.0), cfg=q)
    value = near.value + far.value
    finite = bool(np.isfinite(value))
    applicable = not isinstance(base, ZeroOrderDirectional)
    return BoundReport(value, near.value, far.value, near.error + far.error, finite,
                       applicable)


WEIGHTS = ("proj", "norm")


def _weight_fn(weight, p):
    if weight in ("proj", "ProjSquared"):
        return lambda v: (v @ p) ** 2
    if weight in ("norm", "NormSquared"):
        return lambda v: np.sum(v * v, -1)
    raise ValueError(f"unknown weight {weight!r}")


def _li_breakpoints(fun, n=2048):
    """Angles where ``fun`` changes sign, located by bracketing."""
    th = np.linspace(0.0, TWO_PI, n + 1)
    vals = fun(th)
    out = []
    for k in np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]:
        if vals[k] == 0:
            out.append(th[k])
        else:
            out.append(brentq(lambda t: float(fun(np.array([t]))[0]), th[k], th[k + 1],
                              xtol=1e-15))
    return tuple(out)


def cone_weighted_mass(m: MeasureLike, c: ConeSpec, weight="proj",
                       q: QuadratureConfig = DEFAULT_QUAD, x=None) -> QuadResult:
    """Integrate ``|p.z|^2`` or ``|z|^2`` over the cone set.

    For push-forward kernels the weight is applied to ``j(x, z)`` and the cone
    is the Lévy-Itô cone, both integrated against the base measure.  A zero
    result triggers an :class:`EmptyConeWarning`.
    """
    m = measure_at(m, x)
    base, jump = _base_and_jump(m, x)
    p = c.vec
    if len(p) != base.dim:
        raise PreconditionError("cone direction and measure dimension differ")
    ang = base.angular()
    w = _weight_fn(weight, p)
    pn = np.linalg.norm(p)
    if jump is None:
        res = integrate(ang, base.beta, w, lo=0.0, hi=c.radial_limit, mask=c.angular_mask,
                        extra_breaks=c.breakpoints(), leading=(2, w), cfg=q)
    else:
        xx = np.asarray(x, float)

        def jdir(d):
            return jump.direction(xx, d)

        def mask(d):
            jd = jdir(d)
            return (1 - c.eta) * _norm(jd) * pn * (1 - 1e-13) <= np.abs(jd @ p)

        def hi(d):
            proj = np.abs(jdir(d) @ p)
            return np.where(proj > 0, 1.0 / (c.gamma * np.maximum(proj, 1e-300)), np.inf)

        if jump.homogeneous:
            breaks = ()
            if base.dim == 2:
                fun = lambda th: (np.abs(jdir(unit(th)) @ p)
                                  - (1 - c.eta) * _norm(jdir(unit(th))) * pn)
                breaks = _li_breakpoints(fun)
            res = integrate(ang, base.beta, lambda z: w(jump(xx, z)), lo=0.0, hi=hi,
                            mask=mask, extra_breaks=breaks,
                            leading=(2, lambda d: w(jdir(d))), cfg=q)
        else:
            jmax = 1.0 / (c.gamma * pn * max(1 - c.eta, 1e-12))

            def f(z):
                jz = jump(xx, z)
                return w(jz) * c.contains(jz)

            res = integrate(ang, base.beta, f, lo=0.0, hi=np.inf,
                            leading=(2, lambda d: w(jdir(d)) * mask(d)),
                            tail=(0.0, jmax ** 2 * max(pn, 1.0) ** 2), cfg=q)
    if res.value == 0.0:
        warnings.warn("the measure does not charge the cone", EmptyConeWarning, stacklevel=2)
    return res


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of ``log(mass) = slope * log(gamma) + intercept``."""

    slope: float
    intercept: float
    expected: float
    gammas: np.ndarray
    masses: np.ndarray

    @property
    def constant(self):
        return float(np.exp(self.intercept))

    @property
    def deviation(self):
        return abs(self.slope - self.expected)


def mc_scaling_probe(m: MeasureLike, p, eta=DEFAULT_ETA, gammas=None,
                     q: QuadratureConfig = DEFAULT_QUAD, x=None) -> ScalingFit:
    """Fit the power of ``gamma`` in the cone ``|z|^2`` mass.

    Raises
    ------
    DegenerateFitError
        If some cone mass vanishes or the grid spans less than two decades.
    """
    if gammas is None:
        gammas = np.geomspace(10.0, 1e4, 13)
    gammas = np.asarray(gammas, float)
    if gammas.min() * 100 > gammas.max() * (1 + 1e-12):
        raise DegenerateFitError("the gamma grid must span at least two decades")
    masses = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyConeWarning)
        for g in gammas:
            masses.append(cone_weighted_mass(m, ConeSpec(p, eta, g), "norm", q, x).value)
    masses = np.asarray(masses)
    if np.any(masses <= 0):
        raise DegenerateFitError("cone mass vanishes: the support misses the cone")
    slope, intercept = np.polyfit(np.log(gammas), np.log(masses), 1)
    beta = measure_at(m, x).beta
    return ScalingFit(float(slope), float(intercept), beta - 2.0, gammas, masses)


def density_at(m: MeasureLike, z, x=None) -> float:
    """Pointwise density of the kernel at ``z != 0``.

    For axis-charging kernels this is the 1-d density along the charged lines.
    """
    m = measure_at(m, x)
    z = np.atleast_1d(np.asarray(z, float))
    if isinstance(m, PushForward):
        raise UnsupportedKindError("push-forward kernels have no pointwise density")
    if not np.any(z):
        raise UndefinedAtOriginError("the kernel density is undefined at z = 0")
    return float(m.density(z))
