"""Nonlocal operators, the Pucci operator and the catalogue nonlinearities.

The compensated operator

    I[u](x) = int (u(x+z) - u(x) - Du(x).z 1_B(z)) mu_x(dz)

is evaluated split at radius ``delta``: the inner part uses the second-order
increment and closes at the origin with the Hessian term, the outer part uses
the gradient compensation on ``delta < |z| < 1`` only (``B`` is the unit
ball) and closes at infinity with the tail model of ``u``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union

import numpy as np

from .errors import DivergenceError, PreconditionError, TailUnintegrableError
from .fields import GridField, SmoothFunction, restrict
from .measures import (MeasureLike, PushForward, ZeroOrderDirectional,
                       measure_at)
from .quadrature import AngularMeasure, QuadratureConfig, QuadResult, integrate

__all__ = [
    "NonlocalConfig", "SplitValue", "eval_compensated", "eval_levy_ito",
    "eval_zero_order", "PucciParams", "pucci_plus", "pucci_minus",
    "NonlinearitySpec", "eval_F", "ellipticity_probe", "EllipticityReport",
    "FORMS", "GridField", "directional_operator", "coef_value",
]


@dataclass(frozen=True)
class NonlocalConfig:
    """Split radius and quadrature settings for operator evaluation."""

    delta: float = 0.5
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")


@dataclass(frozen=True)
class SplitValue:
    """Inner and outer parts of a split nonlocal operator."""

    first: float
    second: float
    error: float

    @property
    def total(self):
        return self.first + self.second

    @property
    def pair(self):
        return (self.first, self.second)

    def __float__(self):
        return float(self.total)


def _as_function(u, dim) -> SmoothFunction:
    if isinstance(u, GridField):
        return u.as_function()
    if isinstance(u, SmoothFunction):
        return u
    raise TypeError("u must be a SmoothFunction or a GridField")


def _growth_tail(u, x, t, ang, beta, R, jump=None):
    """Tail model from sampled growth, raising if the tail cannot integrate.

    With ``|u(x+z) - u(x)| <= C |z|^s`` fitted on radii ``R .. 1000 R``, the
    tail integral is centred on zero (limit ``u(x)``) with half-width
    ``C R^s beta / (beta - s)``, which is what the integrator multiplies by
    the tail mass ``R^-beta / beta``.
    """
    d, w = ang.rule(16)
    d = d[w != 0]
    ux = float(u(x, t))
    radii = R * np.array([1.0, 10.0, 100.0, 1000.0])
    peaks = []
    for r in radii:
        z = r * d
        if jump is not None:
            z = jump(x, z)
        peaks.append(float(np.max(np.abs(u(x + z, t) - ux))) + 1e-300)
    peaks = np.array(peaks)
    slope = max(np.polyfit(np.log(radii), np.log(peaks), 1)[0], 0.0)
    if slope >= beta - 1e-2:
        raise TailUnintegrableError(
            f"u grows like |z|^{slope:.2f}, not integrable against a tail of order {beta}")
    c_R = float(np.max(peaks * (R / radii) ** slope))
    return ux, 2.0 * c_R * beta / (beta - slope)


def _tail_model(u, x, t, ang, beta, R, jump=None):
    if u.tail is not None:
        return u.tail(x, t, R)
    return _growth_tail(u, x, t, ang, beta, R, jump)


def _quadform(H):
    return lambda d: 0.5 * np.einsum("...i,ij,...j->...", d, H, d)


def eval_compensated(u, x, t=0.0, m: MeasureLike = None,
                     cfg: NonlocalConfig = NonlocalConfig()) -> SplitValue:
    """Compensated nonlocal operator at ``(x, t)``, split at ``cfg.delta``.

    Parameters
    ----------
    u : SmoothFunction or GridField
    x : array_like
    t : float
    m : MeasureSpec or callable x -> MeasureSpec
    cfg : NonlocalConfig

    Returns
    -------
    SplitValue
        ``first`` over ``|z| <= delta``, ``second`` over ``|z| > delta``.

    Raises
    ------
    TailUnintegrableError
        If ``u`` grows too fast for the tail of the measure.
    """
    x = np.atleast_1d(np.asarray(x, float))
    m = measure_at(m, x)
    if isinstance(m, PushForward):
        return eval_levy_ito(u, x, t, m, cfg)
    u = _as_function(u, m.dim)
    if len(x) != m.dim:
        raise PreconditionError("point and measure dimensions differ")
    ang, beta, q = m.angular(), m.beta, cfg.quad
    H = np.asarray(u.hess(x, t), float)
    comp = lambda z: u.comp(x, z, t)
    first = integrate(ang, beta, comp, lo=0.0, hi=cfg.delta, leading=(2, _quadform(H)), cfg=q)
    mid = integrate(ang, beta, comp, lo=cfg.delta, hi=1.0, cfg=q)
    limit, osc = _tail_model(u, x, t, ang, beta, q.tail_radius)
    ux = float(u(x, t))
    far = integrate(ang, beta, lambda z: u.diff(x, z, t), lo=1.0, hi=np.inf,
                    tail=(limit - ux, osc), cfg=q)
    second = mid + far
    return SplitValue(first.value, second.value, first.error + second.error)


def eval_levy_ito(u, x, t=0.0, m: PushForward = None,
                  cfg: NonlocalConfig = NonlocalConfig()) -> SplitValue:
    """Lévy-Itô operator ``int (u(x+j) - u(x) - Du.j 1_B(z)) mu(dz)``.

    The split radius and the unit ball refer to the base variable ``z``.
    """
    x = np.atleast_1d(np.asarray(x, float))
    m = measure_at(m, x)
    if not isinstance(m, PushForward):
        raise PreconditionError("eval_levy_ito needs a PushForward measure")
    base, jump = m.base, m.jump
    u = _as_function(u, base.dim)
    ang, beta, q = base.angular(), base.beta, cfg.quad
    H = np.asarray(u.hess(x, t), float)
    G = np.asarray(u.grad(x, t), float)
    ux = float(u(x, t))

    def comp(z):
        jz = jump(x, z)
        if u.increment is not None:
            return u.comp(x, jz, t)
        return u(x + jz, t) - ux - jz @ G

    def diff(z):
        return u(x + jump(x, z), t) - ux

    lead = lambda d: _quadform(H)(jump.direction(x, d))
    first = integrate(ang, beta, comp, lo=0.0, hi=cfg.delta, leading=(2, lead), cfg=q)
    mid = integrate(ang, beta, comp, lo=cfg.delta, hi=1.0, cfg=q)
    if u.tail is not None:
        d, w = ang.rule(16)
        d = d[w != 0]
        reach = float(np.min(np.linalg.norm(jump.direction(x, d), axis=-1))) if jump.homogeneous else 0.0
        limit, osc = u.tail(x, t, reach * q.tail_radius)
    else:
        limit, osc = _growth_tail(u, x, t, ang, beta, q.tail_radius, jump)
    far = integrate(ang, beta, diff, lo=1.0, hi=np.inf, tail=(limit - ux, osc), cfg=q)
    second = mid + far
    return SplitValue(first.value, second.value, first.error + second.error)


def _split_parity(ang: AngularMeasure):
    """Even and odd parts of an angular measure under w -> -w."""
    if ang.discrete:
        atoms = np.asarray(ang.atoms, float)
        w = np.asarray(ang.atom_weights, float)
        # pair each atom with its antipode (zero weight if absent)
        anti = np.array([w[np.argmin(np.linalg.norm(atoms + a, axis=1))]
                         if np.min(np.linalg.norm(atoms + a, axis=1)) < 1e-12 else 0.0
                         for a in atoms])
        return (AngularMeasure(ang.dim, atoms=atoms, atom_weights=0.5 * (w + anti)),
                AngularMeasure(ang.dim, atoms=atoms, atom_weights=0.5 * (w - anti)))
    g = ang.density
    br = tuple(ang.breakpoints) + tuple(np.mod(np.asarray(ang.breakpoints) + np.pi, 2 * np.pi))
    return (AngularMeasure(2, density=lambda d: 0.5 * (g(d) + g(-d)), breakpoints=br),
            AngularMeasure(2, density=lambda d: 0.5 * (g(d) - g(-d)), breakpoints=br))


def eval_zero_order(u, x, t=0.0, m: ZeroOrderDirectional = None,
                    cfg: NonlocalConfig = NonlocalConfig()) -> QuadResult:
    """Uncompensated operator ``int (u(x+z) - u(x)) mu(dz)`` of order one.

    The integrand is split into its even part, which is ``O(|z|^2)``, and its
    odd part, paired with the odd part of the angular density.  The region
    near the origin is closed by geometric extrapolation of octave shells.

    Raises
    ------
    DivergenceError
        If the octave contributions near the origin do not decay, as happens
        when ``u`` is not Lipschitz at ``x`` or the kernel is unbalanced.
    """
    x = np.atleast_1d(np.asarray(x, float))
    m = measure_at(m, x)
    if not isinstance(m, ZeroOrderDirectional):
        raise PreconditionError("eval_zero_order needs a ZeroOrderDirectional measure")
    u = _as_function(u, m.dim)
    q = cfg.quad
    even, odd = _split_parity(m.angular())

    def f_even(z):
        return 0.5 * (u.comp(x, z, t) + u.comp(x, -z, t))

    def f_odd(z):
        return 0.5 * (u.diff(x, z, t) - u.diff(x, -z, t))

    def piece(lo, hi, tail=None):
        a = integrate(even, 1.0, f_even, lo=lo, hi=hi, tail=tail, cfg=q)
        b = integrate(odd, 1.0, f_odd, lo=lo, hi=hi, tail=None if tail is None else (0.0, 0.0),
                      cfg=q)
        return a + b

    r_in = 2.0 ** (-16)
    body = piece(r_in, 1.0)
    limit, osc = _tail_model(u, x, t, even, 1.0, q.tail_radius)
    ux = float(u(x, t))
    far_even = integrate(even, 1.0, lambda z: u.diff(x, z, t), lo=1.0, hi=np.inf,
                         tail=(limit - ux, osc), cfg=q)
    far_odd = integrate(odd, 1.0, f_odd, lo=1.0, hi=np.inf, tail=(0.0, osc), cfg=q)
    s1 = piece(r_in / 2, r_in).value
    s2 = piece(r_in / 4, r_in / 2).value
    noise = 1e-12 * (1.0 + abs(ux)) + q.atol
    if abs(s1) <= noise and abs(s2) <= noise:
        rem, rem_err = s1 + s2, abs(s1) + abs(s2)
    else:
        ratio = s2 / s1 if s1 != 0 else np.inf
        if not abs(ratio) < 1 - 1e-3:
            raise DivergenceError("zero-order operator does not converge near the origin")
        tail_geo = s2 * ratio / (1 - ratio)
        rem, rem_err = s1 + s2 + tail_geo, abs(tail_geo) * 1e-2 + abs(s2 * ratio ** 2)
    total = body + far_even + far_odd
    return QuadResult(total.value + rem, total.error + rem_err)


@dataclass(frozen=True)
class PucciParams:
    """Ellipticity constants ``0 <= lam < Lam`` of the Pucci operator."""

    lam: float = 1.0
    Lam: float = 2.0

    def __post_init__(self):
        if not 0 <= self.lam < self.Lam:
            raise ValueError("need 0 <= lambda < Lambda")


def _eig(X):
    X = np.asarray(X, float)
    return np.linalg.eigvalsh(0.5 * (X + X.T))


def pucci_plus(X, p: PucciParams) -> float:
    """``Lam * (sum of positive eigenvalues) + lam * (sum of negative ones)``."""
    ev = _eig(X)
    return float(p.Lam * ev[ev > 0].sum() + p.lam * ev[ev < 0].sum())


def pucci_minus(X, p: PucciParams) -> float:
    ev = _eig(X)
    return float(p.lam * ev[ev > 0].sum() + p.Lam * ev[ev < 0].sum())


FORMS = ("pure_nonlocal", "growing_interface", "gradient_power", "quasilinear",
         "mixed_local_nonlocal", "mixed_weighted", "dislocation", "linearized_comparison")

Coef = Union[float, Callable]


def coef_value(c, x, t):
    """Evaluate a constant or a callable coefficient ``c(x, t)``."""
    if callable(c):
        return c(np.asarray(x, float), t)
    return c


@dataclass(frozen=True)
class NonlinearitySpec:
    """One of the catalogue nonlinearities ``F(x, t, p, X, l)``.

    Parameters
    ----------
    form : str
        One of :data:`FORMS`.
    dim : int
        Space dimension ``N``.
    b, m : coefficient and power of ``b |p|^m`` (gradient_power).
    A : matrix or callable ``A(x, t)`` (quasilinear), identity by default.
    a, c : coefficients.  ``a`` weighs the nonlocal term of mixed_weighted;
        ``c`` is the speed of dislocation, the local weight of mixed_weighted
        and the constant of linearized_comparison.
    nonlocal_axes : axes carrying the nonlocal term of mixed forms; the
        remaining axes carry the Laplacian (or the second nonlocal term).
    second_nonlocal : mixed_weighted with ``c I_{x2}`` instead of ``c Lap_{x2}``;
        then ``l`` is the pair ``(l1, l2)``.
    pucci : PucciParams of linearized_comparison.
    """

    form: str
    dim: int = 1
    b: Coef = 1.0
    m: float = 2.0
    A: Any = None
    a: Coef = 1.0
    c: Coef = 1.0
    nonlocal_axes: Optional[tuple] = None
    second_nonlocal: bool = False
    pucci: Optional[PucciParams] = None

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown form {self.form!r}; expected one of {FORMS}")
        if self.form == "linearized_comparison" and self.pucci is None:
            object.__setattr__(self, "pucci", PucciParams())
        if self.form.startswith("mixed"):
            axes = self.nonlocal_axes
            if axes is None:
                axes = (0,)
            axes = tuple(int(a) for a in axes)
            if not axes or not all(0 <= a < self.dim for a in axes) or len(axes) >= self.dim:
                raise ValueError("mixed forms need a proper nonempty set of nonlocal axes")
            object.__setattr__(self, "nonlocal_axes", axes)

    @property
    def local_axes(self):
        if self.nonlocal_axes is None:
            return ()
        return tuple(i for i in range(self.dim) if i not in self.nonlocal_axes)

    @property
    def cone_axes(self):
        """Axes whose gradient components enter the cone of condition (N)."""
        if self.nonlocal_axes is None:
            return tuple(range(self.dim))
        return self.nonlocal_axes

    def matrix(self, x, t):
        if self.A is None:
            return np.eye(self.dim)
        A = self.A(np.asarray(x, float), t) if callable(self.A) else self.A
        return np.atleast_2d(np.asarray(A, float))

    @property
    def homogeneous(self):
        """Whether F is positively 1-homogeneous in (p, X, l)."""
        return self.form in ("pure_nonlocal", "quasilinear", "mixed_local_nonlocal",
                             "mixed_weighted", "linearized_comparison") or (
            self.form == "gradient_power" and self.m == 1)

    def __call__(self, x, t, p, X, l):
        return eval_F(self, x, t, p, X, l)


def eval_F(f: NonlinearitySpec, x, t, p, X, l) -> float:
    """Value of the nonlinearity at ``(x, t, p, X, l)``."""
    p = np.atleast_1d(np.asarray(p, float))
    X = np.atleast_2d(np.asarray(X, float))
    form = f.form
    if form == "pure_nonlocal":
        return float(-l)
    if form == "growing_interface":
        return float(0.5 * p @ p - l)
    if form == "gradient_power":
        return float(coef_value(f.b, x, t) * np.linalg.norm(p) ** f.m - l)
    if form == "quasilinear":
        return float(-np.trace(f.matrix(x, t) @ X) - l)
    if form == "mixed_local_nonlocal":
        loc = list(f.local_axes)
        return float(-l - np.trace(X[np.ix_(loc, loc)]))
    if form == "mixed_weighted":
        a, c = coef_value(f.a, x, t), coef_value(f.c, x, t)
        if f.second_nonlocal:
            l1, l2 = l
            return float(-a * l1 - c * l2)
        loc = list(f.local_axes)
        return float(-a * l - c * np.trace(X[np.ix_(loc, loc)]))
    if form == "dislocation":
        return float(-(coef_value(f.c, x, t) + l) * np.linalg.norm(p))
    if form == "linearized_comparison":
        c = coef_value(f.c, x, t)
        return float(-c * np.linalg.norm(p) - pucci_plus(X, f.pucci) - c * l)
    raise ValueError(form)


@dataclass
class EllipticityReport:
    """Violations found by :func:`ellipticity_probe`."""

    violations: list
    e_prime_violations: list
    e_prime_satisfied: bool
    samples: int

    @property
    def elliptic(self):
        return not self.violations


def _random_sym(rng, n, scale=1.0):
    M = rng.normal(scale=scale, size=(n, n))
    return 0.5 * (M + M.T)


def ellipticity_probe(f: NonlinearitySpec, samples=200, seed=0, tol=1e-12,
                      l_grid=None) -> EllipticityReport:
    """Spot-check degenerate ellipticity (E) and condition (E').

    Random ordered pairs ``X >= Y`` (``X = Y + PSD``) and ``l1 >= l2`` must
    give ``F(X, l1) <= F(Y, l2)``.  (E') asks that ``F(x, t, 0, O, l) <= 0``
    forces ``l >= 0``; it is checked over ``l_grid``.
    """
    rng = np.random.default_rng(seed)
    n = f.dim
    bad = []
    two = f.form == "mixed_weighted" and f.second_nonlocal
    for k in range(samples):
        x = rng.uniform(-1, 1, n)
        t = rng.uniform(0, 1)
        p = rng.normal(size=n)
        Y = _random_sym(rng, n)
        B = rng.normal(size=(n, n))
        X = Y + B @ B.T
        if two:
            l2 = rng.normal(size=2)
            l1 = l2 + np.abs(rng.normal(size=2))
        else:
            l2 = rng.normal()
            l1 = l2 + abs(rng.normal())
        fx, fy = eval_F(f, x, t, p, X, l1), eval_F(f, x, t, p, Y, l2)
        if fx > fy + tol * (1 + abs(fy)):
            bad.append(dict(sample=k, excess=fx - fy))
    if l_grid is None:
        l_grid = np.linspace(-10, 10, 201)
    eprime = []
    zero_p, zero_X = np.zeros(n), np.zeros((n, n))
    x0 = np.zeros(n)
    for l in l_grid:
        arg = (l, l) if two else l
        if eval_F(f, x0, 0.0, zero_p, zero_X, arg) <= 0 and l < 0:
            eprime.append(float(l))
    return EllipticityReport(bad, eprime, not eprime, samples)


def directional_operator(u, x, t, m: MeasureLike, axes, cfg=NonlocalConfig()) -> SplitValue:
    """Nonlocal operator acting on the coordinates ``axes`` only, others frozen."""
    x = np.atleast_1d(np.asarray(x, float))
    ur = restrict(_as_function(u, len(x)), x, axes)
    return eval_compensated(ur, x[list(axes)], t, m, cfg)
