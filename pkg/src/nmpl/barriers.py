"""Auxiliary barrier functions and numerical checks of the nonlocal estimates.

The horizontal barrier is ``v = exp(-gamma R^2) - exp(-gamma d)`` with
``d = |x - xbar|^2 + lam (t - t0)^2``; the vertical one is ``v = 1 - exp(-h)``
with ``h = |x - x0|^2 / 2 + lam (t - t0)``.  Both have the form
``const - exp(-k |y - c|^2 - time part)``, so nonlocal terms are evaluated on
the rescaled profile ``-exp(-k (|y - c|^2 - |x - c|^2))``, which equals
``(v - const) / exp(-k d(x))`` and keeps every quantity of order one whatever
the steepness.  Margins are reported in these normalized units together with
the scale factor that converts them back.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import EmptyConeWarning, PreconditionError, TailUnintegrableError
from .fields import SmoothFunction, expm1_minus_id
from .measures import (ConeSpec, MeasureLike, PushForward,
                       cone_weighted_mass, measure_at, measure_bound)
from .operators import (NonlinearitySpec, NonlocalConfig, eval_compensated, eval_F,
                        eval_levy_ito, eval_zero_order, directional_operator)
from .quadrature import integrate


def gamma0(R, eta):
    """Steepness threshold ``4 / (R^2 (1 - eta)^2)``."""
    return 4.0 / (R ** 2 * (1.0 - eta) ** 2)


def delta_bar(R, eta):
    """Containment level ``2 + 2 / ((1 - eta) R)`` of the cone set."""
    return 2.0 + 2.0 / ((1.0 - eta) * R)


def default_c(R, eta):
    """Constant ``exp(-delta_bar) / 2`` of the quadratic gain."""
    return 0.5 * np.exp(-delta_bar(R, eta))


@dataclass(frozen=True)
class HorizontalBarrier:
    """``v(x,t) = exp(-gamma R^2) - exp(-gamma (|x-xbar|^2 + lam (t-t0)^2))``."""

    xbar: tuple
    t0: float = 0.0
    R: float = 1.0
    lam: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "xbar", tuple(np.atleast_1d(np.asarray(self.xbar, float)).tolist()))
        if not (self.R > 0 and self.lam > 0 and self.gamma > 0):
            raise ValueError("R, lam and gamma must be positive")

    @property
    def center(self):
        return np.asarray(self.xbar, float)

    @property
    def dim(self):
        return len(self.xbar)

    def d(self, x, t):
        x = np.asarray(x, float)
        return np.sum((x - self.center) ** 2, -1) + self.lam * (t - self.t0) ** 2

    def value(self, x, t):
        return np.exp(-self.gamma * self.R ** 2) - np.exp(-self.gamma * self.d(x, t))

    def scale(self, x, t):
        """Common factor ``2 gamma exp(-gamma d)`` of the derivatives."""
        return 2.0 * self.gamma * np.exp(-self.gamma * self.d(x, t))

    def in_region(self, x, t):
        """Membership in ``D_R``: inside the ellipsoid, ``|x - xbar| > R/2``."""
        x = np.asarray(x, float)
        return (self.d(x, t) < self.R ** 2) & (np.linalg.norm(x - self.center, axis=-1) > self.R / 2)

    def profile(self, x) -> SmoothFunction:
        return _gaussian_profile(self.center, self.gamma, x)


@dataclass(frozen=True)
class VerticalBarrier:
    """``v(x,t) = 1 - exp(-h)``, ``h = |x - x0|^2 / 2 + lam (t - t0)``."""

    x0: tuple
    t0: float = 0.0
    lam: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(np.atleast_1d(np.asarray(self.x0, float)).tolist()))
        if not self.lam > 0:
            raise ValueError("lam must be positive")

    @property
    def center(self):
        return np.asarray(self.x0, float)

    @property
    def dim(self):
        return len(self.x0)

    def h(self, x, t):
        x = np.asarray(x, float)
        return 0.5 * np.sum((x - self.center) ** 2, -1) + self.lam * (t - self.t0)

    def value(self, x, t):
        return 1.0 - np.exp(-self.h(x, t))

    def scale(self, x, t):
        return np.exp(-self.h(x, t))

    def in_region(self, x, t, r=0.5):
        """Membership in ``B((x0, t0), r) ∩ {v < 0}``."""
        x = np.asarray(x, float)
        dist2 = np.sum((x - self.center) ** 2, -1) + (t - self.t0) ** 2
        return (dist2 < r ** 2) & (self.value(x, t) < 0)

    def profile(self, x) -> SmoothFunction:
        return _gaussian_profile(self.center, 0.5, x)


def _gaussian_profile(center, k, x) -> SmoothFunction:
    """``y -> -exp(-k (|y-c|^2 - |x-c|^2))``: a barrier divided by its size at x."""
    c = np.asarray(center, float)
    x = np.asarray(x, float)
    a0 = x - c
    r0 = float(a0 @ a0)
    dim = len(c)

    def value(y, t):
        return -np.exp(-k * (np.sum((y - c) ** 2, -1) - r0))

    def grad(y, t):
        return 2 * k * np.exp(-k * (np.sum((y - c) ** 2, -1) - r0)) * (y - c)

    def hess(y, t):
        a = np.asarray(y, float) - c
        e = np.exp(-k * (a @ a - r0))
        return 2 * k * e * (np.eye(dim) - 2 * k * np.outer(a, a))

    def increment(y, z, t):
        # at y: u(y+z) - u(y) - Du.z = -e(y) [expm1(q) - q_lin], q = -k (2 a.z + |z|^2)
        a = np.asarray(y, float) - c
        e = np.exp(-k * (a @ a - r0))
        q = -k * (2 * (z @ a) + np.sum(z * z, -1))
        return -e * (expm1_minus_id(q) - k * np.sum(z * z, -1))

    def tail(y, t, R):
        a = np.asarray(y, float) - c
        far = max(R - np.linalg.norm(a), 0.0)
        return 0.0, float(np.exp(-k * (far ** 2 - r0)))

    return SmoothFunction(value, grad, hess, dim, increment, tail)


def horizontal_barrier_eval(b: HorizontalBarrier, x, t):
    """Closed-form ``(v, v_t, Dv, D^2 v)``."""
    x = np.atleast_1d(np.asarray(x, float))
    a = x - b.center
    e = np.exp(-b.gamma * b.d(x, t))
    v = np.exp(-b.gamma * b.R ** 2) - e
    vt = 2 * b.gamma * e * b.lam * (t - b.t0)
    Dv = 2 * b.gamma * e * a
    D2v = 2 * b.gamma * e * (np.eye(len(a)) - 2 * b.gamma * np.outer(a, a))
    return float(v), float(vt), Dv, D2v


def vertical_barrier_eval(b: VerticalBarrier, x, t):
    """Closed-form ``(v, v_t, Dv, D^2 v)``."""
    x = np.atleast_1d(np.asarray(x, float))
    a = x - b.center
    e = np.exp(-b.h(x, t))
    return float(1 - e), float(b.lam * e), e * a, e * (np.eye(len(a)) - np.outer(a, a))


def barrier_eval(b, x, t):
    if isinstance(b, HorizontalBarrier):
        return horizontal_barrier_eval(b, x, t)
    return vertical_barrier_eval(b, x, t)


def sample_region(b, n, seed=0, r=0.5):
    """Uniform samples ``(x, t)`` of ``D_R`` (horizontal) or the vertical set."""
    rng = np.random.default_rng(seed)
    c = b.center
    out_x, out_t = [], []
    while len(out_x) < n:
        if isinstance(b, HorizontalBarrier):
            x = c + rng.uniform(-b.R, b.R, size=(4 * n, b.dim))
            t = b.t0 + rng.uniform(-b.R, b.R, size=4 * n) / np.sqrt(b.lam)
            ok = b.in_region(x, t)
        else:
            x = c + rng.uniform(-r, r, size=(4 * n, b.dim))
            t = b.t0 + rng.uniform(-r, r, size=4 * n)
            ok = b.in_region(x, t, r)
        out_x.extend(x[ok])
        out_t.extend(t[ok])
    return np.asarray(out_x[:n]), np.asarray(out_t[:n])


def _points(b, samples, seed):
    if isinstance(samples, (int, np.integer)):
        return sample_region(b, int(samples), seed)
    xs, ts = samples
    xs = np.atleast_2d(np.asarray(xs, float))
    if xs.shape[1] != b.dim and xs.shape[0] == b.dim:
        xs = xs.T
    ts = np.broadcast_to(np.asarray(ts, float), (len(xs),))
    return xs, ts


def _check_horizontal(b, eta, c):
    if not isinstance(b, HorizontalBarrier):
        raise PreconditionError("a horizontal barrier is required")
    g0 = gamma0(b.R, eta)
    if b.gamma < g0 * (1 - 1e-12):
        raise PreconditionError(f"gamma = {b.gamma} is below the threshold gamma0 = {g0}")
    cmax = default_c(b.R, eta)
    if c is None:
        c = cmax
    if not 0 < c <= cmax * (1 + 1e-12):
        raise PreconditionError(f"c must lie in (0, {cmax}]")
    return c


@dataclass
class EstimateReport:
    """Per-sample data of a verified estimate, in normalized units.

    ``lhs``, ``rhs`` and ``margin = rhs - lhs`` are divided by ``scale``;
    ``tol`` is the certified quadrature error of each margin.
    """

    x: np.ndarray
    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    tol: np.ndarray
    scale: np.ndarray
    names: tuple = ("lhs", "rhs")

    @property
    def margin(self):
        return self.rhs - self.lhs

    @property
    def worst(self):
        return float(np.min(self.margin))

    @property
    def worst_excess(self):
        """Smallest ``margin + tol``; nonnegative means verified."""
        return float(np.min(self.margin + self.tol))

    @property
    def ok(self):
        return self.worst_excess >= 0

    def rows(self):
        """Rows ``x..., t, lhs, rhs, margin, scale``."""
        for i in range(len(self.t)):
            yield [*self.x[i], self.t[i], self.lhs[i], self.rhs[i],
                   self.rhs[i] - self.lhs[i], self.scale[i]]


def _require_finite(x, *vals):
    if not all(np.isfinite(v) for v in vals):
        raise FloatingPointError(f"nonlocal term of the barrier overflows at x = {x}; "
                                 "reduce gamma R^2")


def verify_nl_estimate(b: HorizontalBarrier, m: MeasureLike, eta=0.5, c=None, samples=1000,
                       seed=0, cfg: NonlocalConfig = NonlocalConfig()) -> EstimateReport:
    """Check ``I[v] <= 2 gamma e^{-gamma d} (C_mu - c gamma int_C |(x-xbar).z|^2)``.

    Both sides are divided by ``2 gamma e^{-gamma d}``.  ``C_mu`` comes from
    :func:`measure_bound` at each point.

    Raises
    ------
    PreconditionError
        If ``gamma < gamma0``, ``c > exp(-delta_bar)/2`` or a sample lies
        outside ``D_R``.
    """
    c = _check_horizontal(b, eta, c)
    xs, ts = _points(b, samples, seed)
    if not np.all(b.in_region(xs, ts)):
        raise PreconditionError("sample outside D_R")
    g = b.gamma
    lhs, rhs, tol = [], [], []
    bounds = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyConeWarning)
        for x, t in zip(xs, ts):
            mx = measure_at(m, x)
            key = id(mx) if not isinstance(m, type(mx)) else mx
            if key not in bounds:
                bounds[key] = measure_bound(mx, cfg.quad, x)
            bd = bounds[key]
            a = x - b.center
            with np.errstate(over="ignore", invalid="ignore"):
                I = eval_compensated(b.profile(x), x, t, mx, cfg)
            _require_finite(x, I.total, I.error)
            cone = cone_weighted_mass(mx, ConeSpec(a, eta, g), "proj", cfg.quad, x)
            lhs.append(I.total / (2 * g))
            rhs.append(bd.value - c * g * cone.value)
            tol.append(I.error / (2 * g) + c * g * cone.error + bd.error)
    return EstimateReport(xs, ts, np.array(lhs), np.array(rhs), np.array(tol),
                          b.scale(xs, ts))


@dataclass
class ComponentReport:
    """Three per-sample estimates, normalized by ``e^{-gamma d}``."""

    T1: EstimateReport
    T2: EstimateReport
    T3: EstimateReport

    @property
    def ok(self):
        return self.T1.ok and self.T2.ok and self.T3.ok

    @property
    def worst(self):
        return (self.T1.worst, self.T2.worst, self.T3.worst)


def _components(u, x, t, m, cone: ConeSpec, q):
    """``T1`` on ``|z| >= 1``, ``T2`` on ``B \\ C``, ``T3`` on ``C``."""
    base = m
    ang, beta = base.angular(), base.beta
    H = np.asarray(u.hess(x, t), float)
    lead = (2, lambda d: 0.5 * np.einsum("...i,ij,...j->...", d, H, d))
    comp = lambda z: u.comp(x, z, t)
    limit, osc = u.tail(x, t, q.tail_radius)
    ux = float(u(x, t))
    T1 = integrate(ang, beta, lambda z: u.diff(x, z, t), lo=1.0, hi=np.inf,
                   tail=(limit - ux, osc), cfg=q)
    hi_c = lambda d: np.minimum(cone.radial_limit(d), 1.0)
    brk = cone.breakpoints()
    outside = lambda d: ~cone.angular_mask(d)
    T2 = (integrate(ang, beta, comp, lo=0.0, hi=1.0, mask=outside, extra_breaks=brk,
                    leading=lead, cfg=q)
          + integrate(ang, beta, comp, lo=hi_c, hi=1.0, mask=cone.angular_mask,
                      extra_breaks=brk, cfg=q))
    T3 = integrate(ang, beta, comp, lo=0.0, hi=hi_c, mask=cone.angular_mask, extra_breaks=brk,
                   leading=lead, cfg=q)
    return T1, T2, T3


def verify_component_lemmas(b: HorizontalBarrier, m: MeasureLike, eta=0.5, c=None,
                            samples=1000, seed=0, cfg: NonlocalConfig = NonlocalConfig(),
                            profile=None) -> ComponentReport:
    """Check the three bounds on the pieces of ``I[v]``, divided by ``e^{-gamma d}``.

    ``T1 <= int_{|z|>=1} mu``, ``T2 <= gamma int_B |z|^2 mu`` and
    ``T3 <= gamma int_B |z|^2 mu - 2 c gamma^2 int_C |(x-xbar).z|^2 mu``.
    ``profile(x)`` replaces the rescaled barrier when given.
    """
    profile = b.profile if profile is None else profile
    c = _check_horizontal(b, eta, c)
    xs, ts = _points(b, samples, seed)
    if not np.all(b.in_region(xs, ts)):
        raise PreconditionError("sample outside D_R")
    g = b.gamma
    rows = {k: ([], [], []) for k in ("T1", "T2", "T3")}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyConeWarning)
        for x, t in zip(xs, ts):
            mx = measure_at(m, x)
            if isinstance(mx, PushForward):
                raise PreconditionError("component lemmas are stated for kernels in z")
            bd = measure_bound(mx, cfg.quad, x)
            a = x - b.center
            cs = ConeSpec(a, eta, g)
            cone = cone_weighted_mass(mx, cs, "proj", cfg.quad, x)
            with np.errstate(over="ignore", invalid="ignore"):
                T1, T2, T3 = _components(profile(x), x, t, mx, cs, cfg.quad)
            _require_finite(x, T1.value, T1.error, T2.value, T2.error, T3.value, T3.error)
            for key, T, bound, berr in (
                    ("T1", T1, bd.far, 0.0),
                    ("T2", T2, g * bd.near, g * bd.error),
                    ("T3", T3, g * bd.near - 2 * c * g ** 2 * cone.value,
                     g * bd.error + 2 * c * g ** 2 * cone.error)):
                rows[key][0].append(T.value)
                rows[key][1].append(bound)
                rows[key][2].append(T.error + berr)
    scale = np.exp(-g * b.d(xs, ts))
    reps = [EstimateReport(xs, ts, np.array(r[0]), np.array(r[1]), np.array(r[2]), scale)
            for r in rows.values()]
    return ComponentReport(*reps)


def cone_inequalities(R=1.0, eta=0.5, gamma=None, dim=2, n=2000, seed=0):
    """Worst margins of the two pointwise facts used on the cone set.

    With ``a = x - xbar`` sampled in ``R/2 < |a| < R`` and ``z`` in
    ``C_{eta,gamma}(a)``, returns the minima of
    ``|2 a.z + |z|^2| - |a.z|`` and ``delta_bar - gamma (2 a.z + |z|^2)``.
    """
    gamma = gamma0(R, eta) if gamma is None else gamma
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, dim))
    a *= (rng.uniform(R / 2, R, n) / np.linalg.norm(a, axis=1))[:, None]
    ah = a / np.linalg.norm(a, axis=1)[:, None]
    # directions w with |w.ah| >= 1 - eta, radii up to 1/gamma
    w = rng.normal(size=(n, dim))
    w /= np.linalg.norm(w, axis=1)[:, None]
    cosang = np.einsum("ij,ij->i", w, ah)
    if dim == 1:
        w = np.sign(rng.uniform(-1, 1, (n, 1)))
    else:
        target = rng.uniform(1 - eta, 1, n) * np.sign(rng.uniform(-1, 1, n))
        perp = w - cosang[:, None] * ah
        pn = np.linalg.norm(perp, axis=1)
        perp = np.where(pn[:, None] > 0, perp / np.maximum(pn, 1e-300)[:, None], 0.0)
        w = target[:, None] * ah + np.sqrt(1 - target ** 2)[:, None] * perp
    z = w * rng.uniform(0, 1 / gamma, n)[:, None]
    az = np.einsum("ij,ij->i", a, z)
    s = 2 * az + np.sum(z * z, 1)
    return float(np.min(np.abs(s) - np.abs(az))), float(np.min(delta_bar(R, eta) - gamma * s))


def verify_exp_inequality_scalar(delta, n=10_000, y_max=None):
    """Check ``e^y - 1 >= y + exp(-delta)/2 y^2`` on a grid of ``y >= -delta``.

    Returns ``(ok, worst margin, grid)``.
    """
    c = 0.5 * np.exp(-delta)
    y_max = delta + 10.0 if y_max is None else y_max
    y = np.linspace(-delta, y_max, n)
    margin = expm1_minus_id(y) - c * y * y
    return bool(margin.min() >= -1e-12), float(margin.min()), y


@dataclass
class ExpInequalityReport:
    scalar_ok: bool
    scalar_margin: float
    functional: EstimateReport

    @property
    def ok(self):
        return self.scalar_ok and self.functional.ok


def verify_exp_inequality(phi: SmoothFunction, m: MeasureLike, delta=0.0, xs=None, domain=None,
                          t=0.0, cfg: NonlocalConfig = NonlocalConfig(),
                          n_scalar=10_000) -> ExpInequalityReport:
    """Check ``I_D[e^phi] >= e^phi (I_D[phi] + c int_D (phi(x+z) - phi(x))^2)``.

    Every integral runs over ``D = {phi(x+z) - phi(x) >= -delta}``, further
    intersected with ``domain(z)`` when given, and ``c = exp(-delta)/2``.
    Values are divided by ``e^{phi(x)}``: the left side is
    ``int_D (e^y - 1 - Dphi.z 1_B) mu`` with ``y = phi(x+z) - phi(x)``.
    """
    ok_s, worst_s, _ = verify_exp_inequality_scalar(delta, n_scalar)
    c = 0.5 * np.exp(-delta)
    if xs is None:
        xs = np.linspace(-1.0, 1.0, 100)
    xs = np.asarray(xs, float)
    if xs.ndim == 1:
        xs = xs[:, None]
    q = cfg.quad
    lhs, rhs, tol = [], [], []
    for x in xs:
        mx = measure_at(m, x)
        jump = mx.jump if isinstance(mx, PushForward) else None
        base = mx.base if jump is not None else mx
        ang, beta = base.angular(), base.beta
        G = np.asarray(phi.grad(x, t), float)
        H = np.asarray(phi.hess(x, t), float)
        mv = (lambda z: jump(x, z)) if jump is not None else (lambda z: z)

        if phi.tail is None and domain is None:
            _check_bounded_D(phi, x, t, delta, mv, q.tail_radius)

        def inD(z, zz):
            ok = phi.diff(x, zz, t) >= -delta
            if domain is not None:
                ok = ok & domain(z)
            return ok

        def y_of(z):
            return phi.diff(x, mv(z), t)

        def e_side(z, ball):
            zz = mv(z)
            y = phi.diff(x, zz, t)
            with np.errstate(over="ignore", invalid="ignore"):
                # values outside D may overflow; they are masked out
                val = expm1_minus_id(y) + phi.comp(x, zz, t) if ball else np.expm1(y)
            return np.where(inD(z, zz), val, 0.0)

        def phi_side(z, ball):
            zz = mv(z)
            y = phi.diff(x, zz, t)
            val = (phi.comp(x, zz, t) if ball else y) + c * y * y
            return np.where(inD(z, zz), val, 0.0)

        def lead(extra):
            def coef(d):
                jd = d if jump is None else jump.direction(x, d)
                r = 2.0 ** (-q.radial_levels) * 1e-3
                keep = inD(r * d, r * jd)
                quad = 0.5 * np.einsum("...i,ij,...j->...", jd, H, jd)
                return keep * (quad + extra * (jd @ G) ** 2)
            return coef

        breaks = (lambda w: _d_edges(y_of, w, delta, q)) if ang.discrete else None
        L = _split_integral(ang, beta, e_side, lead(0.5),
                            _exp_tail_bound(phi, x, t, delta), q, breaks)
        Rr = _split_integral(ang, beta, phi_side, lead(c),
                             _phi_tail_bound(phi, x, t, delta, c), q, breaks)
        lhs.append(L.value)
        rhs.append(Rr.value)
        tol.append(L.error + Rr.error)
    # the inequality reads lhs >= rhs; store it as "rhs - lhs <= 0" flipped
    lhs, rhs = np.array(lhs), np.array(rhs)
    rep = EstimateReport(xs, np.full(len(xs), t), rhs, lhs, np.array(tol),
                         np.exp(np.asarray(phi(xs, t), float)))
    return ExpInequalityReport(ok_s, worst_s, rep)


def _d_edges(y_of, w, delta, q, n=4000):
    """Radii along the atom ``w`` where ``y(r w) + delta`` changes sign."""
    r = np.geomspace(2.0 ** (-q.radial_levels), q.tail_radius, n)
    g = np.asarray(y_of(r[:, None] * w), float) + delta
    flips = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
    fn = lambda rr: float(np.asarray(y_of(rr * w[None, :]), float)[0]) + delta
    return [brentq(fn, r[i], r[i + 1], xtol=1e-15, rtol=1e-15) for i in flips]


def _split_integral(ang, beta, side, lead, tail_bd, q, breaks=None):
    """``int side(z, |z| < 1) mu(dz)`` with cells cut where ``D`` ends.

    The indicator of ``D`` is invisible to the cubature nodes when a jump
    falls between a cell edge and its first node, so on atomic angular
    measures the radial cells are aligned with the edges of ``D``.
    """
    return (integrate(ang, beta, lambda z: side(z, True), lo=0.0, hi=1.0,
                      leading=(2, lead), radial_breaks=breaks, cfg=q)
            + integrate(ang, beta, lambda z: side(z, False), lo=1.0, hi=np.inf,
                        tail=(0.0, tail_bd), radial_breaks=breaks, cfg=q))


def _check_bounded_D(phi, x, t, delta, mv, radius):
    # without a tail model the far part of D must be empty
    dim = len(x)
    if dim == 1:
        w = np.array([[1.0], [-1.0]])
    else:
        w = np.random.default_rng(0).normal(size=(256, dim))
        w /= np.linalg.norm(w, axis=1)[:, None]
    far = np.concatenate([phi.diff(x, mv(r * w), t) for r in (radius, 10 * radius)])
    if np.any(far >= -delta):
        raise TailUnintegrableError("the set {phi(x+z) - phi(x) >= -delta} is unbounded and phi "
                                    "has no tail model; pass a bounded domain")


def _exp_tail_bound(phi, x, t, delta):
    if phi.tail is None:
        return 0.0
    lim, osc = phi.tail(x, t, 0.0)
    span = abs(lim - float(phi(x, t))) + osc
    return float(np.expm1(span)) + 1.0


def _phi_tail_bound(phi, x, t, delta, c):
    if phi.tail is None:
        return 0.0
    lim, osc = phi.tail(x, t, 0.0)
    span = abs(lim - float(phi(x, t))) + osc
    return span + c * span ** 2


def nonlocal_term(f: NonlinearitySpec, u, x, t, m, cfg=NonlocalConfig()):
    """Nonlocal argument of ``F`` for the form ``f``: value and error.

    ``m`` is a single measure, or for mixed_weighted with a second nonlocal
    term the pair ``(m1, m2)``.
    """
    x = np.atleast_1d(np.asarray(x, float))
    if f.form == "dislocation":
        r = eval_zero_order(u, x, t, m, cfg)
        return r.value, r.error
    if f.form.startswith("mixed"):
        if f.form == "mixed_weighted" and f.second_nonlocal:
            m1, m2 = m
            a = directional_operator(u, x, t, m1, f.nonlocal_axes, cfg)
            b = directional_operator(u, x, t, m2, f.local_axes, cfg)
            return (a.total, b.total), a.error + b.error
        r = directional_operator(u, x, t, m, f.nonlocal_axes, cfg)
        return r.total, r.error
    mx = measure_at(m, x)
    if isinstance(mx, PushForward):
        r = eval_levy_ito(u, x, t, mx, cfg)
    else:
        r = eval_compensated(u, x, t, mx, cfg)
    return r.total, r.error


@dataclass
class SupersolutionReport:
    """``eps v_t + F(x, t, eps Dv, eps D2v, eps I[v])`` at the samples.

    ``raw`` is the value itself; ``normalized`` divides by ``eps * scale``
    where ``scale`` is the common size of the barrier derivatives.
    """

    x: np.ndarray
    t: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray
    error: np.ndarray

    @property
    def margin(self):
        return float(np.min(self.normalized))

    @property
    def raw_margin(self):
        return float(np.min(self.raw))


def strict_supersolution_margin(f: NonlinearitySpec, b, eps=1.0, samples=100, m=None, seed=0,
                                cfg: NonlocalConfig = NonlocalConfig()) -> SupersolutionReport:
    """Evaluate the barrier in the equation over its region.

    Horizontal barriers are sampled in ``D_R``, vertical ones in
    ``B((x0, t0), 1/2) ∩ {v < 0}``.  A positive minimum certifies that
    ``eps v`` is a strict supersolution at the samples.
    """
    xs, ts = _points(b, samples, seed)
    raw, norm, err = [], [], []
    for x, t in zip(xs, ts):
        v, vt, Dv, D2v = barrier_eval(b, x, t)
        s = b.scale(x, t)
        if not s > 0:
            raise FloatingPointError(f"barrier scale underflows at x = {x}; reduce gamma R^2")
        size = np.exp(-b.gamma * b.d(x, t)) if isinstance(b, HorizontalBarrier) else b.scale(x, t)
        with np.errstate(over="ignore", invalid="ignore"):
            l_n, e_n = nonlocal_term(f, b.profile(x), x, t, m, cfg)
        # the rescaled profile reaches exp(gamma |x - xbar|^2) near the centre
        _require_finite(x, *np.ravel(l_n))
        l = tuple(size * np.asarray(l_n)) if isinstance(l_n, tuple) else size * l_n
        larg = tuple(eps * np.asarray(l)) if isinstance(l, tuple) else eps * l
        val = eps * vt + eval_F(f, x, t, eps * Dv, eps * D2v, larg)
        raw.append(val)
        norm.append(val / (eps * s))
        err.append(eps * size * e_n / (eps * s))
    return SupersolutionReport(xs, ts, np.array(raw), np.array(norm), np.array(err))
