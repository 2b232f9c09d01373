"""Empirical checks of propagation of maxima, nondegeneracy and scaling."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import EmptyConeWarning
from .measures import ConeSpec, MeasureLike, cone_weighted_mass, measure_at, measure_bound
from .operators import NonlinearitySpec, eval_F
from .quadrature import QuadratureConfig
from .scheme import Trajectory


@dataclass
class PropagationReport:
    """Per stored state: the maximum, the cells within ``tol`` of it and two flags.

    ``horizontal[n]`` holds when every cell of the connected component (of
    the domain mask, intersected with ``region`` if given) containing an
    argmax is within ``tol`` of the maximum.  ``vertical[n]`` holds when
    every earlier state reaches the running maximum up to ``tol``.
    """

    times: np.ndarray
    maxima: np.ndarray
    attaining: list
    horizontal: np.ndarray
    vertical: np.ndarray
    tol: float


def propagation_test(traj, tol=None, omega=None, region=None) -> PropagationReport:
    """Horizontal and vertical propagation flags of a trajectory.

    Parameters
    ----------
    traj : Trajectory or sequence of GridField
    tol : float, optional
        Defaults to ``1e-8 * (max - min)`` of the first state.
    omega : ndarray of bool, optional
        Domain cells; its connected components (face adjacency) delimit the
        horizontal check.  Defaults to the whole grid.
    region : ndarray of bool, optional
        Further restriction, such as a reachable set.
    """
    states = traj.states if isinstance(traj, Trajectory) else list(traj)
    if not states:
        raise ValueError("empty trajectory")
    u0 = states[0].values
    if tol is None:
        tol = 1e-8 * float(np.ptp(u0))
    shape = u0.shape
    omega = np.ones(shape, bool) if omega is None else np.asarray(omega, bool)
    labels, _ = ndimage.label(omega)
    times, maxima, attain, horiz, vert = [], [], [], [], []
    running = -np.inf
    level_max = []
    for s in states:
        u = s.values
        vals = np.where(omega, u, -np.inf)
        M = float(vals.max())
        near = omega & (u >= M - tol)
        i = np.unravel_index(np.argmax(vals), shape)
        comp = labels == labels[i]
        if region is not None:
            comp &= np.asarray(region, bool)
        horiz.append(bool(np.all(u[comp] >= M - tol)))
        running = max(running, M)
        level_max.append(M)
        vert.append(bool(all(m >= running - tol for m in level_max)))
        times.append(s.t)
        maxima.append(M)
        attain.append(near)
    return PropagationReport(np.array(times), np.array(maxima), attain,
                             np.array(horiz), np.array(vert), float(tol))


def _cone_axes_split(f: NonlinearitySpec, m):
    """Pairs ``(axes, measure)`` of the nonlocal terms of ``f``."""
    if f.form == "mixed_weighted" and f.second_nonlocal:
        m1, m2 = m
        return [(tuple(f.nonlocal_axes), m1), (tuple(f.local_axes), m2)]
    return [(tuple(f.cone_axes), m)]


def n_expression(f: NonlinearitySpec, m, x, t, p, gamma, eta=0.5, c=1.0,
                 q: QuadratureConfig = QuadratureConfig(), bounds=None):
    """``F(x, t, p, I - gamma p p^T, C_mu - c gamma int_C |p.z|^2 mu_x)``.

    For mixed forms the cone uses the components of ``p`` on the nonlocal
    axes and the measure acting there.
    """
    x = np.atleast_1d(np.asarray(x, float))
    p = np.atleast_1d(np.asarray(p, float))
    X = np.eye(f.dim) - gamma * np.outer(p, p)
    ls = []
    for k, (axes, mk) in enumerate(_cone_axes_split(f, m)):
        mx = measure_at(mk, x)
        bd = bounds[k] if bounds is not None else measure_bound(mx, q, x[list(axes)])
        pk = p[list(axes)]
        mass = 0.0
        if np.linalg.norm(pk) > 0:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", EmptyConeWarning)
                mass = cone_weighted_mass(mx, ConeSpec(pk, eta, max(gamma, 1.0)), "proj", q,
                                          x[list(axes)]).value
        ls.append(bd.value - c * gamma * mass)
    l = tuple(ls) if len(ls) == 2 else ls[0]
    return eval_F(f, x, t, p, X, l)


@dataclass
class ProbeReport:
    """Values of the (N) expression over ``gammas`` at the worst samples."""

    gammas: np.ndarray
    values: np.ndarray
    exponent: float
    verdict: str
    samples: np.ndarray

    @property
    def diverges(self):
        return self.verdict == "diverges"

    def rows(self):
        return [[g, v] for g, v in zip(self.gammas, self.values)]


def _growth_exponent(gammas, values):
    """Slope of ``log(E_{k+1} - E_k)`` against ``log gamma_k``.

    On a geometric grid the increments of ``a + b gamma^k`` are
    ``b gamma^k (r^k - 1)``, so the constant ``a`` drops out.
    """
    d = np.diff(values)
    g = np.sqrt(gammas[1:] * gammas[:-1])
    ok = d > 1e-9 * (1 + np.abs(values[1:]))
    if ok.sum() < 3:
        return float("nan")
    return float(np.polyfit(np.log(g[ok]), np.log(d[ok]), 1)[0])


def _verdict(gammas, values, exponent):
    first = values[gammas <= gammas[0] * 10]
    last = values[gammas >= gammas[-1] / 10]
    rule = last.min() > 0 and last.min() >= 10 * first.min()
    d = np.diff(values)
    rising = np.all(d[-3:] > 1e-9 * (1 + np.abs(values[-3:])))
    power = np.isfinite(exponent) and exponent >= 0.05 and rising
    return "diverges" if (rule or power) else "bounded"


def nondegeneracy_probe(f: NonlinearitySpec, m: MeasureLike, xbar, t0=0.5, R=0.5, eta=0.5,
                        c=1.0, gammas=None, samples=16, seed=0,
                        q: QuadratureConfig = QuadratureConfig()) -> ProbeReport:
    """Evaluate condition (N) over a geometric ``gammas`` grid.

    ``(x, t)`` are sampled in the box of half-width ``R`` around
    ``(xbar, t0)`` and ``p`` with ``R/2 <= |p| <= R``; at each ``gamma`` the
    minimum over the samples is kept.  The verdict is ``diverges`` when the
    last-decade minimum is positive and at least ten times the first-decade
    minimum, or when the minimum keeps rising with a fitted power of
    ``gamma`` of at least 0.05.
    """
    gammas = np.geomspace(10, 1e4, 13) if gammas is None else np.asarray(gammas, float)
    if gammas[-1] / gammas[0] < 100 * (1 - 1e-12):
        raise ValueError("gammas must span at least two decades")
    rng = np.random.default_rng(seed)
    xbar = np.atleast_1d(np.asarray(xbar, float))
    n = f.dim
    pts = []
    for _ in range(samples):
        x = xbar + rng.uniform(-R, R, n)
        t = t0 + rng.uniform(-R, R)
        w = rng.normal(size=n)
        w /= np.linalg.norm(w)
        pts.append((x, t, w * rng.uniform(R / 2, R)))
    E = np.empty((samples, len(gammas)))
    for i, (x, t, p) in enumerate(pts):
        bounds = [measure_bound(measure_at(mk, x), q, x[list(ax)])
                  for ax, mk in _cone_axes_split(f, m)]
        for j, g in enumerate(gammas):
            E[i, j] = n_expression(f, m, x, t, p, g, eta, c, q, bounds)
    vals = E.min(axis=0)
    k = _growth_exponent(gammas, vals)
    return ProbeReport(gammas, vals, k, _verdict(gammas, vals, k),
                       np.array([np.concatenate([x, [t], p]) for x, t, p in pts]))


@dataclass
class VerticalReport:
    lambdas: np.ndarray
    values: np.ndarray
    smallest: Optional[float]
    status: str


def vertical_nondegeneracy_check(f: NonlinearitySpec, m: MeasureLike, x0, t0=0.5,
                                 lambda_grid=None,
                                 q: QuadratureConfig = QuadratureConfig()) -> VerticalReport:
    """Condition (N'): ``lambda + F(x0, t0, 0, I, C_mu) > 0`` over a grid of lambda."""
    x0 = np.atleast_1d(np.asarray(x0, float))
    lam = np.linspace(0, 10, 1001)[1:] if lambda_grid is None else np.asarray(lambda_grid, float)
    ls = [measure_bound(measure_at(mk, x0), q, x0[list(ax)]).value
          for ax, mk in _cone_axes_split(f, m)]
    l = tuple(ls) if len(ls) == 2 else ls[0]
    F0 = eval_F(f, x0, t0, np.zeros(f.dim), np.eye(f.dim), l)
    vals = lam + F0
    ok = vals > 0
    if ok.all():
        return VerticalReport(lam, vals, float(lam[0]), "all pass")
    if not ok.any():
        return VerticalReport(lam, vals, None, "none pass")
    return VerticalReport(lam, vals, float(lam[ok][0]), "partial")


@dataclass
class ScalingReport:
    """Scaling defects ``F(eps a) - eps F(a)``.

    ``worst_S`` and ``worst_S_prime`` are the literal minima over samples
    and ``eps``.  ``linear_S`` / ``linear_S_prime`` tell whether
    ``F(eps a) / eps`` converges to a finite limit (or to ``+inf``) as
    ``eps -> 0`` at every sample: then the linear part of ``F`` carries the
    scaling and higher-order terms vanish, as for ``b |p|^m`` with ``m > 1``.
    """

    worst_S: float
    worst_S_prime: float
    linear_S: bool
    linear_S_prime: bool
    eps: np.ndarray
    tol: float

    @property
    def passes_S(self):
        return self.worst_S >= -self.tol or self.linear_S

    @property
    def passes_S_prime(self):
        return self.worst_S_prime >= -self.tol or self.linear_S_prime


def _limit_ok(g):
    """Does the sequence ``g(eps_k)`` (eps decreasing) stay bounded below?"""
    d = np.diff(g)
    if np.all(np.abs(d) <= 1e-12 * (1 + np.abs(g[1:]))):
        return True
    head, tail = np.abs(d[0]), np.abs(d[-1])
    converging = tail <= 0.5 * head or tail <= 1e-9 * (1 + abs(g[-1]))
    return bool(converging or d[-1] > 0)


def scaling_check(f: NonlinearitySpec, samples=200, eps_grid=None, seed=0, gamma=10.0,
                  R=0.5, tol=1e-12) -> ScalingReport:
    """Sample ``(x, t, p, l)`` and measure how far (S) and (S') are from holding."""
    eps = np.geomspace(1e-6, 1.0, 13)[::-1] if eps_grid is None else np.sort(np.asarray(eps_grid, float))[::-1]
    rng = np.random.default_rng(seed)
    n = f.dim
    two = f.form == "mixed_weighted" and f.second_nonlocal
    worst = [np.inf, np.inf]
    lin = [True, True]
    for _ in range(samples):
        x = rng.uniform(-1, 1, n)
        t = rng.uniform(0, 1)
        w = rng.normal(size=n)
        p = w / np.linalg.norm(w) * rng.uniform(R / 2, R)
        l = tuple(rng.normal(size=2)) if two else float(rng.normal())
        for k, X in enumerate((np.eye(n) - gamma * np.outer(p, p), np.eye(n))):
            base = eval_F(f, x, t, p, X, l)
            g = []
            for e in eps:
                le = tuple(e * np.asarray(l)) if two else e * l
                val = eval_F(f, x, t, e * p, e * X, le)
                worst[k] = min(worst[k], val - e * base)
                g.append(val / e)
            lin[k] = lin[k] and _limit_ok(np.asarray(g))
    return ScalingReport(float(worst[0]), float(worst[1]), lin[0], lin[1], eps, tol)
