"""Monotone explicit time stepping for the catalogue equations.

The nonlocal operator is discretized by interpolating ``u(x+z)`` with
piecewise multilinear hat functions on cells away from the origin, which
gives nonnegative weights on grid offsets.  Inside the near cube
``[-h, h]^N`` the second-order Taylor term leaves a diffusion with matrix
``A = 1/2 int_Q z z^T mu``; the part of the gradient compensation outside the
cube becomes an upwinded drift.  Gradient terms use Rouy-Tourin upwinding and
second derivatives centered differences, so every update is nondecreasing in
all stencil values once ``dt`` respects :func:`stability_dt`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy.signal import fftconvolve

from .errors import (InstabilityError, PreconditionError, UnboundedCoefficientError,
                     UnsupportedKindError)
from .fields import GridField
from .measures import MeasureSpec, PushForward, ZeroOrderDirectional
from .operators import NonlinearitySpec, NonlocalConfig, coef_value
from .quadrature import QuadratureConfig, integrate

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass
class GridKernel:
    """Discrete nonlocal operator on offsets ``k h``, ``|k_i| <= reach_i``.

    ``I_h[u]_i = sum_k w_k (u_{i+k} - u_i) + tr(A D^2 u) - drift . Du
    + far (u_far - u_i)``.
    """

    weights: np.ndarray
    near: np.ndarray
    drift: np.ndarray
    far: float
    h: np.ndarray
    reach: tuple

    @property
    def mass(self):
        return float(self.weights.sum())

    def rate(self):
        """Diagonal coefficient of ``-I_h``: the kernel's effective mass."""
        return (self.mass + self.far + float(np.sum(2 * np.diag(self.near) / self.h ** 2))
                + float(np.sum(np.abs(self.drift) / self.h)))


def _cube_exit(d, h):
    with np.errstate(divide="ignore"):
        return np.min(np.where(np.abs(d) > 0, h / np.abs(d), np.inf), axis=-1)


def _hat_weights_rays(ang, beta, h, reach):
    """Hat weights of a kernel carried by rays (discrete angular measure)."""
    dim = len(h)
    K = np.asarray(reach)
    w = np.zeros(tuple(2 * K + 1))
    far = 0.0
    for om, a in zip(np.asarray(ang.atoms, float), np.asarray(ang.atom_weights, float)):
        if a == 0:
            continue
        r0 = float(_cube_exit(om, h))
        r1 = float(_cube_exit(om, K * h))
        far += a * r1 ** (-beta) / beta
        brk = [r0, r1]
        for i in range(dim):
            if abs(om[i]) > 0:
                step = h[i] / abs(om[i])
                brk += list(step * np.arange(1, int(np.ceil(r1 / step)) + 1))
        brk = np.unique(np.clip(brk, r0, r1))
        lo, hi = brk[:-1], brk[1:]
        keep = hi - lo > 1e-14 * hi
        lo, hi = lo[keep], hi[keep]
        mid = 0.5 * (lo + hi)
        cell = np.floor(mid[:, None] * om / h + 1e-12).astype(int)
        r = lo[:, None] + (hi - lo)[:, None] * _GL_X
        qw = (hi - lo)[:, None] * _GL_W * a * r ** (-1.0 - beta)
        s = r[..., None] * om / h - cell[:, None, :]
        for corner in np.ndindex(*(2,) * dim):
            c = np.array(corner)
            phi = np.prod(np.where(c == 1, s, 1.0 - s), axis=-1)
            idx = cell + c + K
            ok = np.all((idx >= 0) & (idx <= 2 * K), axis=1)
            np.add.at(w, tuple(idx[ok].T), np.sum(phi * qw, axis=1)[ok])
    return w, far


def _hat_weights_cells(m, h, reach):
    """Hat weights of a kernel with a density, by Gauss-Legendre on cells."""
    dim = len(h)
    K = np.asarray(reach)
    w = np.zeros(tuple(2 * K + 1))
    grids = np.meshgrid(*[np.arange(-k, k) for k in K], indexing="ij")
    cells = np.stack(grids, -1)  # lower corners
    near = np.all((cells >= -1) & (cells <= 0), axis=-1)
    nodes = np.stack(np.meshgrid(*([_GL_X] * dim), indexing="ij"), -1).reshape(-1, dim)
    qw = np.prod(np.stack(np.meshgrid(*([_GL_W] * dim), indexing="ij"), -1).reshape(-1, dim), -1)
    z = (cells[..., None, :] + nodes) * h
    dens = np.asarray(m.density(z), float) * qw * np.prod(h)
    dens[near] = 0.0
    for corner in np.ndindex(*(2,) * dim):
        c = np.array(corner)
        phi = np.prod(np.where(c == 1, nodes, 1.0 - nodes), axis=-1)
        contrib = dens @ phi
        sl = tuple(slice(ci, ci + 2 * k) for ci, k in zip(c, K))
        w[sl] += contrib
    return w


def build_kernel(m: MeasureSpec, h, reach, zero_order=False,
                 q: QuadratureConfig = QuadratureConfig()) -> GridKernel:
    """Discretize a fixed Lévy kernel on offsets ``k h`` with ``|k_i| <= reach_i``."""
    if isinstance(m, PushForward) or not isinstance(m, MeasureSpec):
        raise UnsupportedKindError("the grid scheme supports fixed kernels in z only")
    h = np.atleast_1d(np.asarray(h, float))
    reach = tuple(int(r) for r in np.atleast_1d(reach))
    if len(h) != m.dim or len(reach) != m.dim:
        raise PreconditionError("spacing and kernel dimensions differ")
    ang, beta = m.angular(), m.beta
    dim = m.dim
    if zero_order:
        if ang.discrete:
            d, wts = np.asarray(ang.atoms, float), np.asarray(ang.atom_weights, float)
            anti = np.array([wts[np.argmin(np.linalg.norm(d + v, axis=1))] for v in d])
        else:
            th = np.linspace(0, 2 * np.pi, 256, endpoint=False)
            d = np.stack([np.cos(th), np.sin(th)], -1)
            wts, anti = np.asarray(ang.density(d), float), np.asarray(ang.density(-d), float)
        if np.max(np.abs(wts - anti)) > 1e-12 * (1 + np.max(np.abs(wts))):
            raise PreconditionError("the grid scheme needs an even order-one kernel")
    if ang.discrete:
        w, far = _hat_weights_rays(ang, beta, h, reach)
    else:
        if dim != 2:
            raise UnsupportedKindError("continuous angular densities are planar")
        w = _hat_weights_cells(m, h, reach)
        far = integrate(ang, beta, lambda z: np.ones(z.shape[:-1]),
                        lo=lambda d: _cube_exit(d, np.asarray(reach) * h), hi=np.inf,
                        tail=(1.0, 0.0), cfg=q).value
    center = tuple(reach)
    w[center] = 0.0
    cube = lambda d: _cube_exit(d, h)
    A = np.zeros((dim, dim))
    for i in range(dim):
        for j in range(i, dim):
            f = lambda z, i=i, j=j: z[..., i] * z[..., j]
            lead = (2, lambda d, i=i, j=j: d[..., i] * d[..., j])
            A[i, j] = A[j, i] = 0.5 * integrate(ang, beta, f, lo=0.0, hi=cube,
                                                leading=lead, cfg=q).value
    b = np.zeros(dim)
    if not zero_order and not getattr(m, "symmetric", False):
        for i in range(dim):
            b[i] = integrate(ang, beta, lambda z, i=i: z[..., i],
                             lo=lambda d: np.minimum(cube(d), 1.0), hi=1.0, cfg=q).value
    off = A - np.diag(np.diag(A))
    if np.max(np.abs(off)) > 1e-10 * max(np.max(np.abs(A)), 1e-300):
        raise UnsupportedKindError("near-origin covariance is not diagonal")
    return GridKernel(w, np.diag(np.diag(A)), b, float(far), h, reach)


def _fold(k: GridKernel, shape):
    """Periodic kernel: weights summed over residues, far mass spread evenly."""
    W = np.zeros(shape)
    K = np.asarray(k.reach)
    idx = np.stack(np.meshgrid(*[np.arange(-r, r + 1) for r in K], indexing="ij"), -1)
    res = np.mod(idx, np.asarray(shape)).reshape(-1, len(shape))
    np.add.at(W, tuple(res.T), k.weights.ravel())
    W += k.far / np.prod(shape)
    return W


@dataclass
class SchemeConfig:
    """Explicit scheme setup.

    Parameters
    ----------
    field : GridField
        Initial state; its ``periodic`` flag or ``exterior`` data fixes the
        boundary treatment.
    f : NonlinearitySpec
    m : MeasureSpec, pair of them (mixed_weighted with a second nonlocal
        term) or None for no nonlocal term.
    nlcfg : NonlocalConfig
    dt : float, optional
        Time step; defaults to :func:`stability_dt`.
    t_end : float
    stride : int
        Keep every ``stride``-th state in the trajectory.
    periods : int
        Periodic grids: number of periods summed exactly before the far
        mass is spread evenly.
    reach_factor : float
        Dirichlet grids: kernel reach in units of the box width.
    check_max : bool
        Abort when a step breaks the discrete maximum principle.
    """

    field: GridField
    f: NonlinearitySpec
    m: Any = None
    nlcfg: NonlocalConfig = field(default_factory=NonlocalConfig)
    dt: Optional[float] = None
    t_end: float = 0.1
    stride: int = 10
    periods: int = 8
    reach_factor: float = 2.0
    check_max: bool = True
    _disc: Any = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.t_end > self.field.T:
            raise PreconditionError("t_end exceeds the horizon of the field")
        if self.f.dim != self.field.dim:
            raise PreconditionError("nonlinearity and grid dimensions differ")
        if self.field.dim > 2:
            raise UnsupportedKindError("the grid scheme handles N <= 2")

    def discretization(self):
        if self._disc is None:
            self._disc = _Discretization(self)
        return self._disc


def _kernel_axes(f: NonlinearitySpec):
    if f.form.startswith("mixed"):
        return [tuple(f.nonlocal_axes), tuple(f.local_axes)]
    return [tuple(range(f.dim))]


class _Discretization:
    """Kernels, padding and exterior nodes of a scheme configuration."""

    def __init__(self, c: SchemeConfig):
        gf, f = c.field, c.f
        self.f = f
        self.shape = gf.shape
        self.h = gf.h
        self.periodic = gf.periodic
        self.exterior = gf.exterior
        self.points = gf.points()
        self.kernels = []  # (axes, GridKernel, folded or None)
        ms = []
        if c.m is not None:
            if f.form == "mixed_weighted" and f.second_nonlocal:
                m1, m2 = c.m
                ms = [(tuple(f.nonlocal_axes), m1), (tuple(f.local_axes), m2)]
            else:
                ms = [(_kernel_axes(f)[0], c.m)]
        elif f.form == "mixed_weighted" and f.second_nonlocal:
            raise PreconditionError("two nonlocal terms need a pair of measures")
        zero = f.form == "dislocation"
        if zero and c.m is not None and not isinstance(c.m, ZeroOrderDirectional):
            raise PreconditionError("dislocation needs a ZeroOrderDirectional kernel")
        n = np.asarray(self.shape)
        self.pad = 1
        for axes, m in ms:
            if not isinstance(m, MeasureSpec):
                raise UnsupportedKindError("x-dependent kernels are not supported by the scheme")
            ax = list(axes)
            if self.periodic:
                reach = tuple(int(c.periods * k) for k in n[ax])
            else:
                reach = tuple(int(np.ceil(c.reach_factor * (k - 1))) for k in n[ax])
                self.pad = max(self.pad, max(reach))
            k = build_kernel(m, self.h[ax], reach, zero, c.nlcfg.quad)
            folded = _fold(k, tuple(n[ax])) if self.periodic else None
            self.kernels.append((axes, k, folded))
        if not self.periodic:
            P = self.pad
            ax = [lo + hh * np.arange(-P, k + P) for lo, hh, k in zip(gf.lower, self.h, self.shape)]
            self.padded_points = np.stack(np.meshgrid(*ax, indexing="ij"), -1)
            inner = tuple(slice(P, P + k) for k in self.shape)
            self.outside = np.ones(self.padded_points.shape[:-1], bool)
            self.outside[inner] = False
            self.inner = inner

    # -- padded values ------------------------------------------------------
    def padded(self, u, t):
        if self.periodic:
            return np.pad(u, 1, mode="wrap"), 1
        P = self.pad
        U = np.empty(self.padded_points.shape[:-1])
        U[self.inner] = u
        U[self.outside] = np.asarray(self.exterior(self.padded_points[self.outside], t), float)
        return U, P

    def shifted(self, U, P, s):
        return U[tuple(slice(P + si, P + si + k) for si, k in zip(s, self.shape))]

    def unit(self, i, sign=1):
        s = [0] * len(self.shape)
        s[i] = sign
        return s

    # -- nonlocal part ----------------------------------------------------
    def nonlocal_values(self, u, U, P):
        out = []
        for axes, k, W in self.kernels:
            ax = list(axes)
            dim = len(self.shape)
            if self.periodic:
                full = np.ones(dim, int)
                full[ax] = np.asarray(self.shape)[ax]
                Wf = W.reshape(full)
                conv = np.real(np.fft.ifftn(np.fft.fftn(u, axes=ax)
                                            * np.conj(np.fft.fftn(Wf, s=np.asarray(self.shape)[ax],
                                                                  axes=ax)), axes=ax))
                val = conv - (k.mass + k.far) * u
            else:
                crop = [slice(P, P + n) for n in self.shape]
                for a in ax:
                    crop[a] = slice(P - k.reach[ax.index(a)], P + self.shape[a] + k.reach[ax.index(a)])
                Uc = U[tuple(crop)]
                shape_w = np.ones(dim, int)
                shape_w[ax] = k.weights.shape
                wk = k.weights.reshape(shape_w)
                flip = wk[tuple(slice(None, None, -1) for _ in range(dim))]
                conv = fftconvolve(Uc, flip, mode="valid", axes=ax)
                far_val = 0.0
                if k.far > 0:
                    # the tail beyond the reach takes the exterior values on the
                    # outer shell of the kernel, weighted along its own directions
                    shell = np.zeros_like(flip)
                    for j, a in enumerate(ax):
                        sl = [slice(None)] * dim
                        sl[a] = [0, -1]
                        shell[tuple(sl)] = flip[tuple(sl)]
                    if shell.sum() > 0:
                        far_val = fftconvolve(Uc, shell / shell.sum(), mode="valid", axes=ax)
                    else:
                        far_val = float(np.mean(U[self.outside]))
                val = conv - k.mass * u + k.far * (far_val - u)
            for j, a in enumerate(ax):
                if k.near[j, j] != 0:
                    val = val + k.near[j, j] * self.second(U, P, a)
                b = k.drift[j]
                if b > 0:
                    val = val + b * (self.shifted(U, P, self.unit(a, -1)) - u) / self.h[a]
                elif b < 0:
                    val = val - b * (self.shifted(U, P, self.unit(a, 1)) - u) / self.h[a]
            out.append(val)
        return out

    # -- local stencils ---------------------------------------------------
    def second(self, U, P, a):
        u = self.shifted(U, P, [0] * len(self.shape))
        return (self.shifted(U, P, self.unit(a, 1)) - 2 * u
                + self.shifted(U, P, self.unit(a, -1))) / self.h[a] ** 2

    def one_sided(self, U, P):
        u = self.shifted(U, P, [0] * len(self.shape))
        fw = [(self.shifted(U, P, self.unit(a, 1)) - u) / self.h[a] for a in range(len(self.shape))]
        bw = [(u - self.shifted(U, P, self.unit(a, -1))) / self.h[a] for a in range(len(self.shape))]
        return fw, bw

    def grad_norms(self, U, P):
        """Upwind gradient norms ``(G_minus, G_plus)``.

        ``G_minus`` grows with ``u_i`` and decreases in the neighbors, so it
        is the monotone choice for ``+|Du|`` in ``F``; ``G_plus`` for ``-|Du|``.
        """
        fw, bw = self.one_sided(U, P)
        gm = sum(np.maximum(np.maximum(b, -f), 0.0) ** 2 for f, b in zip(fw, bw))
        gp = sum(np.maximum(np.maximum(f, -b), 0.0) ** 2 for f, b in zip(fw, bw))
        return np.sqrt(gm), np.sqrt(gp)

    def trace_AD2(self, U, P, A):
        """Monotone ``tr(A D^2 u)`` with the cross-stencil chosen by sign."""
        dim = len(self.shape)
        u = self.shifted(U, P, [0] * dim)
        val = sum(A[..., a, a] * self.second(U, P, a) for a in range(dim))
        if dim == 2:
            a12 = A[..., 0, 1]
            h1, h2 = self.h
            s = lambda i, j: self.shifted(U, P, [i, j])
            pos = (s(1, 1) - s(1, 0) - s(0, 1) + 2 * u - s(-1, 0) - s(0, -1) + s(-1, -1)) / (2 * h1 * h2)
            neg = -(s(1, -1) - s(1, 0) - s(0, -1) + 2 * u - s(-1, 0) - s(0, 1) + s(-1, 1)) / (2 * h1 * h2)
            val = val + 2 * np.where(a12 >= 0, a12 * pos, a12 * neg)
        return val

    def pucci(self, U, P, pp):
        """``max`` over the axis and diagonal frames of ``sum phi(second diff)``."""
        dim = len(self.shape)
        phi = lambda s: pp.Lam * np.maximum(s, 0) + pp.lam * np.minimum(s, 0)
        best = sum(phi(self.second(U, P, a)) for a in range(dim))
        if dim == 2 and np.isclose(self.h[0], self.h[1]):
            u = self.shifted(U, P, [0, 0])
            step2 = self.h[0] ** 2 + self.h[1] ** 2
            d1 = (self.shifted(U, P, [1, 1]) - 2 * u + self.shifted(U, P, [-1, -1])) / step2
            d2 = (self.shifted(U, P, [1, -1]) - 2 * u + self.shifted(U, P, [-1, 1])) / step2
            best = np.maximum(best, phi(d1) + phi(d2))
        return best


def _coef(c, pts, t, shape):
    v = coef_value(c, pts, t)
    v = np.broadcast_to(np.asarray(v, float), shape)
    if not np.all(np.isfinite(v)):
        raise UnboundedCoefficientError("coefficient is not finite on the grid")
    return v


def _matrix_field(f, pts, t, shape):
    dim = f.dim
    if f.A is None:
        return np.broadcast_to(np.eye(dim), shape + (dim, dim))
    A = f.A(pts, t) if callable(f.A) else f.A
    A = np.broadcast_to(np.asarray(A, float).reshape(np.shape(A)[:-2] + (dim, dim)) if np.ndim(A) >= 2
                        else np.asarray(A, float).reshape(dim, dim), shape + (dim, dim))
    if not np.all(np.isfinite(A)):
        raise UnboundedCoefficientError("diffusion matrix is not finite on the grid")
    return A


def discrete_F(state: GridField, c: SchemeConfig):
    """Grid values of ``F(x, t, D_h u, D_h^2 u, I_h[u])``."""
    d = c.discretization()
    f = c.f
    u, t = state.values, state.t
    U, P = d.padded(u, t)
    pts = d.points
    shape = u.shape
    L = d.nonlocal_values(u, U, P) if d.kernels else [np.zeros(shape)]
    form = f.form
    if form == "pure_nonlocal":
        return -L[0]
    if form == "growing_interface":
        gm, _ = d.grad_norms(U, P)
        return 0.5 * gm ** 2 - L[0]
    if form == "gradient_power":
        b = _coef(f.b, pts, t, shape)
        gm, gp = d.grad_norms(U, P)
        g = np.where(b >= 0, gm, gp)
        with np.errstate(divide="ignore", invalid="ignore"):
            gpow = np.where(g > 0, g ** f.m, 0.0 if f.m > 0 else 1.0)
        return b * gpow - L[0]
    if form == "quasilinear":
        return -d.trace_AD2(U, P, _matrix_field(f, pts, t, shape)) - L[0]
    if form == "mixed_local_nonlocal":
        return -L[0] - sum(d.second(U, P, a) for a in f.local_axes)
    if form == "mixed_weighted":
        a = _coef(f.a, pts, t, shape)
        cc = _coef(f.c, pts, t, shape)
        if np.any(a < 0) or np.any(cc < 0):
            raise PreconditionError("mixed_weighted needs nonnegative weights")
        if f.second_nonlocal:
            return -a * L[0] - cc * L[1]
        return -a * L[0] - cc * sum(d.second(U, P, k) for k in f.local_axes)
    if form == "dislocation":
        s = _coef(f.c, pts, t, shape) + L[0]
        gm, gp = d.grad_norms(U, P)
        return np.where(s >= 0, -s * gp, -s * gm)
    if form == "linearized_comparison":
        cc = _coef(f.c, pts, t, shape)
        if np.any(cc < 0):
            raise PreconditionError("linearized_comparison needs c >= 0")
        _, gp = d.grad_norms(U, P)
        return -cc * gp - d.pucci(U, P, f.pucci) - cc * L[0]
    raise ValueError(form)


@dataclass(frozen=True)
class StepBound:
    """Stable step ``dt`` with the rates it was derived from.

    ``dt = 0.9 / (diffusion + gradient + nonlocal)``; ``inf`` when all rates
    vanish, in which case the run is limited by the horizon only.
    """

    dt: float
    diffusion: float
    gradient: float
    nonlocal_rate: float

    @property
    def horizon_limited(self):
        return not np.isfinite(self.dt)

    def __float__(self):
        return float(self.dt)


def stability_dt(c: SchemeConfig, state: Optional[GridField] = None) -> StepBound:
    """Largest step for which the explicit update stays monotone (times 0.9).

    Gradient and speed dependent rates are evaluated on ``state`` (the
    initial field by default).

    Raises
    ------
    UnboundedCoefficientError
        If a coefficient is not finite on the grid, or the gradient term is
        not Lipschitz (``b |p|^m`` with ``m < 1``).
    """
    d = c.discretization()
    f = c.f
    state = c.field if state is None else state
    u, t = state.values, state.t
    pts, shape, h = d.points, u.shape, d.h
    inv_h = float(np.sum(1 / h))
    nl = [k.rate() for _, k, _ in d.kernels]
    nl = nl + [0.0] * (2 - len(nl))
    U, P = d.padded(u, t)
    gm, gp = d.grad_norms(U, P)
    gmax = float(max(np.max(gm), np.max(gp)))
    diff = grad = nonloc = 0.0
    form = f.form
    if form == "pure_nonlocal":
        nonloc = nl[0]
    elif form == "growing_interface":
        grad, nonloc = gmax * inv_h, nl[0]
    elif form == "gradient_power":
        b = np.max(np.abs(_coef(f.b, pts, t, shape)))
        if b > 0 and f.m < 1:
            raise UnboundedCoefficientError("|p|^m with m < 1 has no Lipschitz bound at p = 0")
        grad = b * f.m * gmax ** (f.m - 1) * inv_h if b > 0 and f.m > 0 else 0.0
        nonloc = nl[0]
    elif form == "quasilinear":
        A = _matrix_field(f, pts, t, shape)
        rate = sum(2 * A[..., a, a] / h[a] ** 2 for a in range(f.dim))
        if f.dim == 2:
            rate = rate - 2 * np.abs(A[..., 0, 1]) / (h[0] * h[1])
        diff, nonloc = float(np.max(rate)), nl[0]
    elif form == "mixed_local_nonlocal":
        diff = float(sum(2 / h[a] ** 2 for a in f.local_axes))
        nonloc = nl[0]
    elif form == "mixed_weighted":
        a = float(np.max(_coef(f.a, pts, t, shape)))
        cc = float(np.max(_coef(f.c, pts, t, shape)))
        nonloc = a * nl[0]
        if f.second_nonlocal:
            nonloc += cc * nl[1]
        else:
            diff = cc * float(sum(2 / h[a_] ** 2 for a_ in f.local_axes))
    elif form == "dislocation":
        L = d.nonlocal_values(u, U, P)[0] if d.kernels else 0.0
        s = np.abs(_coef(f.c, pts, t, shape) + L)
        grad = float(np.max(s)) * inv_h
        nonloc = gmax * nl[0]
    elif form == "linearized_comparison":
        cc = float(np.max(_coef(f.c, pts, t, shape)))
        diff = f.pucci.Lam * float(sum(2 / hh ** 2 for hh in h))
        grad, nonloc = cc * inv_h, cc * nl[0]
    total = diff + grad + nonloc
    dt = 0.9 / total if total > 0 else np.inf
    return StepBound(float(dt), float(diff), float(grad), float(nonloc))


def _exterior_extremes(d, t):
    if d.periodic:
        return np.inf, -np.inf
    vals = np.asarray(d.exterior(d.padded_points[d.outside], t), float)
    return float(vals.max()), float(vals.min())


def step(state: GridField, c: SchemeConfig, dt: Optional[float] = None) -> GridField:
    """One explicit Euler step ``u - dt F_h``.

    Raises
    ------
    InstabilityError
        If ``check_max`` is set and the new maximum exceeds the old one (and
        the exterior data) by more than roundoff, or the minimum drops below.
    """
    if dt is None:
        dt = c.dt if c.dt is not None else float(stability_dt(c, state))
    if not np.isfinite(dt):
        dt = c.t_end - state.t
    u = state.values
    new = u - dt * discrete_F(state, c)
    if c.check_max:
        d = c.discretization()
        emax, emin = _exterior_extremes(d, state.t)
        top = max(float(u.max()), emax if np.isfinite(emax) else -np.inf)
        bot = min(float(u.min()), emin if np.isfinite(emin) else np.inf)
        tol = 1e-10 * (1.0 + max(abs(top), abs(bot)))
        if new.max() > top + tol or new.min() < bot - tol:
            raise InstabilityError(
                f"max principle broken at t={state.t + dt:.6g}: "
                f"max {new.max():.6g} > {top:.6g} or min {new.min():.6g} < {bot:.6g}; "
                f"dt={dt:.3g} may exceed the stable step")
    return state.with_values(new, t=state.t + dt)


@dataclass
class Trajectory:
    """Thinned states plus per-step extremes.

    ``records`` rows are ``(step, t, max, argmax..., min, argmin...)``.
    """

    states: list
    records: list
    dt: float

    @property
    def times(self):
        return [s.t for s in self.states]

    def summary_rows(self):
        return self.records


def _record(k, s: GridField):
    u = s.values
    pts = s.points()
    imax = np.unravel_index(np.argmax(u), u.shape)
    imin = np.unravel_index(np.argmin(u), u.shape)
    return [k, s.t, float(u[imax]), *pts[imax], float(u[imin]), *pts[imin]]


def simulate(c: SchemeConfig) -> Trajectory:
    """Run from ``c.field`` to ``c.t_end``; the last step is shortened to land on it."""
    state = c.field
    dt = c.dt if c.dt is not None else float(stability_dt(c))
    if c.dt is not None:
        bound = float(stability_dt(c))
        if dt > bound * (1 + 1e-12) / 0.9:
            raise PreconditionError(f"dt = {dt} exceeds the monotone bound {bound / 0.9}")
    states = [state]
    records = [_record(0, state)]
    k = 0
    eps = 1e-12 * max(1.0, abs(c.t_end))
    while state.t < c.t_end - eps:
        h = min(dt, c.t_end - state.t)
        state = step(state, c, h)
        k += 1
        records.append(_record(k, state))
        if k % c.stride == 0 or state.t >= c.t_end - eps:
            states.append(state)
    return Trajectory(states, records, dt)


@dataclass
class ComparisonReport:
    """``max(u - v)`` per compared state and its worst increase."""

    max_diff: np.ndarray
    increase: float
    tol: float

    @property
    def ok(self):
        return self.increase <= self.tol


def discrete_comparison_check(u_traj, v_traj, tol=1e-12) -> ComparisonReport:
    """Ordering check between two runs on the same grid and steps.

    Reports ``max_n max(u_n - v_n) - L`` where ``L = max(u_0 - v_0)`` on
    periodic grids.  With shared Dirichlet exterior data the exterior
    difference is zero, so ``L = max(u_0 - v_0, 0)``.  A nonpositive value
    (up to ``tol``) certifies discrete comparison over the stored states.
    """
    us = u_traj.states if isinstance(u_traj, Trajectory) else list(u_traj)
    vs = v_traj.states if isinstance(v_traj, Trajectory) else list(v_traj)
    if len(us) != len(vs):
        raise PreconditionError("trajectories have different lengths")
    md = []
    for a, b in zip(us, vs):
        av = a.values if isinstance(a, GridField) else np.asarray(a)
        bv = b.values if isinstance(b, GridField) else np.asarray(b)
        if av.shape != bv.shape:
            raise PreconditionError("trajectories live on different grids")
        md.append(float(np.max(av - bv)))
    md = np.array(md)
    periodic = all(isinstance(s, GridField) and s.periodic for s in (us[0], vs[0]))
    level = md[0] if periodic else max(md[0], 0.0)
    return ComparisonReport(md, float(np.max(md) - level), tol)
