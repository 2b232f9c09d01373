"""Adaptive cubature in polar coordinates for power-law Lévy kernels.

Every kernel in the catalogue factors as ``Phi(dw) * r**(-1 - beta) dr`` where
``Phi`` is a measure on the unit sphere: an arc density in the plane, or a
finite set of atoms (the two directions of the real line, or the charged lines
of an axis-charging kernel).  Integrals are computed in the log-radius
variable ``rho = ln r``, in which the kernel becomes ``exp(-beta*rho) d rho``,
with tensor Gauss-Kronrod (7, 15) rules on cells that are bisected where the
embedded error estimate is largest.

The region between the origin and the innermost radius is replaced by the
closed-form integral of the leading Taylor term supplied by the caller, and
the region beyond the truncation radius by the closed-form integral of the
supplied asymptotic value, with its oscillation folded into the error.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

TWO_PI = 2.0 * np.pi

# Gauss-Kronrod (7, 15) on [-1, 1], as tabulated in QUADPACK (qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

KRONROD_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])

Bound = Union[float, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class QuadratureConfig:
    """Resolution and tolerance of the polar cubature.

    Parameters
    ----------
    radial_levels : int
        Number of octaves resolved below the inner end of a region reaching
        the origin; the rest is the closed-form Taylor remainder.
    angular_points : int
        Gauss-Legendre points per arc for the fixed angular rules used in
        remainders, tails and grid kernels.
    tail_radius : float
        Truncation radius beyond which the closed-form tail is used.
    rtol, atol : float
        Relative and absolute tolerance of the adaptive cubature.
    max_cells : int
        Cap on the number of cubature cells per integral.
    """

    radial_levels: int = 30
    angular_points: int = 24
    tail_radius: float = 1e3
    rtol: float = 1e-9
    atol: float = 1e-12
    max_cells: int = 6000

    def __post_init__(self):
        if self.radial_levels < 1 or self.angular_points < 1:
            raise ValueError("radial_levels and angular_points must be positive")
        if not self.tail_radius > 1.0:
            raise ValueError("tail_radius must exceed 1")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class QuadResult:
    """Value of an integral together with an error estimate."""

    value: float
    error: float

    def __float__(self):
        return float(self.value)

    def __add__(self, other):
        if isinstance(other, QuadResult):
            return QuadResult(self.value + other.value, self.error + other.error)
        return QuadResult(self.value + other, self.error)

    __radd__ = __add__

    def __mul__(self, k):
        return QuadResult(self.value * k, self.error * abs(k))

    __rmul__ = __mul__


def unit(theta):
    """Unit vectors (cos, sin) for an array of angles."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def angle_of(v):
    """Angle in [0, 2pi) of a planar vector."""
    return float(np.mod(np.arctan2(v[1], v[0]), TWO_PI))


@dataclass(frozen=True)
class AngularMeasure:
    """Angular factor of a power-law kernel.

    Either ``atoms`` (unit vectors) with ``atom_weights``, or, in the plane, a
    ``density`` on unit vectors whose discontinuities lie at ``breakpoints``.
    """

    dim: int
    atoms: Optional[np.ndarray] = None
    atom_weights: Optional[np.ndarray] = None
    density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.atoms is None and (self.density is None or self.dim != 2):
            raise NotImplementedError(
                "continuous angular densities are supported in dimension 2 only")

    @property
    def discrete(self):
        return self.atoms is not None

    def arcs(self, extra: Sequence[float] = ()):
        """Sub-arcs of [0, 2pi) between breakpoints, as an (n, 2) array."""
        pts = np.mod(np.concatenate([np.asarray(self.breakpoints, float),
                                     np.asarray(extra, float)]), TWO_PI)
        pts = np.unique(np.concatenate([[0.0, TWO_PI], pts]))
        arcs = np.stack([pts[:-1], pts[1:]], axis=1)
        return arcs[arcs[:, 1] - arcs[:, 0] > 1e-14]

    def rule(self, n=None, extra=(), mask=None):
        """Fixed angular rule: directions and weights (density included)."""
        if self.discrete:
            w = np.asarray(self.atom_weights, float).copy()
            d = np.asarray(self.atoms, float)
            if mask is not None:
                w = w * mask(d)
            return d, w
        n = n or 24
        x, wl = np.polynomial.legendre.leggauss(n)
        arcs = self.arcs(extra)
        half = 0.5 * (arcs[:, 1] - arcs[:, 0])
        mid = 0.5 * (arcs[:, 1] + arcs[:, 0])
        theta = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        w = (half[:, None] * wl[None, :]).ravel()
        d = unit(theta)
        w = w * self.density(d)
        if mask is not None:
            w = w * mask(d)
        return d, w

    def total(self, n=64):
        return float(np.sum(self.rule(n)[1]))


def _resolve(bound, dirs):
    if callable(bound):
        return np.asarray(bound(dirs), dtype=float)
    return np.full(dirs.shape[:-1], float(bound))


def _remainder_power(r, k, beta):
    # integral of r**(k - 1 - beta) over (0, r)
    return r ** (k - beta) / (k - beta)


class _Cells:
    """Adaptive Gauss-Kronrod cubature over (angle or atom) x log-radius."""

    def __init__(self, ang, beta, f, lo_fn, hi_fn, mask):
        self.ang = ang
        self.beta = beta
        self.f = f
        self.lo_fn = lo_fn
        self.hi_fn = hi_fn
        self.mask = mask

    def _radial(self, dirs):
        lo, hi = self.lo_fn(dirs), self.hi_fn(dirs)
        hi = np.maximum(hi, lo)
        return lo, hi

    def eval_atoms(self, k, sa, sb):
        d = self.ang.atoms[k]                       # (C, N)
        w = np.asarray(self.ang.atom_weights, float)[k]
        if self.mask is not None:
            w = w * self.mask(d)
        lo, hi = self._radial(d)                    # (C,)
        hs = 0.5 * (sb - sa)
        s = 0.5 * (sa + sb)[:, None] + hs[:, None] * KRONROD_NODES[None, :]
        rho = lo[:, None] + s * (hi - lo)[:, None]
        z = np.exp(rho)[..., None] * d[:, None, :]
        vals = self.f(z)
        g = vals * np.exp(-self.beta * rho) * ((hi - lo) * w * hs)[:, None]
        g = np.where(w[:, None] == 0, 0.0, g)
        kv = g @ KRONROD_WEIGHTS
        gv = g @ GAUSS_WEIGHTS
        err = np.abs(kv - gv)
        return kv, err, np.ones_like(kv, dtype=bool)

    def eval_arcs(self, ta, tb, sa, sb):
        ht = 0.5 * (tb - ta)
        theta = 0.5 * (ta + tb)[:, None] + ht[:, None] * KRONROD_NODES[None, :]
        d = unit(theta)                              # (C, 15, 2)
        dens = self.ang.density(d)
        if self.mask is not None:
            dens = dens * self.mask(d)
        lo, hi = self._radial(d)                    # (C, 15)
        hs = 0.5 * (sb - sa)
        s = 0.5 * (sa + sb)[:, None] + hs[:, None] * KRONROD_NODES[None, :]
        rho = lo[:, :, None] + s[:, None, :] * (hi - lo)[:, :, None]
        z = np.exp(rho)[..., None] * d[:, :, None, :]
        vals = self.f(z)
        g = vals * np.exp(-self.beta * rho) * ((hi - lo) * dens)[:, :, None]
        g = np.where(dens[:, :, None] == 0, 0.0, g)
        g = g * (ht * hs)[:, None, None]
        kk = np.einsum("cij,i,j->c", g, KRONROD_WEIGHTS, KRONROD_WEIGHTS)
        gk = np.einsum("cij,i,j->c", g, GAUSS_WEIGHTS, KRONROD_WEIGHTS)
        kg = np.einsum("cij,i,j->c", g, KRONROD_WEIGHTS, GAUSS_WEIGHTS)
        et, es = np.abs(kk - gk), np.abs(kk - kg)
        return kk, et + es, et >= es


def _initial_s_cells(span):
    n = int(np.clip(np.ceil(span / 1.5), 1, 64))
    edges = np.linspace(0.0, 1.0, n + 1)
    return edges[:-1], edges[1:]


def _cut_cells(atoms, s_a, s_b, radial_breaks, lo_fn, hi_fn):
    ks, sas, sbs = [], [], []
    atoms = np.asarray(atoms, float)
    lo, hi = lo_fn(atoms), hi_fn(atoms)
    for k, w in enumerate(atoms):
        rb = np.asarray([r for r in radial_breaks(w) if r > 0], float)
        span = hi[k] - lo[k]
        cut = (np.log(rb) - lo[k]) / span if span > 0 and rb.size else np.zeros(0)
        edges = np.unique(np.concatenate([s_a, [s_b[-1]], cut[(cut > 0) & (cut < 1)]]))
        ks.append(np.full(len(edges) - 1, k))
        sas.append(edges[:-1])
        sbs.append(edges[1:])
    return np.concatenate(ks), np.concatenate(sas), np.concatenate(sbs)


def integrate(ang: AngularMeasure, beta: float, f, *, lo: Bound = 0.0,
              hi: Bound = np.inf, mask=None, extra_breaks=(), leading=None,
              tail=None, radial_breaks=None,
              cfg: QuadratureConfig = QuadratureConfig()) -> QuadResult:
    """Integrate ``f(z)`` against ``Phi(dw) r**(-1-beta) dr`` over a polar region.

    Parameters
    ----------
    ang : AngularMeasure
    beta : float
        Radial exponent of the kernel.
    f : callable
        Vectorized integrand, ``f(z)`` with ``z`` of shape ``(..., dim)``.
    lo, hi : float or callable
        Radial limits, constant or functions of the unit direction.  ``lo=0``
        requires ``leading``; ``hi=inf`` requires ``tail``.
    mask : callable, optional
        Angular indicator, constant on the arcs cut by ``extra_breaks``.
    leading : (k, coef), optional
        Near the origin ``f(r w) ~ coef(w) r**k``; used for the innermost
        remainder and its error estimate.
    tail : (limit, osc), optional
        Beyond the truncation radius ``f(r w) = limit(w) + O(osc)``.
    radial_breaks : callable, optional
        ``radial_breaks(w)`` lists radii along the atom ``w`` where ``f``
        jumps; the initial cells are cut there.  Atomic measures only.
    """
    from_origin = not callable(lo) and float(lo) == 0.0
    to_infinity = not callable(hi) and np.isinf(hi)
    if from_origin and leading is None:
        raise ValueError("a region reaching the origin needs a leading term")
    if to_infinity and tail is None:
        raise ValueError("an unbounded region needs a tail model")
    RT = cfg.tail_radius
    span = cfg.radial_levels * np.log(2.0)

    def hi_fn(d):
        if to_infinity:
            return np.full(d.shape[:-1], np.log(RT))
        h = _resolve(hi, d)
        return np.log(np.clip(h, 1e-300, 1e300))

    def lo_fn(d):
        if from_origin:
            ref = np.zeros(d.shape[:-1]) if to_infinity else hi_fn(d)
            return ref - span
        lv = _resolve(lo, d)
        return np.log(np.maximum(lv, 1e-300))

    if to_infinity:
        # lower end given explicitly, upper end at the truncation radius
        def hi_clip(d):
            return np.maximum(hi_fn(d), lo_fn(d))
    else:
        hi_clip = hi_fn

    engine = _Cells(ang, beta, f, lo_fn, hi_clip, mask)
    dirs_fixed, w_fixed = ang.rule(cfg.angular_points, extra_breaks, mask)

    # typical log-span of the region, to seed the radial cells
    spans = (hi_clip(dirs_fixed) - lo_fn(dirs_fixed))[w_fixed != 0]
    s_a, s_b = _initial_s_cells(float(np.max(spans)) if spans.size else 1.0)

    if ang.discrete:
        natom = len(ang.atoms)
        if radial_breaks is None:
            k = np.repeat(np.arange(natom), len(s_a))
            sa, sb = np.tile(s_a, natom), np.tile(s_b, natom)
        else:
            k, sa, sb = _cut_cells(ang.atoms, s_a, s_b, radial_breaks, lo_fn, hi_clip)
        keep = w_fixed[k] != 0
        cells = dict(k=k[keep], sa=sa[keep], sb=sb[keep])
        val, err, _ = engine.eval_atoms(cells["k"], cells["sa"], cells["sb"])
        split_t = np.zeros(len(val), bool)
    else:
        arcs = ang.arcs(extra_breaks)
        mids = unit(arcs.mean(axis=1))
        live = ang.density(mids) * (mask(mids) if mask is not None else 1.0) != 0
        arcs = arcs[live]
        # split long arcs so that no initial cell exceeds a quarter turn
        pieces = []
        for a, b in arcs:
            n = int(np.ceil((b - a) / (np.pi / 4)))
            e = np.linspace(a, b, n + 1)
            pieces.extend(zip(e[:-1], e[1:]))
        pieces = np.array(pieces).reshape(-1, 2)
        ta = np.repeat(pieces[:, 0], len(s_a))
        tb = np.repeat(pieces[:, 1], len(s_a))
        sa, sb = np.tile(s_a, len(pieces)), np.tile(s_b, len(pieces))
        cells = dict(ta=ta, tb=tb, sa=sa, sb=sb)
        if len(ta):
            val, err, split_t = engine.eval_arcs(ta, tb, sa, sb)
        else:
            val = err = np.zeros(0)
            split_t = np.zeros(0, bool)

    while len(val):
        if not (np.all(np.isfinite(val)) and np.all(np.isfinite(err))):
            break   # refinement cannot repair a non-finite integrand
        total = float(np.sum(val))
        scale = max(abs(total), float(np.sum(np.abs(val))) * 1e-3)
        target = max(cfg.atol, cfg.rtol * scale)
        if np.sum(err) <= target or len(val) >= cfg.max_cells:
            break
        bad = err >= 0.25 * err.max()
        good = ~bad
        new = {key: [arr[good]] for key, arr in cells.items()}
        vals, errs, spl = [val[good]], [err[good]], [split_t[good]]
        idx = np.nonzero(bad)[0]
        if ang.discrete:
            sa, sb, kk = cells["sa"][idx], cells["sb"][idx], cells["k"][idx]
            sm = 0.5 * (sa + sb)
            parts = dict(k=np.concatenate([kk, kk]),
                         sa=np.concatenate([sa, sm]),
                         sb=np.concatenate([sm, sb]))
            v, e, s = engine.eval_atoms(parts["k"], parts["sa"], parts["sb"])
        else:
            ta, tb = cells["ta"][idx], cells["tb"][idx]
            sa, sb = cells["sa"][idx], cells["sb"][idx]
            st = split_t[idx]
            tm, sm = 0.5 * (ta + tb), 0.5 * (sa + sb)
            parts = dict(
                ta=np.concatenate([ta, np.where(st, tm, ta)]),
                tb=np.concatenate([np.where(st, tm, tb), tb]),
                sa=np.concatenate([sa, np.where(st, sa, sm)]),
                sb=np.concatenate([np.where(st, sb, sm), sb]))
            v, e, s = engine.eval_arcs(parts["ta"], parts["tb"], parts["sa"], parts["sb"])
        for key in cells:
            new[key].append(parts[key])
        vals.append(v)
        errs.append(e)
        spl.append(s)
        cells = {key: np.concatenate(arr) for key, arr in new.items()}
        val, err, split_t = np.concatenate(vals), np.concatenate(errs), np.concatenate(spl)

    value = float(np.sum(val)) if len(val) else 0.0
    error = float(np.sum(err)) if len(err) else 0.0

    if from_origin:
        kpow, coef = leading
        live = w_fixed != 0
        dirs_fixed, w_fixed = dirs_fixed[live], w_fixed[live]
        rmin = np.exp(lo_fn(dirs_fixed))
        c = np.asarray(coef(dirs_fixed), float)
        rem = c * _remainder_power(rmin, kpow, beta)
        value += float(np.sum(w_fixed * rem))
        # next-order deviation of the integrand at the innermost radius
        fz = f(rmin[:, None] * dirs_fixed)
        dev = np.abs(fz - c * rmin ** kpow) * rmin ** (-beta) / max(kpow + 1 - beta, 1e-3)
        error += float(np.sum(np.abs(w_fixed) * dev))
        # second angular resolution as a check of the remainder's angular rule
        if not ang.discrete and len(w_fixed):
            d2, w2 = ang.rule(2 * cfg.angular_points, extra_breaks, mask)
            d2, w2 = d2[w2 != 0], w2[w2 != 0]
            rem2 = np.sum(w2 * np.asarray(coef(d2), float)
                          * _remainder_power(np.exp(lo_fn(d2)), kpow, beta))
            error += abs(float(rem2) - float(np.sum(w_fixed * rem)))

    if to_infinity:
        limit, osc = tail
        live = w_fixed != 0
        dirs_fixed, w_fixed = dirs_fixed[live], w_fixed[live]
        lim = _resolve(limit, dirs_fixed)
        rstart = np.maximum(RT, np.exp(lo_fn(dirs_fixed)))
        tw = rstart ** (-beta) / beta
        value += float(np.sum(w_fixed * lim * tw))
        error += float(abs(osc) * np.sum(np.abs(w_fixed) * tw))

    return QuadResult(value, error)
