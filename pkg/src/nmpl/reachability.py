"""Support-translation sets on a grid.

Starting from a seed ``A_0 = {x0}``, each step adds ``x + supp(mu_x)`` for
every newly reached ``x``.  Supports are discretized per cell offset, so the
iteration is a repeated dilation of the frontier by the offset mask.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .measures import AxisCharging, MeasureLike, MeasureSpec, PushForward, measure_at


@dataclass(frozen=True)
class BoxGrid:
    """Nodes ``lower + i h`` of a box, ``shape[k]`` nodes along axis ``k``."""

    lower: tuple
    upper: tuple
    shape: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        sh = tuple(int(v) for v in np.atleast_1d(self.shape))
        if not (len(lo) == len(hi) == len(sh)):
            raise ValueError("lower, upper and shape must have equal length")
        if any(n < 2 for n in sh) or any(b <= a for a, b in zip(lo, hi)):
            raise ValueError("need at least two nodes per axis and upper > lower")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "shape", sh)

    @property
    def dim(self):
        return len(self.shape)

    @property
    def h(self):
        return np.array([(b - a) / (n - 1) for a, b, n in zip(self.lower, self.upper, self.shape)])

    def axes(self):
        return [np.linspace(a, b, n) for a, b, n in zip(self.lower, self.upper, self.shape)]

    def points(self):
        """Node coordinates of shape ``shape + (dim,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), -1)

    def index_of(self, x, tol=1e-9):
        """Index of the node at ``x``; raises if ``x`` is not a node."""
        x = np.atleast_1d(np.asarray(x, float))
        k = (x - np.asarray(self.lower)) / self.h
        idx = np.rint(k).astype(int)
        if np.any(np.abs(k - idx) > tol) or np.any(idx < 0) or np.any(idx >= self.shape):
            raise ValueError(f"seed {x} is not a grid node")
        return tuple(idx.tolist())

    def offsets(self):
        """Integer offsets ``k`` with ``|k_i| <= n_i - 1``, as an array ``(..., dim)``."""
        rng = [np.arange(-(n - 1), n) for n in self.shape]
        return np.stack(np.meshgrid(*rng, indexing="ij"), -1)


def _segment_hits_cells(m: AxisCharging, k, h):
    """Closed cells ``k h + [-h/2, h/2]^2`` met by one of the charged lines."""
    c = k * h
    hit = np.zeros(k.shape[:-1], bool)
    for d in m.lines():
        cross = c[..., 0] * d[1] - c[..., 1] * d[0]
        reach = 0.5 * (h[0] * abs(d[1]) + h[1] * abs(d[0]))
        hit |= np.abs(cross) <= reach * (1 + 1e-12)
    return hit


def support_mask(m: MeasureSpec, grid: BoxGrid, x=None, samples_per_cell=4):
    """Offsets ``k`` whose cell lies in ``supp(mu_x)``.

    A cell is marked when its center ``k h`` is in the support.  Charged
    lines have no interior, so for them a cell is marked when the line meets
    the closed cell.  For push-forward kernels the base support is sampled at
    spacing ``h / samples_per_cell`` and its images ``j(x, z)`` are binned.
    The zero offset is never marked.

    Returns
    -------
    ndarray of bool
        Shape ``2 n_i - 1`` per axis, centered on the zero offset.
    """
    m = measure_at(m, x)
    k = grid.offsets()
    h = grid.h
    if isinstance(m, PushForward):
        mask = np.zeros(k.shape[:-1], bool)
        x = np.zeros(grid.dim) if x is None else np.asarray(x, float)
        span = (np.asarray(grid.shape) - 1) * h
        reach = span / max(m.jump.c0, 1e-12) if m.jump.c0 > 0 else span
        axes = [np.arange(-r, r + hk / (2 * samples_per_cell), hk / samples_per_cell)
                for r, hk in zip(reach, h)]
        z = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, grid.dim)
        img = m.image_points(x, z)
        idx = np.rint(img / h).astype(int)
        ok = np.all(np.abs(idx) <= np.asarray(grid.shape) - 1, axis=1)
        idx = idx[ok] + (np.asarray(grid.shape) - 1)
        mask[tuple(idx.T)] = True
    elif isinstance(m, AxisCharging):
        mask = _segment_hits_cells(m, k, h)
    else:
        mask = np.asarray(m.support(k * h), bool)
    mask[tuple(np.asarray(grid.shape) - 1)] = False
    return mask


@dataclass
class ReachabilityResult:
    """Reached cells, the step at which each was first reached, and status.

    ``first_reach`` is ``-1`` for unreached cells and ``0`` for the seed;
    ``iterations`` counts the steps that added cells.
    """

    mask: np.ndarray
    first_reach: np.ndarray
    iterations: int
    converged: bool
    grid: BoxGrid

    def rows(self):
        """Rows ``coords..., reached, first_reach``."""
        pts = self.grid.points().reshape(-1, self.grid.dim)
        for p, r, it in zip(pts, self.mask.ravel(), self.first_reach.ravel()):
            yield [*p, int(r), int(it)]


def _constant_family(family):
    return isinstance(family, MeasureSpec)


def _dilate(frontier, kernel, shape):
    """Cells ``i + k`` with ``i`` in the frontier and ``k`` in the kernel."""
    full = fftconvolve(frontier.astype(float), kernel.astype(float), mode="full")
    sl = tuple(slice(n - 1, 2 * n - 1) for n in shape)
    return full[sl] > 0.5


def iterate_reachable(family: MeasureLike, x0, grid: BoxGrid, restrict_to_omega=False,
                      omega=None, max_iter=None, samples_per_cell=4) -> ReachabilityResult:
    """Least fixpoint of ``A -> A ∪ (A + supp mu)`` on the grid, from ``x0``.

    Parameters
    ----------
    family : MeasureSpec or callable x -> MeasureSpec
    x0 : array_like
        Seed, a grid node.
    omega : ndarray of bool, optional
        Cells of the domain. With ``restrict_to_omega`` only these cells
        generate translates; reached exterior cells stay marked.
    max_iter : int, optional
        Step limit, ``converged`` is False if it is hit first.
    """
    shape = grid.shape
    seed = grid.index_of(x0)
    if restrict_to_omega:
        if omega is None:
            raise ValueError("restrict_to_omega needs an omega mask")
        omega = np.asarray(omega, bool)
        if omega.shape != shape:
            raise ValueError("omega mask and grid differ in shape")
    max_iter = int(np.prod(shape)) + 1 if max_iter is None else int(max_iter)
    mask = np.zeros(shape, bool)
    first = np.full(shape, -1, int)
    mask[seed] = True
    first[seed] = 0
    frontier = mask.copy()
    const = _constant_family(family)
    kernel = support_mask(family, grid, None, samples_per_cell) if const else None
    pts = grid.points()
    cache = {}
    it = 0
    converged = False
    while True:
        gen = frontier & omega if restrict_to_omega else frontier
        if const:
            new = _dilate(gen, kernel, shape) if gen.any() else np.zeros(shape, bool)
        else:
            new = np.zeros(shape, bool)
            for idx in zip(*np.nonzero(gen)):
                mx = measure_at(family, pts[idx])
                try:
                    key = (mx, idx) if isinstance(mx, PushForward) else mx
                    ker = cache.get(key)
                except TypeError:
                    key, ker = None, None
                if ker is None:
                    ker = support_mask(mx, grid, pts[idx], samples_per_cell)
                    if key is not None:
                        cache[key] = ker
                sl = tuple(slice(n - 1 - i, 2 * n - 1 - i) for n, i in zip(shape, idx))
                new |= ker[sl]
        added = new & ~mask
        if not added.any():
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        mask |= added
        first[added] = it
        frontier = added
    return ReachabilityResult(mask, first, it, converged, grid)


def covers_domain(r: ReachabilityResult, omega_mask):
    """Whether every domain cell was reached, and the unreached ones.

    Returns
    -------
    (bool, list of tuple)
        The flag and the indices of the uncovered domain cells.
    """
    omega_mask = np.asarray(omega_mask, bool)
    if omega_mask.shape != r.mask.shape:
        raise ValueError("masks do not share a grid")
    missing = omega_mask & ~r.mask
    return (not missing.any()), [tuple(int(v) for v in i) for i in zip(*np.nonzero(missing))]
