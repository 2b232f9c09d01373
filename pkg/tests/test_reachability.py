import numpy as np
import pytest

from nmpl.measures import (AxisCharging, ConeRestricted, HalfSpaceStable, JumpMap, PushForward,
                           RadialStable)
from nmpl.reachability import BoxGrid, covers_domain, iterate_reachable, support_mask

from oracles import OFFSET_PREDICATES as PREDICATES
from oracles import allowed_offsets as allowed
from oracles import bfs_reach, lattice_offsets


def box(n, dim=2):
    return BoxGrid((-1.0,) * dim, (1.0,) * dim, (n,) * dim)


MEASURES = {
    "radial": lambda d: RadialStable(1.5, d),
    "half_space": lambda d: HalfSpaceStable(1.5, d),
    "cone": lambda d: ConeRestricted(RadialStable(1.5, 2), 1.0),
    "two_axis": lambda d: AxisCharging(1.0, 1.5),
    "one_axis": lambda d: AxisCharging(0.0, 1.5),
}


# -- support masks -----------------------------------------------------------------

@pytest.mark.parametrize("name", list(PREDICATES))
def test_support_mask_matches_definition(name):
    g = box(9)
    mask = support_mask(MEASURES[name](2), g)
    want = np.zeros_like(mask)
    for k in lattice_offsets(g.shape):
        want[tuple(k + 8)] = PREDICATES[name](k)
    assert np.array_equal(mask, want)


def test_support_mask_never_marks_zero():
    g = box(5, 1)
    assert not support_mask(RadialStable(1.0, 1), g)[4]


def test_scaled_push_forward_keeps_support():
    g = box(9)
    base = HalfSpaceStable(1.5, 2)
    pf = PushForward(base, JumpMap.scaled(0.5))
    assert np.array_equal(support_mask(pf, g, np.zeros(2)), support_mask(base, g))


# -- fixpoint vs breadth-first oracle ---------------------------------------------

@pytest.mark.parametrize("name", list(PREDICATES))
@pytest.mark.parametrize("n", [9, 17, 33])
def test_iterate_matches_bfs_2d(name, n):
    g = box(n)
    steps = allowed(g.shape, PREDICATES[name])
    rng = np.random.default_rng(n)
    for _ in range(2):
        idx = tuple(rng.integers(0, n, 2))
        x0 = g.points()[idx]
        r = iterate_reachable(MEASURES[name](2), x0, g)
        want = bfs_reach(idx, g.shape, lambda i: steps)
        assert r.converged
        assert np.array_equal(r.mask, want)


@pytest.mark.parametrize("name", ["radial", "half_space"])
def test_iterate_matches_bfs_1d_and_3d(name):
    for g in (box(33, 1), box(7, 3)):
        steps = allowed(g.shape, PREDICATES[name])
        idx = tuple(np.array(g.shape) // 3)
        r = iterate_reachable(MEASURES[name](g.dim), g.points()[idx], g)
        assert np.array_equal(r.mask, bfs_reach(idx, g.shape, lambda i: steps))


def test_x_dependent_family_matches_bfs():
    g = box(17)
    pts = g.points()

    def family(x):
        return HalfSpaceStable(1.5, 2, axis=0 if x[1] >= 0 else 1)

    up = allowed(g.shape, lambda k: k[0] >= 0)
    right = allowed(g.shape, lambda k: k[1] >= 0)
    idx = (12, 3)
    r = iterate_reachable(family, pts[idx], g)
    want = bfs_reach(idx, g.shape, lambda i: up if pts[i][1] >= 0 else right)
    assert np.array_equal(r.mask, want)


def test_restricted_to_omega_matches_bfs():
    g = box(17)
    pts = g.points()
    omega = np.linalg.norm(pts, axis=-1) < 0.7
    steps = allowed(g.shape, PREDICATES["cone"])
    idx = (8, 8)
    r = iterate_reachable(MEASURES["cone"](2), pts[idx], g, restrict_to_omega=True, omega=omega)
    want = bfs_reach(idx, g.shape, lambda i: steps, generates=lambda i: omega[i])
    assert np.array_equal(r.mask, want)
    # exterior cells reached from inside stay marked
    assert np.any(r.mask & ~omega)


# -- examples ------------------------------------------------------------------------

def test_full_support_one_step():
    g = box(11)
    r = iterate_reachable(RadialStable(0.7, 2), [0.2, -0.4], g)
    assert r.mask.all() and r.iterations == 1 and r.converged
    assert covers_domain(r, np.ones(g.shape, bool)) == (True, [])


def test_half_line():
    g = BoxGrid((-1.0,), (1.0,), (21,))
    r = iterate_reachable(HalfSpaceStable(1.5, 1), [0.0], g)
    x = g.axes()[0]
    assert np.array_equal(r.mask, x >= -1e-12)
    assert r.converged and r.iterations <= 21
    ok, missing = covers_domain(r, np.ones(21, bool))
    assert not ok and missing == [(i,) for i in range(10)]


def test_two_axis_covers_plane():
    g = box(33)
    r = iterate_reachable(AxisCharging(1.0, 1.5), [0.0, 0.0], g)
    assert r.mask.all()


def test_disconnected_omega_reached_across_gap():
    g = BoxGrid((-1.0,), (1.0,), (21,))
    omega = np.abs(g.axes()[0]) >= 0.5
    r = iterate_reachable(RadialStable(1.5, 1), [-0.8], g, restrict_to_omega=True, omega=omega)
    assert covers_domain(r, omega)[0]


def test_max_iter_flags_nonconvergence():
    g = box(17)
    family = lambda x: HalfSpaceStable(1.5, 2, axis=0 if x[1] >= 0 else 1)
    full = iterate_reachable(family, g.points()[12, 3], g)
    assert full.iterations >= 2
    cut = iterate_reachable(family, g.points()[12, 3], g, max_iter=full.iterations - 1)
    assert not cut.converged
    assert np.all(full.mask[cut.mask]) and cut.mask.sum() < full.mask.sum()


def test_first_reach_consistent():
    g = box(17)
    family = lambda x: HalfSpaceStable(1.5, 2, axis=0 if x[1] >= 0 else 1)
    r = iterate_reachable(family, g.points()[12, 3], g)
    assert r.first_reach[12, 3] == 0
    assert np.array_equal(r.mask, r.first_reach >= 0)
    assert r.first_reach.max() == r.iterations
    rows = list(r.rows())
    assert len(rows) == 17 * 17 and sum(row[2] for row in rows) == r.mask.sum()


def test_errors():
    g = box(5)
    with pytest.raises(ValueError):
        iterate_reachable(RadialStable(1.5, 2), [0.1, 0.0], g)
    with pytest.raises(ValueError):
        iterate_reachable(RadialStable(1.5, 2), [0.0, 0.0], g, restrict_to_omega=True)
    with pytest.raises(ValueError):
        covers_domain(iterate_reachable(RadialStable(1.5, 2), [0.0, 0.0], g), np.ones((4, 4)))
    with pytest.raises(ValueError):
        BoxGrid((0.0,), (1.0,), (1,))
