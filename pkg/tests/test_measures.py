import warnings

import numpy as np
import pytest
from scipy import integrate as si

from nmpl.errors import DegenerateFitError, DivergenceError, EmptyConeWarning, PreconditionError
from nmpl.measures import (AxisCharging, ConeRestricted, ConeSpec, HalfSpaceStable, JumpMap,
                           PushForward, RadialStable, ZeroOrderDirectional, cone_weighted_mass,
                           density_at, mc_scaling_probe, measure_bound)
from nmpl.quadrature import AngularMeasure, QuadratureConfig


# -- oracles -----------------------------------------------------------------

def radial_2d(f, beta, r0, r1, theta_lo=0.0, theta_hi=2 * np.pi):
    """Polar double integral of f(r, theta) r^{-(2+beta)} r dr dtheta with scipy."""
    val, _ = si.dblquad(lambda r, th: f(r, th) * r ** (-1 - beta), theta_lo, theta_hi,
                        lambda th: r0(th) if callable(r0) else r0,
                        lambda th: r1(th) if callable(r1) else r1, epsabs=1e-13, epsrel=1e-11)
    return val


# -- density -----------------------------------------------------------------

def test_density_examples():
    assert density_at(RadialStable(1.5, 1), [2.0]) == pytest.approx(2 ** -2.5, rel=1e-15)
    assert density_at(HalfSpaceStable(1.5, 2), [-1.0, 0.0]) == 0.0
    assert density_at(RadialStable(1.0, 1), [1.0]) == 1.0


def test_density_at_origin_raises():
    with pytest.raises(ValueError):
        density_at(RadialStable(1.5, 1), [0.0])


def test_density_support_consistency():
    rng = np.random.default_rng(1)
    z = rng.normal(size=(500, 2))
    for m in (RadialStable(1.3, 2), HalfSpaceStable(1.3, 2), ConeRestricted(RadialStable(1.3, 2), 1.0),
              AxisCharging(1.0, 1.3)):
        d = np.array([density_at(m, zz) for zz in z])
        assert np.all(d >= 0)
        assert np.all(m.support(z)[d > 0])


def test_constructor_ranges():
    for beta in (0.0, -1.0):
        with pytest.raises(ValueError):
            RadialStable(beta, 1)
    # beta >= 2 is representable; the bound detects the divergent moment
    with pytest.raises(DivergenceError):
        measure_bound(RadialStable(2.0, 1))
    with pytest.raises(ValueError):
        AxisCharging(1.0, 1.5, 3)


# -- measure_bound -----------------------------------------------------------

def test_bound_radial_closed_form():
    bd = measure_bound(RadialStable(1.5, 1))
    assert bd.value == pytest.approx(4 + 4 / 3, abs=1e-10)
    assert bd.near == pytest.approx(4.0, abs=1e-10)
    assert bd.far == pytest.approx(4 / 3, abs=1e-10)
    assert bd.passes and bd.applicable


def test_bound_half_space():
    assert measure_bound(HalfSpaceStable(1.5, 1)).value == pytest.approx(2 + 2 / 3, abs=1e-10)


def test_bound_zero_order_pair():
    bd = measure_bound(ZeroOrderDirectional(None, 1))
    assert not bd.applicable
    assert bd.far == pytest.approx(2.0, abs=1e-10)
    assert bd.near == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("beta", [0.5, 1.0, 1.5, 1.9])
def test_bound_radial_2d_vs_closed_form(beta):
    # 2 pi (1/(2 - beta) + 1/beta) for the planar kernel |z|^{-(2+beta)}
    want = 2 * np.pi * (1 / (2 - beta) + 1 / beta)
    assert measure_bound(RadialStable(beta, 2)).value == pytest.approx(want, rel=1e-9)


def test_bound_cone_restricted_vs_scipy():
    m = ConeRestricted(RadialStable(1.5, 2), 1.0)
    # |z1| > |z2| is the union of two quarter-plane wedges
    near = 2 * radial_2d(lambda r, th: r ** 2, 1.5, 0, 1, -np.pi / 4, np.pi / 4)
    far = 2 * radial_2d(lambda r, th: 1.0, 1.5, 1, np.inf, -np.pi / 4, np.pi / 4)
    bd = measure_bound(m)
    assert bd.near == pytest.approx(near, rel=1e-8)
    assert bd.far == pytest.approx(far, rel=1e-8)


def test_bound_axis_charging_lines():
    # two lines, each with 1-d density |s|^{-(1+beta)}: 2 * (2/(2-beta) + 2/beta)
    beta = 1.5
    assert measure_bound(AxisCharging(1.0, beta)).value == pytest.approx(
        2 * (2 / (2 - beta) + 2 / beta), rel=1e-10)
    assert measure_bound(AxisCharging(0.0, beta)).value == pytest.approx(
        2 / (2 - beta) + 2 / beta, rel=1e-10)


def test_bound_reflection_invariant():
    for m in (RadialStable(1.2, 2), AxisCharging(0.7, 1.2), ConeRestricted(RadialStable(1.2, 2), 0.5)):
        flipped = PushForward(m, JumpMap(lambda x, z: -z, 1.0, True))
        assert measure_bound(flipped, x=np.zeros(2)).value == pytest.approx(
            measure_bound(m).value, rel=1e-10)


# -- cone masses ---------------------------------------------------------------

def test_cone_mass_1d_examples():
    c = ConeSpec([1.0], 0.5, 100.0)
    assert cone_weighted_mass(RadialStable(1.5, 1), c, "proj").value == pytest.approx(0.4, rel=1e-10)
    assert cone_weighted_mass(HalfSpaceStable(1.5, 1), c, "proj").value == pytest.approx(0.2, rel=1e-10)


@pytest.mark.parametrize("beta,p,gamma", [(1.2, 0.7, 10.0), (1.5, 1.0, 100.0), (1.8, 2.0, 1e3)])
def test_cone_mass_1d_closed_form(beta, p, gamma):
    want = 2 * p ** beta * gamma ** (beta - 2) / (2 - beta)
    got = cone_weighted_mass(RadialStable(beta, 1), ConeSpec([p], 0.5, gamma), "proj").value
    assert got == pytest.approx(want, rel=1e-9)


def test_cone_mass_2d_vs_scipy():
    beta, eta, gamma = 1.3, 0.5, 20.0
    p = np.array([0.6, 0.8])
    a = np.arctan2(p[1], p[0])
    h = np.arccos(1 - eta)
    pn = np.linalg.norm(p)
    lim = lambda th: 1 / (gamma * pn * abs(np.cos(th - a)))
    want = 0.0
    for centre in (a, a + np.pi):
        want += radial_2d(lambda r, th: (r * pn * np.cos(th - a)) ** 2, beta, 0, lim,
                          centre - h, centre + h)
    got = cone_weighted_mass(RadialStable(beta, 2), ConeSpec(p, eta, gamma), "proj").value
    assert got == pytest.approx(want, rel=1e-8)


@pytest.mark.filterwarnings("ignore::nmpl.errors.EmptyConeWarning")
def test_cone_mass_monotone_in_gamma_and_eta():
    m = RadialStable(1.4, 2)
    p = [1.0, 0.3]
    gam = [cone_weighted_mass(m, ConeSpec(p, 0.3, g)).value for g in (1, 3, 10, 30, 100)]
    assert np.all(np.diff(gam) <= 0)
    et = [cone_weighted_mass(m, ConeSpec(p, e, 10.0)).value for e in (0.0, 0.2, 0.5, 0.9)]
    assert np.all(np.diff(et) >= 0)


def test_cone_mass_empty_cone_warns():
    m = AxisCharging(0.0, 1.5)   # charges z1 = 0 only
    with pytest.warns(EmptyConeWarning):
        assert cone_weighted_mass(m, ConeSpec([1.0, 0.0], 0.5, 10.0)).value == 0.0


def test_identity_push_forward_matches_base():
    base = RadialStable(1.5, 2)
    pf = PushForward(base, JumpMap.identity())
    c = ConeSpec([1.0, 1.0], 0.5, 10.0)
    x = np.zeros(2)
    assert cone_weighted_mass(pf, c, x=x).value == pytest.approx(
        cone_weighted_mass(base, c).value, rel=1e-9)
    assert measure_bound(pf, x=x).value == pytest.approx(measure_bound(base).value, rel=1e-10)


def test_scaled_push_forward_cone_mass():
    # j = k z: |p.kz|^2 on the cone of the image equals k^{beta} times the base mass
    k, beta = 0.5, 1.5
    pf = PushForward(RadialStable(beta, 1), JumpMap.scaled(k))
    c = ConeSpec([1.0], 0.5, 50.0)
    got = cone_weighted_mass(pf, c, x=np.zeros(1)).value
    assert got == pytest.approx(k ** beta * cone_weighted_mass(RadialStable(beta, 1), c).value,
                                rel=1e-9)


def test_cone_scaling_identity():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(2000, 2)) * 0.05
    p = [0.3, -1.0]
    for g in (2.0, 7.0, 40.0):
        assert np.array_equal(ConeSpec(p, 0.4, g).contains(z), ConeSpec(p, 0.4, 1.0).contains(g * z))


def test_cone_spec_preconditions():
    with pytest.raises(PreconditionError):
        ConeSpec([0.0, 0.0])
    with pytest.raises(PreconditionError):
        ConeSpec([1.0], eta=1.0)


# -- scaling probe -----------------------------------------------------------

def test_scaling_probe_1d():
    fit = mc_scaling_probe(RadialStable(1.5, 1), [1.0])
    assert fit.slope == pytest.approx(-0.5, abs=1e-8)
    assert fit.constant == pytest.approx(4.0, rel=1e-7)


def test_scaling_probe_2d():
    fit = mc_scaling_probe(RadialStable(1.2, 2), [1.0, 0.0], 0.5)
    assert fit.slope == pytest.approx(-0.8, abs=0.01)


def test_scaling_probe_degenerate():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyConeWarning)
        with pytest.raises(DegenerateFitError):
            mc_scaling_probe(AxisCharging(0.0, 1.5), [1.0, 0.0])
    with pytest.raises(DegenerateFitError):
        mc_scaling_probe(RadialStable(1.5, 1), [1.0], gammas=[10, 20, 50])


# -- jump maps -----------------------------------------------------------------

def test_jump_map_lipschitz_check():
    rng = np.random.default_rng(3)
    xs, zs = rng.normal(size=(20, 2)), rng.normal(size=(50, 2)) * 0.5
    good = JumpMap(lambda x, z: z * (1 + 0.2 * np.sin(x[0])), 1.2)
    assert good.check(xs, zs) == []
    bad = JumpMap(lambda x, z: 3 * z, 1.0)
    assert {v[0] for v in bad.check(xs, zs)} == {"size"}


def test_angular_measure_needs_plane_for_density():
    with pytest.raises(NotImplementedError):
        AngularMeasure(3, density=lambda w: 1.0)


def test_quadrature_tolerance_respected():
    q = QuadratureConfig(rtol=1e-6)
    bd = measure_bound(RadialStable(1.7, 2), q)
    want = 2 * np.pi * (1 / 0.3 + 1 / 1.7)
    assert abs(bd.value - want) <= max(bd.error, 1e-6 * want)
