import numpy as np
import pytest
from scipy import integrate as si
from scipy.special import gamma as Gamma

from nmpl.errors import PreconditionError, TailUnintegrableError
from nmpl.fields import GridField, constant, cosine, gaussian, lincomb, linear, quadratic
from nmpl.measures import (HalfSpaceStable, JumpMap, PushForward, RadialStable,
                           ZeroOrderDirectional)
from nmpl.operators import (NonlinearitySpec, NonlocalConfig, PucciParams, directional_operator,
                            ellipticity_probe, eval_compensated, eval_F, eval_levy_ito,
                            eval_zero_order, pucci_minus, pucci_plus)


# -- oracles -----------------------------------------------------------------

def symbol_1d(beta):
    """int (cos z - 1) |z|^{-1-beta} dz over R, by scipy quad (oracle route)."""
    # (cos z - 1) / z^2 = -sinc-like and smooth; the weight z^{1-beta} carries the singularity
    smooth = lambda z: -0.5 if z == 0 else -2 * np.sin(z / 2) ** 2 / z ** 2
    near, _ = si.quad(smooth, 0, 1, weight="alg", wvar=(1 - beta, 0), epsabs=1e-14)
    osc, _ = si.quad(lambda z: z ** (-1 - beta), 1, np.inf, weight="cos", wvar=1.0)
    mass = 1 / beta
    return 2 * (near + osc - mass)


def symbol_closed(beta):
    """2 Gamma(-beta) cos(pi beta / 2): the same integral in closed form."""
    return 2 * Gamma(-beta) * np.cos(np.pi * beta / 2)


def test_oracles_agree():
    for beta in (0.5, 1.2, 1.5, 1.8):
        assert symbol_1d(beta) == pytest.approx(symbol_closed(beta), rel=1e-8)
    assert symbol_1d(1.0) == pytest.approx(-np.pi, rel=1e-9)


def within_certified(v, want, cap):
    """|value - want| is below the reported error bound and below ``cap``."""
    diff = abs((v.total if hasattr(v, "total") else v.value) - want)
    assert diff <= v.error + 1e-12, (diff, v.error)
    assert diff <= cap, diff


# -- compensated operator ----------------------------------------------------

def test_cos_beta_one_at_origin():
    v = eval_compensated(cosine(), [0.0], 0.0, RadialStable(1.0, 1))
    within_certified(v, -np.pi, 1e-5)


@pytest.mark.parametrize("beta", [0.6, 1.2, 1.5, 1.9])
@pytest.mark.parametrize("x", [0.0, 0.4, 2.0])
def test_cos_is_eigenfunction(beta, x):
    v = eval_compensated(cosine(), [x], 0.0, RadialStable(beta, 1))
    # oscillating tails beyond the truncation radius decay like R^{-beta}
    within_certified(v, symbol_1d(beta) * np.cos(x), 3 * 1e3 ** -beta)


def test_wave_number_scaling():
    # cos(k y) picks up |k|^beta
    beta, k = 1.3, 2.5
    v = eval_compensated(cosine(k), [0.3], 0.0, RadialStable(beta, 1)).total
    assert v == pytest.approx(abs(k) ** beta * symbol_1d(beta) * np.cos(0.3 * k), rel=1e-8)


def test_split_does_not_change_total():
    u, m = cosine(1.0, 1.0, 0.3), RadialStable(1.5, 1)
    tot = [eval_compensated(u, [0.2], 0.0, m, NonlocalConfig(d)).total for d in (0.1, 0.5, 0.9)]
    assert np.ptp(tot) < 1e-9
    a = eval_compensated(u, [0.2], 0.0, m, NonlocalConfig(0.1))
    b = eval_compensated(u, [0.2], 0.0, m, NonlocalConfig(0.9))
    assert a.first != b.first


def test_constant_gives_zero():
    v = eval_compensated(constant(3.0, 2), [0.1, 0.2], 0.0, RadialStable(1.5, 2))
    assert v.total == 0.0


def test_quadratic_tail_unintegrable():
    with pytest.raises(TailUnintegrableError):
        eval_compensated(quadratic([[2.0]]), [0.0], 0.0, RadialStable(1.5, 1))


def test_linear_against_symmetric_measure():
    # linear growth integrates against the tail once beta > 1
    assert eval_compensated(linear([1.0]), [0.3], 0.0, RadialStable(1.5, 1)).total == \
        pytest.approx(0.0, abs=1e-12)
    with pytest.raises(TailUnintegrableError):
        eval_compensated(linear([1.0]), [0.3], 0.0, RadialStable(0.5, 1))


def test_half_space_cos():
    # half of the kernel: real part halves, the odd part survives
    beta, x = 1.5, 0.7
    full = eval_compensated(cosine(), [x], 0.0, RadialStable(beta, 1)).total
    half = eval_compensated(cosine(), [x], 0.0, HalfSpaceStable(beta, 1))
    # odd part: -sin x int_0^inf (sin z - z 1_{z<1}) z^{-1-beta} dz
    n1, _ = si.quad(lambda z: (np.sin(z) - z) * z ** (-1 - beta), 0, 1, epsabs=1e-14)
    n2, _ = si.quad(lambda z: z ** (-1 - beta), 1, np.inf, weight="sin", wvar=1.0)
    odd = -np.sin(x) * (n1 + n2)
    within_certified(half, 0.5 * full + odd, 1e-6)


def test_radial_2d_cos_vs_scipy():
    beta, x = 1.5, np.array([0.2, -0.4])
    m = RadialStable(beta, 2)
    u = cosine([1.0, 0.0])

    def integrand(r, th):
        return -2 * np.sin(0.5 * r * np.cos(th)) ** 2 * r ** (-1 - beta)

    near, _ = si.dblquad(integrand, 0, 2 * np.pi, 0, 1, epsabs=1e-12)
    # beyond r = 1 integrate cos(r cos th) against r^{-1-beta} with the oscillatory weight
    far = si.quad(lambda th: si.quad(lambda r: r ** (-1 - beta), 1, np.inf, weight="cos",
                                     wvar=abs(np.cos(th)))[0] if abs(np.cos(th)) > 1e-12
                  else 1 / beta, 0, 2 * np.pi, limit=200, epsabs=1e-11)[0]
    sym = near + far - 2 * np.pi / beta
    v = eval_compensated(u, x, 0.0, m).total
    assert v == pytest.approx(sym * np.cos(x[0]), rel=1e-6)


def test_gaussian_against_scipy():
    beta, x = 1.2, 0.3
    u = gaussian(0.0, 0.7)
    f = lambda y: np.exp(-y * y / (2 * 0.49))
    fp = -x / 0.49 * f(x)
    a, _ = si.quad(lambda z: (f(x + z) - f(x) - fp * z) * abs(z) ** (-1 - beta), -1, 1,
                   points=[0.0], epsabs=1e-13, limit=200)
    b1, _ = si.quad(lambda z: (f(x + z) - f(x)) * z ** (-1 - beta), 1, np.inf, epsabs=1e-13)
    b2, _ = si.quad(lambda z: (f(x - z) - f(x)) * z ** (-1 - beta), 1, np.inf, epsabs=1e-13)
    want = a + b1 + b2
    assert eval_compensated(u, [x], 0.0, RadialStable(beta, 1)).total == pytest.approx(want, abs=1e-8)


def test_grid_field_input_close_to_smooth():
    n = 512
    g = GridField.from_function(lambda y, t: np.cos(y[..., 0]), [0.0], [2 * np.pi], n, periodic=True)
    v = eval_compensated(g, [g.axes()[0][37]], 0.0, RadialStable(1.0, 1)).total
    assert v == pytest.approx(-np.pi * np.cos(g.axes()[0][37]), abs=2e-3)


def test_dimension_mismatch():
    with pytest.raises(PreconditionError):
        eval_compensated(cosine(), [0.0, 1.0], 0.0, RadialStable(1.5, 1))


# -- Lévy-Itô ----------------------------------------------------------------

def test_levy_ito_identity_reduces():
    m = RadialStable(1.5, 1)
    pf = PushForward(m, JumpMap.identity())
    u = cosine(1.0, 1.0, 0.4)
    assert eval_levy_ito(u, [0.3], 0.0, pf).total == pytest.approx(
        eval_compensated(u, [0.3], 0.0, m).total, abs=1e-9)


def test_levy_ito_half_jumps():
    pf = PushForward(RadialStable(1.0, 1), JumpMap.scaled(0.5))
    within_certified(eval_levy_ito(cosine(), [0.0], 0.0, pf), -np.pi / 2, 1e-5)


def test_levy_ito_linear_odd_jump():
    jump = JumpMap(lambda x, z: z * (1 + 0.3 * np.cos(x[0])), 1.3, True)
    pf = PushForward(RadialStable(1.5, 1), jump)
    assert eval_levy_ito(linear([2.0]), [0.8], 0.0, pf).total == pytest.approx(0.0, abs=1e-10)


def test_levy_ito_x_dependent_vs_scipy():
    # j(x, z) = s(x) z with s(x) = 1 + x^2 / 4, u = cos: the compensator in z
    x, beta = 0.6, 1.4
    s = 1 + x * x / 4
    jump = JumpMap(lambda xx, z: (1 + xx[0] ** 2 / 4) * z, 1.5, True)
    pf = PushForward(RadialStable(beta, 1), jump)
    near, _ = si.quad(lambda z: (np.cos(x + s * z) - np.cos(x) + np.sin(x) * s * z)
                      * abs(z) ** (-1 - beta), -1, 1, points=[0.0], epsabs=1e-13, limit=200)
    tail = 2 * (-np.cos(x)) / beta
    c1, _ = si.quad(lambda z: z ** (-1 - beta), 1, np.inf, weight="cos", wvar=s)
    # cos(x + s z) + cos(x - s z) = 2 cos x cos(s z)
    want = near + tail + 2 * np.cos(x) * c1
    within_certified(eval_levy_ito(cosine(), [x], 0.0, pf), want, 1e-6)


def test_levy_ito_needs_push_forward():
    with pytest.raises(PreconditionError):
        eval_levy_ito(cosine(), [0.0], 0.0, RadialStable(1.0, 1))


# -- zero-order operator -----------------------------------------------------

def test_zero_order_cos():
    v = eval_zero_order(cosine(), [0.0], 0.0, ZeroOrderDirectional(None, 1))
    within_certified(v, -np.pi, 1e-5)


def test_zero_order_constant_and_odd():
    m = ZeroOrderDirectional(None, 1)
    assert float(eval_zero_order(constant(2.0), [0.4], 0.0, m)) == 0.0
    odd = cosine(1.0, 1.0, -np.pi / 2)   # sin(y), odd about 0
    assert float(eval_zero_order(odd, [0.0], 0.0, m)) == pytest.approx(0.0, abs=1e-10)


def test_zero_order_2d_vs_scipy():
    # g(w) = 1 + 0.5 w1^2 (even), u = cos(y1): int (cos z1 - 1) g |z|^{-3} dz
    m = ZeroOrderDirectional(lambda w: 1 + 0.5 * w[..., 0] ** 2, 2)
    x = np.array([0.3, 0.0])

    def inner(th):
        c = np.cos(th)
        g = 1 + 0.5 * c * c
        if abs(c) < 1e-12:
            return 0.0
        a, _ = si.quad(lambda r: -2 * np.sin(r * c / 2) ** 2 * r ** -2 if r else -0.5 * c * c,
                       0, 1, epsabs=1e-13)
        b, _ = si.quad(lambda r: r ** -2, 1, np.inf, weight="cos", wvar=abs(c))
        return g * (a + b - 1.0)

    sym, _ = si.quad(inner, 0, 2 * np.pi, limit=200, epsabs=1e-11)
    v = float(eval_zero_order(cosine([1.0, 0.0]), x, 0.0, m))
    assert v == pytest.approx(sym * np.cos(x[0]), rel=1e-6)


# -- Pucci -------------------------------------------------------------------

def test_pucci_examples():
    p = PucciParams(1.0, 3.0)
    assert pucci_plus(np.zeros((2, 2)), p) == 0.0
    assert pucci_plus(np.eye(2), p) == pytest.approx(6.0)
    assert pucci_plus(np.diag([2.0, -1.0]), p) == pytest.approx(5.0)
    assert pucci_minus(np.diag([2.0, -1.0]), p) == pytest.approx(2.0 - 3.0)


def test_pucci_params_range():
    with pytest.raises(ValueError):
        PucciParams(2.0, 1.0)


# -- nonlinearities ----------------------------------------------------------

def test_eval_F_examples():
    assert eval_F(NonlinearitySpec("pure_nonlocal"), [0.0], 0.0, [0.0], [[0.0]], 2.0) == -2.0
    gi = NonlinearitySpec("growing_interface", 2)
    assert eval_F(gi, [0, 0], 0.0, [1.0, 0.0], np.eye(2), 0.5) == 0.0
    ql = NonlinearitySpec("quasilinear", 2)
    assert eval_F(ql, [0, 0], 0.0, [0.0, 0.0], np.eye(2), 0.0) == -2.0


def test_eval_F_other_forms():
    x, t = np.zeros(2), 0.0
    p, X = np.array([3.0, 4.0]), np.diag([1.0, 2.0])
    assert eval_F(NonlinearitySpec("gradient_power", 2, b=2.0, m=0.5), x, t, p, X, 1.0) == \
        pytest.approx(2 * 5 ** 0.5 - 1)
    assert eval_F(NonlinearitySpec("mixed_local_nonlocal", 2), x, t, p, X, 1.0) == -1.0 - 2.0
    mw = NonlinearitySpec("mixed_weighted", 2, a=2.0, c=3.0)
    assert eval_F(mw, x, t, p, X, 1.0) == -2.0 - 6.0
    mw2 = NonlinearitySpec("mixed_weighted", 2, a=2.0, c=3.0, second_nonlocal=True)
    assert eval_F(mw2, x, t, p, X, (1.0, 1.0)) == -5.0
    dl = NonlinearitySpec("dislocation", 2, c=lambda x, t: 1 + x[0])
    assert eval_F(dl, x, t, p, X, 0.5) == pytest.approx(-1.5 * 5)
    lc = NonlinearitySpec("linearized_comparison", 2, c=1.0, pucci=PucciParams(1.0, 2.0))
    assert eval_F(lc, x, t, p, X, 1.0) == pytest.approx(-5 - 6 - 1)
    with pytest.raises(ValueError):
        NonlinearitySpec("nope")
    with pytest.raises(ValueError):
        NonlinearitySpec("mixed_local_nonlocal", 2, nonlocal_axes=(0, 1))


def test_ellipticity_probe():
    assert ellipticity_probe(NonlinearitySpec("pure_nonlocal", 2)).elliptic
    assert ellipticity_probe(NonlinearitySpec("quasilinear", 3, A=np.diag([1.0, 2.0, 0.0]))).elliptic
    assert not ellipticity_probe(NonlinearitySpec("quasilinear", 2, A=np.diag([1.0, -1.0]))).elliptic
    rep = ellipticity_probe(NonlinearitySpec("dislocation", 1, c=1.0))
    assert rep.elliptic and not rep.e_prime_satisfied
    assert ellipticity_probe(NonlinearitySpec("pure_nonlocal")).e_prime_satisfied
    assert ellipticity_probe(NonlinearitySpec("linearized_comparison", 2)).elliptic


def test_directional_operator():
    u = lincomb(1.0, cosine([1.0, 0.0]), 1.0, cosine([0.0, 1.0]))
    x = np.array([0.5, 1.1])
    within_certified(directional_operator(u, x, 0.0, RadialStable(1.0, 1), (0,)),
                     -np.pi * np.cos(0.5), 1e-5)
    within_certified(directional_operator(u, x, 0.0, RadialStable(1.0, 1), (1,)),
                     -np.pi * np.cos(1.1), 1e-5)
