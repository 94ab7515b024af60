"""Heat kernel routes, P and F, asymptotic leading terms, bounds and derivatives."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccn32 import distance as dist
from ccn32 import heatkernel as hk
from ccn32 import specfun as sf
from ccn32.distance import GroupPoint, Regime
from ccn32.errors import RegimeMismatch
from ccn32.verify import random_generic_point, random_rotation

PI = math.pi
G = GroupPoint.of

# mpmath quad at 40 digits on the radial forms
P_REF = [
    (0.3, 10.0, 7.3058950529882963e-17),
    (25.0, 40.0, 2.9504187270871445674e-57),
]
F00 = 18.4369760615684737891864880425


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        hk.QuadratureSpec(rel_tol=0.0)
    with pytest.raises(ValueError):
        hk.QuadratureSpec(osc_nodes=2)
    assert hk.QuadratureSpec(osc_nodes=16).panel_nodes > hk.DEFAULT_SPEC.panel_nodes


def test_origin_value():
    assert hk.origin_value() == pytest.approx(PI**5 / 2, rel=1e-15)
    r = hk.p_fourier(dist.ORIGIN)
    assert r.value == pytest.approx(hk.origin_value(), rel=1e-12)
    assert r.route is hk.Route.FOURIER


@pytest.mark.parametrize("X2,T,ref", P_REF)
def test_P_kernel_reference(X2, T, ref):
    r = hk.P_kernel(math.sqrt(X2), T)
    assert r.value == pytest.approx(ref, rel=1e-9)
    assert r.value > 0 and r.est_error >= 0


def test_P_radial_against_cubic_grid():
    # the radial form against a plain 3-D trapezoid sum of the same integrand
    h, R = 0.5, 44.0
    a = np.arange(-R, R + h / 2, h)
    Y, Z = np.meshgrid(a, a, indexing="ij")
    tot = 0.0
    for x in a:
        r = np.sqrt(x * x + Y * Y + Z * Z)
        tot += np.sum(sf.calV_amp(r) * np.exp(-0.25 * sf.upsilon_tilde(r)))
    assert hk.P_kernel(1.0, 0.0).value == pytest.approx(tot * h**3, rel=1e-7)


def test_P_positive_random_pairs():
    rng = np.random.default_rng(8)
    for X, T in rng.uniform(0, 6, size=(30, 2)):
        assert hk.P_kernel(X, T).value > 0


def test_F_abnormal():
    assert hk.F_abnormal(0.0, 0.0) == pytest.approx(F00, rel=1e-12)
    assert hk.F_abnormal(3.0, 0.0) < hk.F_abnormal(0.0, 0.0)
    for v1, v2 in ((1.0, 2.0), (0.4, 7.0), (5.0, 1.0)):
        f = hk.F_abnormal(v1, v2)
        assert f > 0
        assert hk.F_abnormal(v1, -v2) == pytest.approx(f, rel=1e-10)
        assert hk.F_abnormal(-v1, v2) == pytest.approx(f, rel=1e-10)


@pytest.mark.parametrize("g", [
    G((1, 0, 0), (0.3, 0.4, 0)),
    G((0.5, 0.2, 0), (1, 2, 0.3)),
    G((2, -1, 0.5), (0.1, 0.0, -0.2)),
])
def test_fourier_symmetries(g):
    p = hk.p_fourier(g).value
    rng = np.random.default_rng(9)
    O = random_rotation(rng)
    assert hk.p_fourier(g.transform(O)).value == pytest.approx(p, rel=1e-8)
    assert hk.p_fourier(G(g.x, tuple(-c for c in g.t))).value == pytest.approx(p, rel=1e-8)


def test_fourier_methods_agree():
    g = dist.point_from_theta(0.5, 1.0, 12.0)
    plain = hk.p_fourier(g, method="plain")
    shifted = hk.p_fourier(g, method="shifted")
    assert abs(plain.log_value - shifted.log_value) < 1e-9


def test_cross_route_example():
    g = G((2, 0, 0), (0.5, 0.5, 0))
    a, b = hk.p_fourier(g), hk.p_laplace(g)
    assert b.route is hk.Route.LAPLACE and not b.fallback_used
    assert abs(b.value / a.value - 1) < 1e-5


def test_laplace_fallback_on_abnormal_axis():
    r = hk.p_laplace(G((3, 0, 0), (0, 0, 0)))
    assert r.fallback_used and r.route is hk.Route.FOURIER


def test_cross_route_random():
    rng = np.random.default_rng(12)
    for _ in range(3):
        g = random_generic_point(rng, 1.0, 6.0)
        a, b = hk.log_p(g, method="plain"), hk.p_laplace(g)
        assert abs(math.expm1(a.log_value - b.log_value)) < 1e-5


def test_time_scaling():
    g = G((1, 0.5, 0), (0.2, 0.1, 0.4))
    assert hk.heat_kernel_time(1.0, g) == pytest.approx(hk.log_p(g).value, rel=1e-14)
    h = 0.3
    lhs = hk.heat_kernel_time_log(h, g.dilate(math.sqrt(h)))
    assert lhs == pytest.approx(-4.5 * math.log(h) + hk.log_p(g).log_value, rel=1e-12)
    with pytest.raises(ValueError):
        hk.heat_kernel_time(0.0, g)


def test_heat_equation():
    assert hk.heat_equation_residual(G((0.7, 0.2, 0), (0.3, -0.4, 0.1))) < 1e-3


def _varadhan(g):
    d2 = dist.cc_distance_squared(g).d2
    return [abs(-4 * h * hk.heat_kernel_time_log(h, g) / d2 - 1) for h in (0.02, 0.01, 0.005)]


def test_varadhan_trend_decreasing():
    errs = _varadhan(G((1, 0, 0), (0, 1, 0)))
    assert all(b < a for a, b in zip(errs, errs[1:]))


@pytest.mark.xfail(strict=True, reason="h^(-9/2) prefactor keeps the error at 5.7% for h=0.005 at this point")
def test_varadhan_five_percent_at_unit_perpendicular():
    assert _varadhan(G((1, 0, 0), (0, 1, 0)))[-1] < 0.05


@pytest.mark.parametrize("theta", [(0.5, 1.0), (1.0, 2.0)])
def test_regime_one_ratio(theta):
    g = dist.point_from_theta(*theta, 50.0 / theta[1])
    assert Regime.I in dist.classify_regime(g)
    ratio = math.exp(hk.log_p(g).log_value - hk.log_asymptotic_leading(g, Regime.I))
    assert 0.9 <= ratio <= 1.1


def test_regime_four_axis():
    q = hk.QuadratureSpec(osc_nodes=16, rel_tol=1e-10)
    xn = 12.0
    g = G((xn, 0, 0), (0, 0, 0))
    lead = hk.log_asymptotic_leading(g, Regime.IV)
    assert lead == pytest.approx(math.log(4 * PI * F00 / xn**2) - 0.25 * xn * xn, rel=1e-10)
    ratio = math.exp(hk.log_p(g, q).log_value - lead)
    assert 0.9 <= ratio <= 1.1


def test_regime_mismatch():
    with pytest.raises(RegimeMismatch):
        hk.asymptotic_leading(G((1, 0, 0), (0.2, 0.3, 0)), Regime.I)


def test_regime_two_formula_finite():
    g = dist.point_from_theta(3.9, -1.2, 20.0)
    v = hk.log_asymptotic_leading(g, Regime.II, check=False)
    assert math.isfinite(v)


def test_bnd_closed_cases():
    xn = 3.0
    assert hk.log_bnd(G((xn, 0, 0), (0, 0, 0))) == pytest.approx(-2 * math.log(xn) - 0.25 * xn * xn)
    assert hk.bnd(dist.ORIGIN) == 1.0


def test_bound_ratio_positive_and_bounded():
    rng = np.random.default_rng(14)
    logs = [hk.log_bound_ratio(random_generic_point(rng, 0.5, 6.0)) for _ in range(8)]
    assert all(math.isfinite(v) for v in logs)
    assert math.exp(max(logs) - min(logs)) < 1e3


@settings(max_examples=10, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.2, 2))
def test_gradient_finite_and_rotation_covariant(a, b, xn):
    g = G((xn, 0, 0), (a, b, 0))
    grad = hk.grad_log_p(g, method="plain")
    assert np.all(np.isfinite(grad))
    # left-invariant gradient norm is rotation invariant
    O = random_rotation(np.random.default_rng(0))
    other = hk.grad_log_p(g.transform(O), method="plain")
    assert np.linalg.norm(other) == pytest.approx(np.linalg.norm(grad), rel=1e-4, abs=1e-6)


def test_gradient_along_axis_points_inward():
    grad = hk.grad_log_p(G((2, 0, 0), (0, 0, 0)))
    assert grad[0] < 0
    assert abs(grad[1]) < 1e-6 and abs(grad[2]) < 1e-6
