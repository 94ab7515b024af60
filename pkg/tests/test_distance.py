"""Closed-form distance, reduction, the D(u; s) family and regime parameters."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccn32 import distance as dist
from ccn32 import maps
from ccn32 import specfun as sf
from ccn32.distance import CaseTag, GroupPoint, Regime
from ccn32.maps import URegion
from ccn32.verify import point_from_u, random_rotation, sample_u

PI = math.pi
G = GroupPoint.of

coords = st.floats(-5.0, 5.0, allow_nan=False)
vec3 = st.tuples(coords, coords, coords)


def test_group_law_and_inverse():
    a = G((1, 2, 3), (0.5, -1, 2))
    b = G((-0.3, 0.7, 1.1), (2, 0, -1))
    ab = a * b
    np.testing.assert_allclose(ab.t, np.add(a.t, b.t) - 0.5 * np.cross(a.x, b.x))
    e = a * a.inverse()
    assert np.allclose(e.x, 0) and np.allclose(e.t, 0)


def test_reduce_examples():
    rp = dist.reduce(G((1, 0, 0), (0, 1, 0)))
    assert (rp.xnorm, rp.t_par, rp.t_perp) == pytest.approx((1.0, 0.0, 1.0), abs=1e-15)
    rp = dist.reduce(G((0, 0, 2), (0, 0, -3)))
    assert (rp.xnorm, rp.t_par, rp.t_perp) == pytest.approx((2.0, 3.0, 0.0), abs=1e-15)
    assert rp.t_flipped


@given(vec3, vec3)
def test_reduce_reconstructs(x, t):
    g = G(x, t)
    rp = dist.reduce(g)
    back = rp.reconstruct()
    np.testing.assert_allclose(back.x, g.x, atol=1e-14 * (1 + np.linalg.norm(g.x)))
    np.testing.assert_allclose(back.t, g.t, atol=1e-14 * (1 + np.linalg.norm(g.t)))
    assert rp.t_par >= 0 and rp.t_perp >= 0
    assert math.hypot(rp.t_par, rp.t_perp) == pytest.approx(math.hypot(*g.t), rel=1e-14, abs=1e-300)


def test_known_distances():
    d = dist.cc_distance_squared(G((0, 0, 0), (1, 0, 0)))
    assert d.case is CaseTag.VERTICAL and d.d2 == pytest.approx(4 * PI, rel=1e-15)
    a = 2.0
    d = dist.cc_distance_squared(G((1, 0, 0), (a * a / (4 * PI), a / (2 * PI), 0)))
    assert d.case is CaseTag.BOUNDARY and d.d2 == pytest.approx(5.0, rel=1e-12)
    d = dist.cc_distance_squared(G((1, 0, 0), (0, 0.5, 0)))
    r = sf.mu_inverse(2.0)
    assert d.case is CaseTag.PERPENDICULAR
    assert d.d2 == pytest.approx((r / math.sin(r)) ** 2, rel=1e-14)
    d = dist.cc_distance_squared(G((3, 4, 0), (0, 0, 0)))
    assert d.case is CaseTag.ABNORMAL and d.d2 == 25.0
    assert dist.cc_distance_squared(G((0, 0, 0), (0, 0, 0))).d2 == 0.0


def test_generic_chain_u11():
    d = dist.cc_distance_squared(G((1, 0, 0), (0.25, 0.25, 0)))
    assert d.case is CaseTag.GENERIC
    np.testing.assert_allclose(d.chain, d.d2, rtol=1e-12)
    assert d.d2 == pytest.approx(4.153103019125071, rel=1e-12)


def test_cut_case():
    d = dist.cc_distance_squared(G((2, 0, 0), (3, 0, 0)))
    assert d.case is CaseTag.CUT
    beta = 3.0
    r = maps.solve_cut_equation(beta)
    assert d.d2 == pytest.approx(4 * (sf.aux_phis(r)[3] * beta + 1), rel=1e-14)


@pytest.mark.parametrize("region", [URegion.GREATER_PLUS, URegion.LESS_PLUS])
def test_chain_agreement_random(region):
    rng = np.random.default_rng(1)
    for _ in range(100):
        up = sample_u(rng, region)
        c = np.asarray(dist.cc_distance_squared(point_from_u(up.u1, up.u2, 1.3)).chain)
        assert np.ptp(c) <= 1e-9 * np.abs(c).max()


def test_rotation_and_scaling_invariance():
    rng = np.random.default_rng(2)
    for _ in range(20):
        g = G(rng.normal(size=3), rng.normal(size=3))
        d2 = dist.cc_distance_squared(g).d2
        O = random_rotation(rng)
        assert dist.cc_distance_squared(g.transform(O)).d2 == pytest.approx(d2, rel=1e-12)
        assert dist.cc_distance_squared(G(g.x, tuple(-c for c in g.t))).d2 == pytest.approx(d2, rel=1e-12)
        for h in (0.1, 3.0):
            assert dist.cc_distance_squared(g.dilate(h)).d2 == pytest.approx(h * h * d2, rel=1e-10)


def test_norm_equivalence_spread_finite():
    rng = np.random.default_rng(3)
    ratios = []
    for _ in range(300):
        x = rng.normal(size=3) * 10 ** rng.uniform(-2, 2)
        t = rng.normal(size=3) * 10 ** rng.uniform(-2, 2)
        g = G(x, t)
        ratios.append(dist.cc_distance_squared(g).d2 / (x @ x + np.linalg.norm(t)))
    assert min(ratios) > 0.5
    assert max(ratios) < 4 * PI + 1e-9


def test_left_invariant_distance():
    a = G((0.3, -0.2, 1.0), (0.5, 0.1, -0.4))
    b = G((1.0, 0.4, 0.0), (-0.2, 0.9, 0.3))
    c = G((2.0, -1.0, 0.5), (1.0, 1.0, 1.0))
    assert dist.cc_distance(c * a, c * b) == pytest.approx(dist.cc_distance(a, b), rel=1e-12)
    assert dist.cc_distance(a, b) == pytest.approx(dist.cc_distance(b, a), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_boundary_continuity(alpha):
    u1, u2 = alpha**2 / PI, 2 * alpha / PI
    exact = 1 + alpha**2
    for s in (1.0, -1.0):
        g = point_from_u(u1, u2 * (1 + s * 1e-8))
        d2 = dist.cc_distance_squared(g, boundary_band=0.0).d2
        assert abs(d2 / exact - 1) < 1e-6


def test_intrinsic_distance():
    assert dist.intrinsic_D_squared((0, 0), (1, 0, 0))[0] == pytest.approx(4 * sf.THETA1, rel=1e-15)
    assert dist.intrinsic_D_squared((1.5, -2), (0, 0, 0))[0] == pytest.approx(3 * 6.25, rel=1e-15)
    rng = np.random.default_rng(4)
    X, T = rng.normal(size=2), rng.normal(size=3)
    h = 0.37
    a = dist.intrinsic_D_squared(X / math.sqrt(h), T / h)[0]
    assert a == pytest.approx(dist.intrinsic_D_squared(X, T)[0] / h, rel=1e-12)


@pytest.mark.parametrize("u", [(1.0, 1.0), (0.2, 1.5), (3.0, 0.7)])
def test_h_family_identities(u):
    up = maps.classify_region(*u)
    th = maps.lambda_inverse(up)
    A, U, H = dist.h_family(up, th, 1.0)
    assert A == pytest.approx(th.theta2**2 * sf.psi_family(th.r)[1], rel=1e-10)
    assert U == pytest.approx(-sf.upsilon_family(th.r)[1], rel=1e-10)
    assert H == pytest.approx(dist.d_curve(up, th, (-1.0, 0.0)), rel=1e-14)
    for c in dist.d_curve_chain(th, *u):
        assert H == pytest.approx(c, rel=1e-9)
    h = 1e-5
    dH = (dist.h_family(up, th, 1 + h)[2] - dist.h_family(up, th, 1 - h)[2]) / (2 * h)
    assert abs(dH) < 1e-7 * H


@pytest.mark.parametrize("u", [(1.0, 1.0), (0.2, 1.5), (3.0, 0.7), (0.01, 0.3)])
def test_h_monotone_and_minimum(u):
    up = maps.classify_region(*u)
    th = maps.lambda_inverse(up)
    left = [dist.h_family(up, th, w)[2] for w in np.linspace(0.05, 1.0, 200)]
    right = [dist.h_family(up, th, w)[2] for w in np.linspace(1.0, 6.0, 200)]
    assert np.all(np.diff(left) < 0)
    assert np.all(np.diff(right) > 0)


@pytest.mark.parametrize("u", [(1.0, 1.0), (0.2, 1.5)])
def test_d_curve_nondecreasing_in_angle(u):
    up = maps.classify_region(*u)
    th = maps.lambda_inverse(up)
    for w in (0.5, 1.0, 2.0):
        vals = [dist.d_curve_polar(up, th, w, g) for g in np.linspace(0, PI, 100)]
        assert np.all(np.diff(vals) >= -1e-12 * max(vals))
        neg = [dist.d_curve_polar(up, th, w, -g) for g in np.linspace(0, PI, 100)]
        np.testing.assert_allclose(neg, vals, rtol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-2, 2))
def test_d_curve_minimum_at_sbar(l1, l2):
    up = maps.classify_region(math.exp(l1), math.exp(l2))
    if up.region is URegion.BOUNDARY:
        return
    th = maps.lambda_inverse(up)
    base = dist.d_curve(up, th, (-1.0, 0.0))
    rng = np.random.default_rng(abs(hash((l1, l2))) % 2**32)
    for s in rng.normal(size=(50, 2)) * 2 + np.array([-1.0, 0.0]):
        if math.hypot(s[0] + 1, s[1]) > 1e-3:
            assert dist.d_curve(up, th, s) > base


def test_regime_params_structure():
    rng = np.random.default_rng(5)
    for _ in range(50):
        region = URegion.GREATER_PLUS if rng.uniform() < 0.5 else URegion.LESS_PLUS
        up = sample_u(rng, region)
        g = point_from_u(up.u1, up.u2, rng.uniform(0.3, 3))
        rp = dist.regime_params(g)
        assert rp.d2 == pytest.approx(rp.xnorm**2 + 4 * rp.m, rel=1e-15)
        assert rp.L1 > 0 and rp.L2 > 0


def _fd_hessian(f, s0, h=1e-4):
    H = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            ei, ej = np.eye(2)[i] * h, np.eye(2)[j] * h
            H[i, j] = (f(s0 + ei + ej) - f(s0 + ei - ej) - f(s0 - ei + ej) + f(s0 - ei - ej)) / (4 * h * h)
    return H


@pytest.mark.parametrize("u,xn", [((1.0, 1.0), 2.0), ((0.2, 1.5), 1.0), ((3.0, 0.7), 0.7)])
def test_hessian_eigenvalues(u, xn):
    up = maps.classify_region(*u)
    th = maps.lambda_inverse(up)
    rp = dist.regime_params(point_from_u(*u, xn))
    H = _fd_hessian(lambda s: 0.25 * xn * xn * dist.d_curve(up, th, s), np.array([-1.0, 0.0]))
    assert H[0, 0] == pytest.approx(rp.L1, rel=1e-4)
    assert H[1, 1] == pytest.approx(rp.L2, rel=1e-4)
    assert abs(H[0, 1]) < 1e-4 * np.abs(H).max()
    h2 = 1e-4
    fd = sum(dist.h_family(up, th, 1 + k * h2)[2] * c for k, c in ((-1, 1), (0, -2), (1, 1))) / h2**2
    assert 0.25 * xn * xn * fd == pytest.approx(rp.L1, rel=1e-4)


def test_regime_classification_examples():
    g = dist.point_from_theta(1.2, 1.6, 100 / 1.6)
    assert Regime.I in dist.classify_regime(g)
    assert Regime.IV in dist.classify_regime(G((10, 0, 0), (0, 0, 0)))
    rp = dist.RegimeParams(200.0, 500.0, 3.0, 0.49, 0.1, 0.0, 1.0,
                           maps.ThetaData.from_theta(3.8, -2.0, maps.ThetaRegion.OMEGA_MINUS_4))
    assert Regime.II in dist.classify_params(rp)
    assert dist.classify_regime(G((0.5, 0, 0), (0.1, 0.1, 0))) == []
