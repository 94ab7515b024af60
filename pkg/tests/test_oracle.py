"""Path-optimisation oracle for d^2 and the reference kernel."""
import math

import numpy as np
import pytest

from ccn32 import distance as dist
from ccn32 import heatkernel as hk
from ccn32 import oracle
from ccn32.distance import GroupPoint
from ccn32.errors import ConstraintNotMet
from ccn32.oracle import PathProblem
from ccn32.verify import random_generic_point, random_rotation

G = GroupPoint.of


def test_straight_segment():
    res = oracle.oracle_distance_squared(PathProblem(G((1, 0, 0), (0, 0, 0)), segments=16, restarts=2))
    assert abs(res.d2_upper - 1.0) < 1e-6
    d2, path = res
    assert len(path) == 17 and d2 == res.d2_upper


def test_vertical_target_four_pi():
    res = oracle.oracle_distance_squared(PathProblem(G((0, 0, 0), (1, 0, 0)), segments=64, restarts=8))
    assert abs(res.d2_upper / (4 * math.pi) - 1) < 0.01
    assert res.residual <= oracle.CONSTRAINT_TOL


def test_path_lifts_to_target():
    g = G((1.0, 0.5, -0.2), (0.3, -0.6, 0.4))
    res = oracle.oracle_distance_squared(PathProblem(g, segments=32, restarts=3, seed=5))
    end = oracle.lift_endpoint(res.path)
    np.testing.assert_allclose(end.x, g.x, atol=1e-12)
    np.testing.assert_allclose(end.t, g.t, atol=1e-8)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_upper_bound_property(seed):
    rng = np.random.default_rng(seed)
    g = random_generic_point(rng, 1.0, 4.0)
    res = oracle.oracle_distance_squared(PathProblem(g, segments=48, restarts=4, seed=seed))
    d2 = dist.cc_distance_squared(g).d2
    assert res.d2_upper >= d2 - 1e-9
    assert res.d2_upper <= 1.02 * d2


def test_refinement_monotone():
    g = G((1.0, 0.0, 0.0), (0.4, 0.7, 0.0))
    vals = [oracle.oracle_distance_squared(PathProblem(g, segments=M, restarts=4, seed=11)).d2_upper
            for M in (16, 32, 64)]
    assert all(b <= a + 1e-10 for a, b in zip(vals, vals[1:]))


def test_deterministic_and_parallel_equal():
    g = G((0.5, 1.0, 0.0), (0.2, 0.0, 0.6))
    a = oracle.oracle_distance_squared(PathProblem(g, segments=24, restarts=3, seed=4))
    b = oracle.oracle_distance_squared(PathProblem(g, segments=24, restarts=3, seed=4, workers=3))
    assert a.d2_upper == b.d2_upper and a.restart == b.restart


@pytest.mark.parametrize("kwargs", [
    {"segments": 4},
    {"restarts": 0},
    {"penalty_schedule": (10.0, 10.0)},
    {"penalty_schedule": (-1.0, 10.0)},
    {"penalty_schedule": ()},
])
def test_problem_validation(kwargs):
    with pytest.raises(ValueError):
        PathProblem(G((1, 0, 0), (0, 0, 0)), **kwargs)


def test_constraint_not_met(monkeypatch):
    monkeypatch.setattr(oracle, "CONSTRAINT_TOL", -1.0)
    with pytest.raises(ConstraintNotMet) as info:
        oracle.oracle_distance_squared(PathProblem(G((1, 0, 0), (0, 1, 0)), segments=8, restarts=1))
    assert info.value.residual >= 0


def test_reference_origin():
    assert oracle.reference_p(dist.ORIGIN) == pytest.approx(hk.origin_value(), rel=1e-9)


@pytest.mark.parametrize("g,ref", [
    (G((1, 0, 0), (0.3, 0.4, 0)), 43.25820640656627),
    (G((0.5, 0.2, 0), (1, 2, 0.3)), 0.14818732087388192),
])
def test_reference_rotation(g, ref):
    p = oracle.reference_p(g)
    assert p == pytest.approx(ref, rel=1e-9)
    O = random_rotation(np.random.default_rng(21))
    assert oracle.reference_p(g.transform(O)) == pytest.approx(p, rel=1e-9)


def test_laplace_against_reference():
    rng = np.random.default_rng(31)
    for _ in range(5):
        g = random_generic_point(rng, 1.0, 6.0)
        gap = hk.p_laplace(g).value / oracle.reference_p(g) - 1
        assert abs(gap) < 1e-6
