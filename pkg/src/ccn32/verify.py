"""Invariant suites behind ``ccn32 verify`` plus the point samplers they share
with the test-suite."""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import distance as dist
from . import heatkernel as hk
from . import maps
from . import oracle
from .distance import GroupPoint, Regime
from .maps import ThetaRegion, URegion

SUITES = ("identities", "roundtrip", "crossroute", "bounds", "varadhan", "asymptotics", "oracle")


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    observed: float
    tolerance: float
    passed: bool
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {
            "suite": self.suite,
            "name": self.name,
            "observed": self.observed,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


# ------------------------------------------------------------- samplers


def sample_u(rng: np.random.Generator, region: URegion) -> maps.UParam:
    """Random u strictly inside one side of the parabola pi u2^2 = 4 u1."""
    while True:
        u2 = math.exp(rng.uniform(math.log(0.05), math.log(20.0)))
        edge = 0.25 * math.pi * u2 * u2
        if region is URegion.GREATER_PLUS:
            u1 = edge * rng.uniform(0.02, 0.98)
        else:
            u1 = edge * math.exp(rng.uniform(0.02, 3.0))
        up = maps.classify_region(u1, u2)
        if up.region is region:
            return up


def point_from_u(u1: float, u2: float, xnorm: float = 1.0) -> GroupPoint:
    x2 = xnorm * xnorm
    return GroupPoint((xnorm, 0.0, 0.0), (0.25 * x2 * u1, 0.25 * x2 * u2, 0.0))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def sample_theta(rng: np.random.Generator, region: ThetaRegion) -> tuple[float, float]:
    while True:
        if region is ThetaRegion.OMEGA_PLUS_1:
            r = rng.uniform(0.05, math.pi - 0.05)
            a = rng.uniform(0.02, 0.5 * math.pi - 0.02)
            return r * math.cos(a), r * math.sin(a)
        r = rng.uniform(math.pi + 1e-3, maps.THETA1 - 1e-3)
        a = rng.uniform(-0.5 * math.pi + 1e-3, -1e-3)
        th = (r * math.cos(a), r * math.sin(a))
        if maps._in_region(th, ThetaRegion.OMEGA_MINUS_4):
            return th


def random_generic_point(rng: np.random.Generator, d_lo: float, d_hi: float) -> GroupPoint:
    """Rotated generic point with d drawn uniformly from [d_lo, d_hi]."""
    while True:
        x = rng.normal(size=3)
        t = rng.normal(size=3) * rng.uniform(0.05, 3.0)
        g = GroupPoint.of(x, t)
        res = dist.cc_distance_squared(g)
        if res.case is dist.CaseTag.GENERIC:
            return g.dilate(rng.uniform(d_lo, d_hi) / math.sqrt(res.d2))


# --------------------------------------------------------------- suites


def _chain_spread(g: GroupPoint) -> float:
    res = dist.cc_distance_squared(g)
    c = np.asarray(res.chain)
    return float((c.max() - c.min()) / abs(c).max())


def suite_identities(rng, n=20):
    out = []
    for region in (URegion.GREATER_PLUS, URegion.LESS_PLUS):
        worst = max(_chain_spread(point_from_u(*_uv(sample_u(rng, region)))) for _ in range(n))
        out.append(("chain spread " + region.value, worst, 1e-9, worst <= 1e-9))
    for tn in (0.5, 1.0, 3.0):
        d2 = dist.cc_distance_squared(GroupPoint.of((0, 0, 0), (0, tn, 0))).d2
        err = abs(d2 / (4 * math.pi * tn) - 1)
        out.append((f"vertical |t|={tn}", err, 1e-10, err <= 1e-10))
    for a in (0.5, 1.0, 2.0):
        g = point_from_u(a * a / math.pi, 2 * a / math.pi)
        err = abs(dist.cc_distance_squared(g).d2 / (1 + a * a) - 1)
        out.append((f"boundary alpha={a}", err, 1e-9, err <= 1e-9))
    return out


def _uv(up):
    return up.u1, up.u2


def suite_roundtrip(rng, n=50):
    out = []
    for region, sign in ((ThetaRegion.OMEGA_PLUS_1, 1.0), (ThetaRegion.OMEGA_MINUS_4, -1.0)):
        worst, signs = 0.0, True
        for _ in range(n):
            th = sample_theta(rng, region)
            u1, u2 = maps.lambda_forward(*th)
            back = maps.lambda_inverse(maps.classify_region(u1, u2))
            worst = max(worst, math.hypot(back.theta1 - th[0], back.theta2 - th[1]) / math.hypot(*th))
            signs &= np.sign(np.linalg.det(maps.jacobian_lambda(*th))) == sign
        out.append(("theta round trip " + region.value, worst, 1e-10, worst <= 1e-10))
        out.append(("jacobian sign " + region.value, float(signs), 1.0, bool(signs)))
    return out


def suite_crossroute(rng, n=5):
    worst = 0.0
    for _ in range(n):
        g = random_generic_point(rng, 2.0, 8.0)
        a = hk.p_fourier(g)
        b = hk.p_laplace(g)
        worst = max(worst, abs(math.expm1(a.log_value - b.log_value)))
    return [("fourier vs laplace", worst, 1e-5, worst < 1e-5)]


def suite_bounds(rng, n=20):
    logs = [hk.log_bound_ratio(random_generic_point(rng, 0.5, 15.0)) for _ in range(n)]
    spread = math.exp(max(logs) - min(logs))
    return [("bound ratio spread", spread, 1e3, spread < 1e3)]


VARADHAN_POINTS = {
    "omega_plus": dist.point_from_theta(1.0, 2.0, 2.0),
    "perpendicular": GroupPoint.of((3.0, 0.0, 0.0), (0.0, 3.0, 0.0)),
    "vertical": GroupPoint.of((0.0, 0.0, 0.0), (2.0, 0.0, 0.0)),
    "axis": GroupPoint.of((4.5, 0.0, 0.0), (0.0, 0.0, 0.0)),
    "omega_plus_b": dist.point_from_theta(0.5, 1.5, 3.0),
}
VARADHAN_H = (0.02, 0.01, 0.005)


def varadhan_errors(g: GroupPoint, hs=VARADHAN_H) -> list[float]:
    d2 = dist.cc_distance_squared(g).d2
    return [abs(-4 * h * hk.heat_kernel_time_log(h, g) / d2 - 1) for h in hs]


def suite_varadhan(rng, n=None):
    out = []
    for name, g in list(VARADHAN_POINTS.items())[: n or 3]:
        errs = varadhan_errors(g)
        ok = errs[-1] < 0.05 and all(b < a for a, b in zip(errs, errs[1:]))
        out.append((f"varadhan {name}", errs[-1], 0.05, ok))
    return out


def suite_asymptotics(rng, n=None):
    out = []
    for th in ((1.0, 2.0), (2.0, 1.5)):
        g = dist.point_from_theta(th[0], th[1], 50.0 / th[1])
        ratio = math.exp(hk.log_p(g).log_value - hk.log_asymptotic_leading(g, Regime.I))
        out.append((f"regime I theta={th}", abs(ratio - 1), 0.1, abs(ratio - 1) <= 0.1))
    q = hk.QuadratureSpec(osc_nodes=16, rel_tol=1e-10)
    f0 = hk.F_abnormal(0.0, 0.0, q)
    for xn in (10.0, 14.0):
        lp = hk.log_p(GroupPoint.of((xn, 0, 0), (0, 0, 0)), q).log_value
        ratio = math.exp(lp - math.log(4 * math.pi * f0 / xn**2) + 0.25 * xn * xn)
        out.append((f"regime IV |x|={xn}", abs(ratio - 1), 0.1, abs(ratio - 1) <= 0.1))
    return out


def suite_oracle(rng, n=3):
    out = []
    for k in range(n):
        g = random_generic_point(rng, 1.0, 4.0)
        seed = int(rng.integers(2**31))
        d2 = dist.cc_distance_squared(g).d2
        up = oracle.oracle_distance_squared(oracle.PathProblem(g, segments=48, restarts=4, seed=seed))
        gap = up.d2_upper / d2 - 1
        out.append((f"oracle point {k}", gap, 0.02, -1e-9 <= gap <= 0.02))
    return out


_SUITE_FUNCS = {
    "identities": suite_identities,
    "roundtrip": suite_roundtrip,
    "crossroute": suite_crossroute,
    "bounds": suite_bounds,
    "varadhan": suite_varadhan,
    "asymptotics": suite_asymptotics,
    "oracle": suite_oracle,
}


def _run_one(name: str, seed: int) -> list[Check]:
    rng = np.random.default_rng([seed, SUITES.index(name)])
    t0 = time.perf_counter()
    rows = _SUITE_FUNCS[name](rng)
    dt = time.perf_counter() - t0
    return [Check(name, label, float(obs), float(tol), bool(ok), dt) for label, obs, tol, ok in rows]


def run_suites(names, seed: int = 0, threads: int = 1) -> list[Check]:
    """Run suites in a worker pool; results come back in the order requested."""
    names = list(SUITES) if "all" in names else list(names)
    for n in names:
        if n not in _SUITE_FUNCS:
            raise ValueError(f"unknown suite {n!r}")
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda n: _run_one(n, seed), names))
    else:
        parts = [_run_one(n, seed) for n in names]
    return [c for part in parts for c in part]
