"""Inverse-function layer: Z (inverse of -Upsilon'), Phi, the map Lambda and
its numerical inverse, and the scalar cut equation."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import specfun as sf
from .errors import BoundaryInput, ConvergenceFailure, DomainError

PI = math.pi
THETA1 = sf.THETA1
BOUNDARY_RTOL = 1e-12


class ThetaRegion(str, enum.Enum):
    OMEGA_PLUS_1 = "OmegaPlus1"
    OMEGA_MINUS_4 = "OmegaMinus4"
    BOUNDARY_PARABOLA = "BoundaryParabola"


class URegion(str, enum.Enum):
    GREATER_PLUS = "GreaterPlus"
    LESS_PLUS = "LessPlus"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class ThetaData:
    theta1: float
    theta2: float
    r: float
    region: ThetaRegion
    epsilon: float
    wbar: float

    @classmethod
    def from_theta(cls, theta1: float, theta2: float, region: ThetaRegion) -> "ThetaData":
        r = math.hypot(theta1, theta2)
        return cls(theta1, theta2, r, region, THETA1 - r, theta2 * sf.psi(r))


@dataclass(frozen=True)
class UParam:
    u1: float
    u2: float
    region: URegion


# ------------------------------------------------------------ Z and Phi


def z_map(rho: float) -> float:
    """Z(rho): the z in (-theta_1, theta_1) with -Upsilon'(z) = rho."""
    rho = float(rho)
    if rho == 0.0:
        return 0.0
    g = abs(rho)
    # -Upsilon'(theta_1 - d) ~ theta_1/d^2 near the pole
    d = min(0.5, 0.5 * math.sqrt(THETA1 / g))
    while -sf.upsilon_family(THETA1 - d)[1] < g:
        d *= 0.5
        if d < 1e-300:
            raise ConvergenceFailure("z_map could not bracket", {"rho": rho})
    f = lambda z: -sf.upsilon_family(z)[1] - g
    z = optimize.brentq(f, 0.0, THETA1 - d, xtol=1e-15, rtol=1e-15)
    for _ in range(2):
        _, u1, u2, _ = sf.upsilon_family(z)
        step = (-u1 - g) / (-u2)
        znew = z - step
        if not (0.0 <= znew < THETA1):
            break
        z = znew
    return math.copysign(z, rho)


def phi_map(rho: float) -> float:
    """Phi(rho) = Upsilon(Z(rho)) + rho Z(rho); even in rho, Phi(0) = 3."""
    z = z_map(abs(rho))
    return sf.upsilon_family(z)[0] + abs(rho) * z


# ---------------------------------------------------------------- Lambda


def lambda_forward(v1: float, v2: float) -> tuple[float, float]:
    r = math.hypot(v1, v2)
    if not (0.0 < r < THETA1):
        raise DomainError(f"|v|={r!r} outside (0, theta_1)")
    p = sf.psi_family(r)[0]
    k1, _ = sf.k1_k2(r)
    return k1 * v1 * v2 * v2, v2 * (k1 * v2 * v2 + 2.0 * p)


def jacobian_lambda(v1: float, v2: float) -> np.ndarray:
    """Jacobian of Lambda; it is the Hessian of v2^2 psi(|v|)."""
    r = math.hypot(v1, v2)
    p = sf.psi_family(r)[0]
    k1, k2 = sf.k1_k2(r)
    j11 = v2 * v2 * (k1 + k2 * v1 * v1)
    j12 = v1 * v2 * (2 * k1 + k2 * v2 * v2)
    j22 = 2 * p + v2 * v2 * (5 * k1 + k2 * v2 * v2)
    return np.array([[j11, j12], [j12, j22]])


def classify_region(u1: float, u2: float) -> UParam:
    if u1 <= 0 or u2 <= 0:
        raise DomainError("classify_region needs u1 > 0 and u2 > 0")
    lhs, rhs = PI * u2 * u2, 4.0 * u1
    if abs(lhs - rhs) <= BOUNDARY_RTOL * max(lhs, rhs):
        region = URegion.BOUNDARY
    elif lhs > rhs:
        region = URegion.GREATER_PLUS
    else:
        region = URegion.LESS_PLUS
    return UParam(float(u1), float(u2), region)


def _cubic_root_plus(a, p, u2):
    """Unique real root of a y^3 + 2 p y - u2 = 0 for a, p > 0 (vectorised)."""
    P = 2.0 * p / a
    q = u2 / a
    s = np.sqrt(P / 3.0)
    return 2.0 * s * np.sinh(np.arcsinh(1.5 * q / (P * s)) / 3.0)


def _cubic_roots_minus(a, p, u2):
    """Positive roots y_a <= y_b of a y^3 + 2 p y + u2 = 0 for a > 0 > p.

    Returns nan where no positive root exists.
    """
    P = -2.0 * p / a  # y^3 - P y + q = 0
    q = u2 / a
    s = np.sqrt(P / 3.0)
    arg = -1.5 * q / (P * s)  # cos(3 phi) = -q/(2 (P/3)^(3/2))
    ok = arg >= -1.0
    arg = np.clip(arg, -1.0, 1.0)
    phi0 = np.arccos(arg) / 3.0
    yb = 2.0 * s * np.cos(phi0)
    ya = 2.0 * s * np.cos(phi0 - 2.0 * np.pi / 3.0)
    ya = np.where(ok, ya, np.nan)
    yb = np.where(ok, yb, np.nan)
    return ya, yb


# closest approach to the pole at pi; near the parabola |theta| -> pi linearly
_PI_GAP = 2.0 * sf.POLE_GUARD


def _scan_grid(lo: float, hi: float, n: int = 240) -> np.ndarray:
    """Nodes on (lo, hi) graded geometrically toward both ends."""
    s = np.logspace(-14, np.log10(0.5), n)
    x = np.concatenate([s, 1.0 - s[::-1]])
    return lo + (hi - lo) * x


def _residual_plus(r, u1, u2):
    p, dp, _ = sf.psi_family_arr(r)
    a = dp / r
    y = _cubic_root_plus(a, p, u2)
    th1 = np.sqrt(np.maximum(r * r - y * y, 0.0))
    return u1 - a * th1 * y * y, th1, y


def _residual_minus(r, u1, u2, branch):
    p, dp, _ = sf.psi_family_arr(r)
    a = dp / r
    ya, yb = _cubic_roots_minus(a, p, u2)
    y = ya if branch == 0 else yb
    th1 = np.sqrt(r * r - y * y)
    return u1 - a * th1 * y * y, th1, -y


def _polish(theta: np.ndarray, u: np.ndarray, iters: int = 4) -> np.ndarray:
    best = theta
    best_res = np.linalg.norm(np.array(lambda_forward(*theta)) - u)
    for _ in range(iters):
        F = np.array(lambda_forward(*best)) - u
        try:
            step = np.linalg.solve(jacobian_lambda(*best), F)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        while lam > 1e-4:
            cand = best - lam * step
            rc = math.hypot(*cand)
            if 0.0 < rc < THETA1 and abs(rc - PI) > _PI_GAP:
                res = np.linalg.norm(np.array(lambda_forward(*cand)) - u)
                if res < best_res:
                    best, best_res = cand, res
                    break
            lam *= 0.5
        else:
            break
        if best_res <= 1e-16 * np.linalg.norm(u):
            break
    return best


def _in_region(theta, region: ThetaRegion) -> bool:
    t1, t2 = theta
    r = math.hypot(t1, t2)
    if region is ThetaRegion.OMEGA_PLUS_1:
        return t1 > 0 and t2 > 0 and r < PI
    k3 = sf.k_family(t1, t2)[2]
    return t2 < 0 < t1 and k3 < 0 and PI < r < THETA1


def _brent_on(fun, lo, hi):
    return optimize.brentq(fun, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)


def lambda_inverse(u: UParam) -> ThetaData:
    """Solve Lambda(theta) = u inside the region matching u."""
    if u.region is URegion.BOUNDARY:
        raise BoundaryInput("u lies on the parabola pi u2^2 = 4 u1")
    u1, u2 = u.u1, u.u2
    target = np.array([u1, u2])
    candidates = []
    if u.region is URegion.GREATER_PLUS:
        region = ThetaRegion.OMEGA_PLUS_1
        grid = _scan_grid(1e-8, PI - _PI_GAP)
        res = _residual_plus(grid, u1, u2)[0]
        idx = np.nonzero(np.sign(res[:-1]) * np.sign(res[1:]) <= 0)[0]
        for i in idx:
            f = lambda r: float(_residual_plus(np.array([r]), u1, u2)[0][0])
            r = _brent_on(f, grid[i], grid[i + 1])
            _, th1, th2 = _residual_plus(np.array([r]), u1, u2)
            candidates.append(np.array([th1[0], th2[0]]))
    else:
        region = ThetaRegion.OMEGA_MINUS_4
        grid = _scan_grid(PI + _PI_GAP, THETA1 - 1e-8)
        for branch in (0, 1):
            res = _residual_minus(grid, u1, u2, branch)[0]
            good = np.isfinite(res[:-1]) & np.isfinite(res[1:])
            idx = np.nonzero(good & (np.sign(res[:-1]) * np.sign(res[1:]) <= 0))[0]
            for i in idx:
                def f(r, b=branch):
                    v = float(_residual_minus(np.array([r]), u1, u2, b)[0][0])
                    return v
                try:
                    r = _brent_on(f, grid[i], grid[i + 1])
                except ValueError:
                    continue
                _, th1, th2 = _residual_minus(np.array([r]), u1, u2, branch)
                if np.isfinite(th1[0]):
                    candidates.append(np.array([th1[0], th2[0]]))
    best, best_err = None, math.inf
    for cand in candidates:
        try:
            cand = _polish(cand, target)
        except (DomainError, ValueError, ArithmeticError):
            continue
        if not _in_region(cand, region):
            continue
        err = np.linalg.norm(np.array(lambda_forward(*cand)) - target) / np.linalg.norm(target)
        if err < best_err:
            best, best_err = cand, err
    if best is None or best_err > 1e-9:
        best = _fallback_newton(target, region, best, best_err)
    return ThetaData.from_theta(float(best[0]), float(best[1]), region)


def _fallback_newton(target, region, best, best_err):
    """Second strategy: damped 2-D Newton from the closest point of a polar table."""
    if region is ThetaRegion.OMEGA_PLUS_1:
        rr = np.linspace(0.05, PI - 1e-3, 120)
        bb = np.linspace(0.02, PI / 2 - 0.02, 120)
    else:
        rr = np.linspace(PI + 1e-3, THETA1 - 1e-3, 120)
        bb = np.linspace(-PI / 2 + 0.01, -0.01, 120)
    R, B = np.meshgrid(rr, bb)
    T1, T2 = R * np.cos(B), R * np.sin(B)
    p, dp, _ = sf.psi_family_arr(R.ravel())
    a = dp / R.ravel()
    U1 = a * T1.ravel() * T2.ravel() ** 2
    U2 = T2.ravel() * (a * T2.ravel() ** 2 + 2 * p)
    mask = (U1 > 0) & (U2 > 0)
    if region is ThetaRegion.OMEGA_MINUS_4:
        mask &= (2 * p + a * T2.ravel() ** 2) < 0
    dist = np.hypot(np.log(np.where(mask, U1, np.nan) / target[0]), np.log(np.where(mask, U2, np.nan) / target[1]))
    order = np.argsort(np.nan_to_num(dist, nan=np.inf))[:5]
    for i in order:
        cand = np.array([T1.ravel()[i], T2.ravel()[i]])
        try:
            cand = _polish(cand, target, iters=60)
        except (DomainError, ValueError, ArithmeticError):
            continue
        if not _in_region(cand, region):
            continue
        err = np.linalg.norm(np.array(lambda_forward(*cand)) - target) / np.linalg.norm(target)
        if err < best_err:
            best, best_err = cand, err
    if best is None or best_err > 1e-9:
        raise ConvergenceFailure("lambda_inverse failed", {"u": target.tolist(), "residual": best_err})
    return best


# --------------------------------------------------------- cut equation


def _cut_lhs(delta: float) -> float:
    r = PI + delta
    p, dp = sf.psi_family_near_pi(delta)
    return -2.0 * p * math.sqrt(r * r + 2.0 * r * p / dp)


def solve_cut_equation_delta(beta: float) -> float:
    """delta = r - pi for the root r in (pi, theta_1) of the cut equation."""
    if beta <= 0:
        raise DomainError("solve_cut_equation needs beta > 0")
    hi = THETA1 - PI - 1e-15
    lo = min(0.5 * (THETA1 - PI), 1.0 / beta)
    while _cut_lhs(lo) < beta:
        lo *= 0.5
    d = optimize.brentq(lambda d: _cut_lhs(d) - beta, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=400)
    return d


def solve_cut_equation(beta: float) -> float:
    """r in (pi, theta_1) with -2 psi(r) sqrt(r^2 + 2 r psi/psi') = beta."""
    return PI + solve_cut_equation_delta(beta)


def z_map_arr(rho) -> np.ndarray:
    """Vectorised z_map for rho >= 0 (bisection on a log-spaced gap, then Newton)."""
    rho = np.asarray(rho, dtype=float)
    g = np.abs(rho).ravel()
    # unknown gap d = theta_1 - z; -Upsilon' decreases in d
    lo = np.full(g.shape, 1e-300)
    hi = np.full(g.shape, THETA1)
    for _ in range(70):
        mid = np.where(hi > 4.0 * lo, np.sqrt(lo * hi), 0.5 * (lo + hi))
        val = -sf.upsilon_family_arr(THETA1 - mid)[1]
        big = val > g
        lo = np.where(big, mid, lo)
        hi = np.where(big, hi, mid)
    z = THETA1 - 0.5 * (lo + hi)
    for _ in range(2):
        _, d1, d2 = sf.upsilon_family_arr(z)
        znew = z - (-d1 - g) / (-d2)
        ok = (znew >= 0) & (znew < THETA1)
        z = np.where(ok, znew, z)
    z = np.where(g == 0, 0.0, z)
    return (np.sign(rho).ravel() * z).reshape(rho.shape) if rho.ndim else float(z[0])


def phi_map_arr(rho) -> np.ndarray:
    rho = np.abs(np.asarray(rho, dtype=float))
    z = np.asarray(z_map_arr(rho))
    return sf.upsilon_family_arr(z)[0] + rho * z
