"""Exact Carnot-Caratheodory distance on N(3,2) and the quantities derived
from it: the intrinsic distance D, the H / D(u; s) family, and the regime
parameters m, L1, L2."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import maps
from . import specfun as sf
from .maps import ThetaData, ThetaRegion, URegion

PI = math.pi
THETA1 = sf.THETA1
BOUNDARY_BAND = 1e-10
# components of t below this fraction of |t| count as zero
ALIGN_TOL = 1e-13


# ------------------------------------------------------------- points


@dataclass(frozen=True)
class GroupPoint:
    x: tuple[float, float, float]
    t: tuple[float, float, float]

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        t = tuple(float(v) for v in self.t)
        if len(x) != 3 or len(t) != 3:
            raise ValueError("x and t must be 3-vectors")
        if not all(map(math.isfinite, x + t)):
            raise ValueError("non-finite coordinates")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)

    @classmethod
    def of(cls, x, t) -> "GroupPoint":
        return cls(tuple(x), tuple(t))

    def __mul__(self, other: "GroupPoint") -> "GroupPoint":
        x, t = np.array(self.x), np.array(self.t)
        y, s = np.array(other.x), np.array(other.t)
        return GroupPoint(tuple(x + y), tuple(t + s - 0.5 * np.cross(x, y)))

    def inverse(self) -> "GroupPoint":
        return GroupPoint(tuple(-v for v in self.x), tuple(-v for v in self.t))

    def dilate(self, h: float) -> "GroupPoint":
        return GroupPoint(tuple(h * v for v in self.x), tuple(h * h * v for v in self.t))

    def transform(self, O: np.ndarray) -> "GroupPoint":
        return GroupPoint(tuple(O @ self.x), tuple(O @ self.t))


ORIGIN = GroupPoint((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))


@dataclass(frozen=True)
class ReducedPoint:
    xnorm: float
    t_par: float
    t_perp: float
    frame: np.ndarray = field(compare=False)
    t_flipped: bool = False

    def reconstruct(self) -> GroupPoint:
        sign = -1.0 if self.t_flipped else 1.0
        x = self.frame.T @ np.array([self.xnorm, 0.0, 0.0])
        t = sign * (self.frame.T @ np.array([self.t_par, self.t_perp, 0.0]))
        return GroupPoint(tuple(x), tuple(t))

    @property
    def u(self) -> tuple[float, float]:
        n2 = self.xnorm * self.xnorm
        return 4.0 * self.t_par / n2, 4.0 * self.t_perp / n2


def _complete_frame(e1: np.ndarray, hint: np.ndarray | None = None) -> np.ndarray:
    if hint is not None and math.hypot(*hint) > 0:
        e2 = hint / math.hypot(*hint)
    else:
        k = int(np.argmin(np.abs(e1)))
        e2 = np.zeros(3)
        e2[k] = 1.0
        e2 -= (e2 @ e1) * e1
        e2 /= np.linalg.norm(e2)
    e3 = np.cross(e1, e2)
    return np.vstack([e1, e2, e3])


def reduce(g: GroupPoint) -> ReducedPoint:
    """Rotate (and if needed flip t) so that x = |x| e1 and t = (t_par, t_perp, 0)."""
    x, t = np.array(g.x), np.array(g.t)
    xn = math.hypot(*x)
    tn = math.hypot(*t)
    if xn == 0.0:
        e1 = t / tn if tn > 0 else np.array([1.0, 0.0, 0.0])
        return ReducedPoint(0.0, tn, 0.0, _complete_frame(e1), False)
    e1 = x / xn
    tp = float(t @ e1)
    flipped = tp < 0
    if flipped:
        t, tp = -t, -tp
    perp = t - tp * e1
    perp -= (perp @ e1) * e1
    pn = math.hypot(*perp)
    if pn <= 8 * np.finfo(float).eps * tn:
        # t parallel to x up to rounding
        return ReducedPoint(xn, tn, 0.0, _complete_frame(e1), flipped)
    frame = _complete_frame(e1, perp)
    return ReducedPoint(xn, min(tp, tn), pn, frame, flipped)


# ------------------------------------------------------------- distance


class CaseTag(str, enum.Enum):
    ORIGIN = "origin"
    VERTICAL = "vertical"
    ABNORMAL = "abnormal"
    BOUNDARY = "boundary"
    CUT = "cut"
    PERPENDICULAR = "perpendicular"
    GENERIC = "generic"


@dataclass(frozen=True)
class DistanceResult:
    d2: float
    case: CaseTag
    theta: ThetaData | None
    chain: tuple[float, ...] | None = None
    u: tuple[float, float] | None = None

    def __iter__(self):
        return iter((self.d2, self.case, self.theta))


def identity_chain(theta: ThetaData, u1: float, u2: float) -> tuple[float, float, float, float, float]:
    """Five closed forms of d(g_u)^2 at the critical point theta."""
    t1, t2, r = theta.theta1, theta.theta2, theta.r
    h, f1, f2, f3 = sf.aux_phis(r)
    p = sf.psi(r)
    s = math.sin(r)
    e1 = t1 * t1 / (r * r) + t2 * t2 / (s * s)
    e2 = -t2 * t2 * p + u1 * t1 + u2 * t2 + 1.0
    e3 = f1 * (u1 * t1 + u2 * t2) / r + 1.0
    e4 = f2 * u1 * r / t1 + 1.0
    e5 = f3 * math.sqrt(u1 * (u1 + u2 * t2 / t1)) + 1.0
    return e1, e2, e3, e4, e5


def _on_boundary(u1: float, u2: float, band: float) -> bool:
    lhs, rhs = PI * u2 * u2, 4.0 * u1
    return abs(lhs - rhs) <= band * max(lhs, rhs)


def cc_distance_squared(g: GroupPoint, boundary_band: float = BOUNDARY_BAND) -> DistanceResult:
    rp = reduce(g)
    xn, a, b = rp.xnorm, rp.t_par, rp.t_perp
    tn = math.hypot(a, b)
    if xn == 0.0:
        if tn == 0.0:
            return DistanceResult(0.0, CaseTag.ORIGIN, None)
        return DistanceResult(4.0 * PI * tn, CaseTag.VERTICAL, None)
    x2 = xn * xn
    if tn == 0.0:
        return DistanceResult(x2, CaseTag.ABNORMAL, None, u=(0.0, 0.0))
    if b <= ALIGN_TOL * tn:
        beta = 4.0 * a / x2
        r = maps.solve_cut_equation(beta)
        return DistanceResult(x2 * (sf.aux_phis(r)[3] * beta + 1.0), CaseTag.CUT, None, u=(beta, 0.0))
    if a <= ALIGN_TOL * tn:
        gamma = 4.0 * b / x2
        r = sf.mu_inverse(gamma)
        th = ThetaData.from_theta(0.0, r, ThetaRegion.OMEGA_PLUS_1)
        return DistanceResult(x2 * (r / math.sin(r)) ** 2, CaseTag.PERPENDICULAR, th, u=(0.0, gamma))
    u1, u2 = 4.0 * a / x2, 4.0 * b / x2
    if _on_boundary(u1, u2, boundary_band):
        alpha = PI * u2 / 2.0
        return DistanceResult(x2 * (1.0 + alpha * alpha), CaseTag.BOUNDARY, None, u=(u1, u2))
    th = maps.lambda_inverse(maps.classify_region(u1, u2))
    chain = identity_chain(th, u1, u2)
    return DistanceResult(x2 * chain[1], CaseTag.GENERIC, th, tuple(x2 * c for c in chain), (u1, u2))


def cc_distance(g1: GroupPoint, g2: GroupPoint) -> float:
    """d(g1, g2) = d(g1^{-1} g2) by left invariance."""
    return math.sqrt(cc_distance_squared(g1.inverse() * g2).d2)


# ------------------------------------------------- reference function


def phi_ref(g: GroupPoint, tau) -> float:
    """Reference phase phi(g; tau), |tau| < theta_1 away from k pi."""
    x, t, tau = np.array(g.x), np.array(g.t), np.asarray(tau, float)
    r = float(np.linalg.norm(tau))
    p = sf.psi(r) if r > 0 else 1.0 / 3.0
    return float(x @ x - p * (r * r * (x @ x) - (tau @ x) ** 2) + 4.0 * t @ tau)


def neg_hess_phi(theta: ThetaData, xnorm: float) -> np.ndarray:
    """-Hess phi(g; .) at (theta1, theta2, 0) for the reduced point g."""
    H = np.zeros((3, 3))
    H[:2, :2] = maps.jacobian_lambda(theta.theta1, theta.theta2)
    H[2, 2] = sf.k_family(theta.theta1, theta.theta2)[2]
    return xnorm * xnorm * H


def det_neg_hess_phi(theta: ThetaData, xnorm: float) -> float:
    _, _, k3, k = sf.k_family(theta.theta1, theta.theta2)
    return theta.theta2 ** 2 * k * k3 * xnorm ** 6


# ----------------------------------------------------- intrinsic D


def intrinsic_D_squared(X, T) -> tuple[float, float | None]:
    xn2 = float(np.dot(X, X))
    tn = float(np.linalg.norm(T))
    if xn2 == 0.0:
        return 4.0 * THETA1 * tn, None
    rho = 4.0 * tn / xn2
    return maps.phi_map(rho) * xn2, maps.z_map(rho)


# ------------------------------------------------------- H and D(u;s)


def _u_pair(u) -> tuple[float, float]:
    if hasattr(u, "u1"):
        return u.u1, u.u2
    return float(u[0]), float(u[1])


def h_family(u, theta: ThetaData, w: float) -> tuple[float, float, float]:
    """(A(w), U(w), H(w)) along the ray s = (-w, 0)."""
    u1, u2 = _u_pair(u)
    wb = theta.wbar
    A = math.sqrt(u1 * u1 + u2 * u2 + 4 * wb * wb * w * w - 4 * u2 * wb * w)
    U = A / (wb * wb * w * w)
    return A, U, wb * wb * w * w * maps.phi_map(U)


def d_curve(u, theta: ThetaData, s) -> float:
    """D(u; s) = D(wbar s, (u + 2 wbar s1 e2 + 2 wbar s2 e3)/4)^2."""
    u1, u2 = _u_pair(u)
    s1, s2 = float(s[0]), float(s[1])
    wb = theta.wbar
    A = math.sqrt(u1 * u1 + (u2 + 2 * wb * s1) ** 2 + 4 * wb * wb * s2 * s2)
    n2 = s1 * s1 + s2 * s2
    if n2 == 0.0:
        return THETA1 * A
    return wb * wb * n2 * maps.phi_map(A / (wb * wb * n2))


def d_curve_polar(u, theta: ThetaData, w: float, gamma: float) -> float:
    return d_curve(u, theta, (-w * math.cos(gamma), -w * math.sin(gamma)))


def d_curve_chain(theta: ThetaData, u1: float, u2: float) -> tuple[float, ...]:
    """Closed forms of D(u; (-1, 0)); each equals d(g_u)^2 - 1."""
    return tuple(c - 1.0 for c in identity_chain(theta, u1, u2))


def h_second_derivative(theta: ThetaData) -> float:
    """H''(1) in closed form."""
    r = theta.r
    _, d1, d2, _ = sf.upsilon_family(r)
    s = math.sin(r)
    return 4.0 * (theta.theta1 ** 2 / (-d1 * r) + theta.theta2 ** 2 / (-d2 * s * s))


# ------------------------------------------------------- regime params


@dataclass(frozen=True)
class RegimeParams:
    m: float
    L1: float
    L2: float
    epsilon: float
    wbar: float
    d2: float
    xnorm: float
    theta: ThetaData | None
    case: CaseTag = CaseTag.GENERIC


def _l_pair(theta: ThetaData, xnorm: float) -> tuple[float, float]:
    r = theta.r
    p, dp, _ = sf.psi_family(r)
    k3 = sf.k_family(theta.theta1, theta.theta2)[2] if theta.theta1 > 0 else 2 * p + dp * r
    L1 = 0.25 * xnorm * xnorm * h_second_derivative(theta)
    L2 = p * r * k3 / (2.0 * dp) * xnorm * xnorm
    return L1, L2


def _boundary_theta(u1: float, u2: float) -> ThetaData:
    # one-sided limit: nudge u into the region above the parabola
    u2n = 2.0 * math.sqrt(u1 / PI) * (1.0 + 1e-7)
    th = maps.lambda_inverse(maps.classify_region(u1, u2n))
    return ThetaData(th.theta1, th.theta2, th.r, ThetaRegion.BOUNDARY_PARABOLA, th.epsilon, th.wbar)


def regime_params(g: GroupPoint, dist: DistanceResult | None = None) -> RegimeParams:
    res = dist if dist is not None else cc_distance_squared(g)
    rp = reduce(g)
    xn = rp.xnorm
    d2 = res.d2
    m = 0.25 * (d2 - xn * xn)
    nan = float("nan")
    if res.case in (CaseTag.ORIGIN, CaseTag.VERTICAL, CaseTag.ABNORMAL):
        return RegimeParams(m, nan, nan, nan, nan, d2, xn, None, res.case)
    if res.case is CaseTag.CUT:
        r = maps.solve_cut_equation(res.u[0])
        p, dp, _ = sf.psi_family(r)
        _, d1, _, _ = sf.upsilon_family(r)
        L1 = r / (-d1) * xn * xn
        L2 = p * p * r / dp * xn * xn
        return RegimeParams(m, L1, L2, THETA1 - r, 0.0, d2, xn, None, res.case)
    theta = res.theta
    if res.case is CaseTag.BOUNDARY:
        theta = _boundary_theta(*res.u)
    L1, L2 = _l_pair(theta, xn)
    return RegimeParams(m, L1, L2, theta.epsilon, theta.wbar, d2, xn, theta, res.case)


class Regime(str, enum.Enum):
    I = "RegimeI"
    II = "RegimeII"
    III = "RegimeIII"
    IV = "RegimeIV"


@dataclass(frozen=True)
class RegimeThresholds:
    alpha0: float = 3.0
    theta2_x_min: float = 30.0
    beta0: float = 1.0
    m_min_ii: float = 30.0
    L1_min_ii: float = 30.0
    L1_max_iii: float = 5.0
    m_min_iii: float = 30.0
    m_max_iv: float = 5.0
    d2_min_iv: float = 30.0


def classify_params(rp: RegimeParams, th: RegimeThresholds = RegimeThresholds()) -> list[Regime]:
    out = []
    theta = rp.theta
    if theta is not None and theta.r <= th.alpha0 and theta.theta2 * rp.xnorm >= th.theta2_x_min:
        out.append(Regime.I)
    if theta is not None and theta.r >= th.beta0 and rp.m >= th.m_min_ii and rp.L1 >= th.L1_min_ii:
        out.append(Regime.II)
    if math.isfinite(rp.L1) and rp.L1 <= th.L1_max_iii and rp.m >= th.m_min_iii:
        out.append(Regime.III)
    if rp.m <= th.m_max_iv and rp.d2 >= th.d2_min_iv:
        out.append(Regime.IV)
    return out


def classify_regime(g: GroupPoint, th: RegimeThresholds = RegimeThresholds()) -> list[Regime]:
    return classify_params(regime_params(g), th)


def point_from_theta(theta1: float, theta2: float, xnorm: float) -> GroupPoint:
    """Reduced point g = (|x| e1, |x|^2 Lambda(theta)/4) attached to theta."""
    u1, u2 = maps.lambda_forward(theta1, theta2)
    x2 = xnorm * xnorm
    return GroupPoint((xnorm, 0.0, 0.0), (0.25 * x2 * u1, 0.25 * x2 * u2, 0.0))
