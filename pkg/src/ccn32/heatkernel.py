"""Heat kernel on N(3,2) at time one and its relatives.

Values are carried in log form because the kernel underflows long before
the interesting asymptotic range. Every evaluator returns a
:class:`KernelResult`; ``value`` is ``exp(log_value)`` and may underflow to
zero for very large distances, while ``log_value`` stays finite.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from . import distance as dist
from . import maps
from . import specfun as sf
from .distance import CaseTag, GroupPoint, Regime, RegimeParams
from .errors import NoisyGradient, RegimeMismatch, ToleranceNotMet
from .quadrature import composite, shifted_line

PI = math.pi
THETA1 = sf.THETA1
LOG_DROP = 46.0  # contributions below exp(-LOG_DROP) of the peak are skipped


@dataclass(frozen=True)
class QuadratureSpec:
    radial_cutoff: float = 60.0
    osc_nodes: int = 12
    rel_tol: float = 1e-8
    abs_tol: float = 1e-20
    max_subdivisions: int = 20000

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.radial_cutoff <= 0 or self.osc_nodes < 4 or self.max_subdivisions < 1:
            raise ValueError("invalid quadrature settings")

    @property
    def panel_nodes(self) -> int:
        return self.osc_nodes + 8


DEFAULT_SPEC = QuadratureSpec()


class Route(str, enum.Enum):
    FOURIER = "FourierForm"
    LAPLACE = "LaplaceForm"


@dataclass(frozen=True)
class KernelResult:
    value: float
    log_value: float
    est_error: float
    n_evals: int
    route: Route
    method: str = ""
    fallback_used: bool = False
    rel_err: float = float("nan")

    @property
    def rel_error(self) -> float:
        """Relative error estimate; stays meaningful when ``value`` underflows."""
        if math.isfinite(self.rel_err):
            return self.rel_err
        return self.est_error / self.value if self.value > 0 else float("nan")

    @classmethod
    def from_log(cls, log_value, rel_err, n_evals, route, method, fallback=False):
        v = math.exp(log_value) if log_value > -745.0 else 0.0
        return cls(v, log_value, abs(rel_err) * v, n_evals, route, method, fallback, abs(rel_err))


def _finish(log_scale, integral, err, n, route, method, q, fallback=False) -> KernelResult:
    if not integral > 0:
        raise ToleranceNotMet(f"{method}: non-positive quadrature value {integral!r}", best=integral)
    lv = log_scale + math.log(integral)
    rel = err / integral
    res = KernelResult.from_log(lv, rel, n, route, method, fallback)
    if rel > max(q.rel_tol, 1e-300) and res.value * rel > q.abs_tol:
        raise ToleranceNotMet(f"{method}: relative error {rel:.2e} above {q.rel_tol:.0e}", best=res)
    return res


# ------------------------------------------------------------ Fourier form


def _reduced(g: GroupPoint):
    rp = dist.reduce(g)
    return rp.xnorm, rp.t_par, rp.t_perp


def _axis_sum(xn: float, q: QuadratureSpec, n: int) -> tuple[float, float, int]:
    """4 pi int R^2 V(R) Dawson(sqrt a)/sqrt a dR, a = |x|^2 R^2 f(R)/4."""
    br = np.arange(0.0, q.radial_cutoff + 1e-9, 1.0)
    R, W = composite(br, n)
    a = 0.25 * xn * xn * R * R * sf.f_amp(R)
    y = np.sqrt(a)
    ratio = np.where(y > 1e-8, special.dawsn(y) / np.where(y > 0, y, 1.0), 1.0 - 2.0 * a / 3.0)
    v = R * R * sf.V_amp(R) * ratio
    s = 4 * PI * float(np.sum(W * v))
    return s, 4 * PI * float(np.sum(W * np.abs(v))), len(R)


def _p_axis(xn: float, q: QuadratureSpec) -> KernelResult:
    n = q.panel_nodes
    s1, mag, k1 = _axis_sum(xn, q, n)
    s2, _, k2 = _axis_sum(xn, q, n - 6)
    err = abs(s1 - s2) + 1e-16 * mag
    return _finish(-0.25 * xn * xn, s1, err, k1 + k2, Route.FOURIER, "fourier-axis", q)


def _p_vertical(tn: float, q: QuadratureSpec) -> KernelResult:
    """p(0, t) through the odd radial integral shifted toward the pole i pi."""
    tau = max(0.0, PI - min(0.5, 1.0 / tn)) if tn > 2.0 else 0.0
    r = shifted_line(sf.V_amp, PI, 1, 0.0, tn, tau, nodes=q.panel_nodes)
    pref = math.log(4 * PI / tn)
    return _finish(r.log_scale + pref, r.integral, r.est_error, r.n_evals, Route.FOURIER, "fourier-vertical", q)


def _plain_sum(xn, t1, t2, q: QuadratureSpec, n: int):
    R_c = q.radial_cutoff
    h1 = min(1.0, 2 * PI / t1) if t1 > 0 else 1.0
    h2 = min(1.0, 2 * PI / t2 if t2 > 0 else 1.0, 2.5 / xn if xn > 0 else 1.0)
    if (R_c / h1) * (R_c / h2) > q.max_subdivisions**2:
        raise ToleranceNotMet("plain Fourier grid too large for max_subdivisions")
    a1, w1 = composite(np.linspace(0.0, R_c, int(math.ceil(R_c / h1)) + 1), n)
    a2, w2 = composite(np.linspace(0.0, R_c, int(math.ceil(R_c / h2)) + 1), n)
    c1 = np.cos(t1 * a1) * w1
    j2 = special.j0(t2 * a2) * a2 * w2
    total, mag = 0.0, 0.0
    step = max(1, 2_000_000 // len(a2))
    for k in range(0, len(a1), step):
        l1 = a1[k:k + step, None]
        R = np.sqrt(l1 * l1 + a2[None, :] ** 2)
        v = sf.V_amp(R) * np.exp(-0.25 * xn * xn * sf.f_amp(R) * a2[None, :] ** 2)
        blk = v * j2[None, :]
        total += float(np.sum(c1[k:k + step, None] * blk))
        mag += float(np.sum(np.abs(c1[k:k + step, None] * blk)))
    scale = 4 * PI
    return scale * total, scale * mag, len(a1) * len(a2)


def _p_plain(xn, t1, t2, q: QuadratureSpec, nodes: int | None = None) -> KernelResult:
    n = nodes or q.panel_nodes
    s1, mag, k1 = _plain_sum(xn, t1, t2, q, n)
    s2, _, k2 = _plain_sum(xn, t1, t2, q, n - 6)
    err = abs(s1 - s2) + 1e-15 * mag
    return _finish(-0.25 * xn * xn, s1, err, k1 + k2, Route.FOURIER, "fourier-plain", q)


def _shifted_sum(xn, u1, u2, theta, d2u, h, Y):
    th = np.array([theta.theta1, theta.theta2])
    J = maps.jacobian_lambda(theta.theta1, theta.theta2)
    k3 = sf.k_family(theta.theta1, theta.theta2)[2] if theta.theta1 > 0 else (
        2 * sf.psi(theta.r) + sf.psi_family(theta.r)[1] * theta.r)
    ev, Q = np.linalg.eigh(J)
    x2 = xn * xn
    sig = np.sqrt(8.0 / (x2 * np.array([ev[0], ev[1], k3])))
    y = np.arange(-Y, Y + 0.5 * h, h)
    eta, jac = np.sinh(y), np.cosh(y) * h
    y3 = np.arange(0.0, Y + 0.5 * h, h)
    eta3, jac3 = np.sinh(y3), np.cosh(y3) * h
    jac3 = jac3.copy()
    jac3[0] *= 0.5
    E1, E2 = np.meshgrid(sig[0] * eta, sig[1] * eta, indexing="ij")
    L1 = Q[0, 0] * E1 + Q[0, 1] * E2
    L2 = Q[1, 0] * E1 + Q[1, 1] * E2
    W12 = np.outer(jac, jac)
    z1 = L1 + 1j * th[0]
    z2 = L2 + 1j * th[1]
    total, mag = 0.0, 0.0
    for l3, w3 in zip(sig[2] * eta3, jac3):
        ww = z1 * z1 + z2 * z2 + l3 * l3
        rt = np.sqrt(ww)
        ex = -0.25 * x2 * (1.0 + sf.f_amp(rt) * (z2 * z2 + l3 * l3) - 1j * (u1 * z1 + u2 * z2)) + 0.25 * x2 * d2u
        val = sf.V_amp(rt) * np.exp(ex)
        total += w3 * float(np.sum(W12 * val.real))
        mag += w3 * float(np.sum(W12 * np.abs(val)))
    vol = 2.0 * float(np.prod(sig))
    return vol * total, vol * mag, len(y) ** 2 * len(y3)


def _p_shifted(xn, u1, u2, theta, d2u, q: QuadratureSpec) -> KernelResult:
    h, Y = 0.2, 4.6
    s1, mag, k1 = _shifted_sum(xn, u1, u2, theta, d2u, h, Y)
    s2, _, k2 = _shifted_sum(xn, u1, u2, theta, d2u, h / 2, Y)
    err = abs(s2 - s1) + 1e-15 * mag
    return _finish(-0.25 * xn * xn * d2u, s2, err, k1 + k2, Route.FOURIER, "fourier-shifted", q)


def _shift_ok(theta, xn) -> bool:
    if theta is None or theta.r >= PI:
        return False
    return 0.25 * xn * xn * theta.theta2 ** 2 * sf.psi(theta.r) >= 40.0


def p_fourier(g: GroupPoint, q: QuadratureSpec = DEFAULT_SPEC, method: str = "auto") -> KernelResult:
    """Time-one kernel from the Fourier representation.

    ``method`` is one of ``auto``, ``plain`` or ``shifted``. The shifted
    variant moves the integration domain to R^3 + i theta, which is legal
    when |theta| < pi, and then needs no cancellation.
    """
    xn, t1, t2 = _reduced(g)
    tn = math.hypot(t1, t2)
    if tn == 0.0:
        return _p_axis(xn, q)
    if xn == 0.0:
        return _p_vertical(tn, q)
    if method == "plain":
        return _p_plain(xn, t1, t2, q)
    res = dist.cc_distance_squared(g)
    theta = res.theta
    if method == "shifted" or (method == "auto" and _shift_ok(theta, xn)):
        if theta is None or theta.r >= PI:
            raise ToleranceNotMet("shifted Fourier route needs |theta| < pi")
        u1, u2 = res.u
        return _p_shifted(xn, u1, u2, theta, res.d2 / (xn * xn), q)
    return _p_plain(xn, t1, t2, q)


# ------------------------------------------------------------ the kernel P


def _line_tau(X2: float, T: float, pole: float) -> float:
    if T == 0.0:
        return 0.0
    cap = pole - min(0.5, 1.0 / T) if T > 2.0 else max(0.0, pole - 0.5)
    if X2 == 0.0:
        return cap
    return min(maps.z_map(4.0 * T / X2), cap)


def log_P(X2: float, T: float, q: QuadratureSpec = DEFAULT_SPEC, tau: float | None = None,
          estimate: bool = True):
    """(log P, relative error, evaluations) for P at |X|^2 = X2, |T| = T."""
    if T == 0.0:
        r = shifted_line(_rho2_calv, THETA1, 0, X2, 0.0, 0.0, nodes=q.panel_nodes, estimate=estimate)
        return r.log_scale + math.log(4 * PI * r.integral), r.est_error / r.integral, r.n_evals
    if tau is None:
        tau = _line_tau(X2, T, THETA1)
    r = shifted_line(sf.calV_amp, THETA1, 1, X2, T, tau, nodes=q.panel_nodes, estimate=estimate)
    if not r.integral > 0:
        raise ToleranceNotMet("P quadrature lost positivity", best=r)
    return r.log_scale + math.log(4 * PI / T * r.integral), r.est_error / r.integral, r.n_evals


def _rho2_calv(z):
    return z * z * sf.calV_amp(z)


def P_kernel(Xnorm: float, Tnorm: float, q: QuadratureSpec = DEFAULT_SPEC) -> KernelResult:
    lv, rel, n = log_P(Xnorm * Xnorm, abs(Tnorm), q)
    res = KernelResult.from_log(lv, rel, n, Route.FOURIER, "radial-shift")
    if rel > q.rel_tol:
        raise ToleranceNotMet(f"P: relative error {rel:.2e}", best=res)
    return res


# ------------------------------------------------------------ Laplace form


def _h_ray(xn, u1, u2, wb, w):
    w = np.asarray(w, float)
    A = np.sqrt(u1 * u1 + u2 * u2 + 4 * wb * wb * w * w - 4 * u2 * wb * w)
    return wb * wb * w * w * maps.phi_map_arr(A / (wb * wb * w * w))


def _ray_limits(xn, u1, u2, wb, m):
    """w-range outside which the Laplace integrand is below exp(-LOG_DROP)."""
    x2 = 0.25 * xn * xn
    f = lambda w: x2 * float(_h_ray(xn, u1, u2, wb, w)) - m - LOG_DROP
    hi = 2.0
    while f(hi) < 0:
        hi *= 2.0
    lo_b = 1.0
    for _ in range(60):
        mid = 0.5 * (lo_b + hi)
        if f(mid) < 0:
            lo_b = mid
        else:
            hi = mid
    w_hi = hi
    w0 = x2 * THETA1 * math.hypot(u1, u2) - m - LOG_DROP
    if w0 <= 0:
        return 0.0, w_hi
    a, b = 1e-12, 1.0
    for _ in range(60):
        mid = math.sqrt(a * b) if b > 100 * a else 0.5 * (a + b)
        if f(mid) > 0:
            a = mid
        else:
            b = mid
    return a, w_hi


def _laplace_grid(w_lo, w_hi, sw, sg, n, ystep):
    y_lo = math.asinh((w_lo - 1.0) / sw)
    y_hi = math.asinh((w_hi - 1.0) / sw)
    ny = max(2, int(math.ceil((y_hi - y_lo) / ystep)))
    yw, ww = composite(np.linspace(y_lo, y_hi, ny + 1), n)
    w = 1.0 + sw * np.sinh(yw)
    ww = ww * sw * np.cosh(yw)
    g_hi = math.asinh(PI / sg)
    ng = max(2, int(math.ceil(g_hi / ystep)))
    yg, wg = composite(np.linspace(0.0, g_hi, ng + 1), n)
    gam = sg * np.sinh(yg)
    wg = wg * sg * np.cosh(yg)
    return w, ww, gam, wg


def _laplace_sum(xn, u1, u2, wb, m, grid, q):
    w, ww, gam, wg = grid
    W, G = np.meshgrid(w, gam, indexing="ij")
    WT = np.outer(ww, wg)
    A = np.sqrt(u1 * u1 + u2 * u2 + 4 * wb * wb * W * W - 4 * u2 * wb * W * np.cos(G))
    X2 = (xn * wb * W) ** 2
    T = 0.25 * xn * xn * A
    D2 = X2 * maps.phi_map_arr(4 * T / X2)
    expo = -0.25 * D2 + m
    live = np.nonzero(expo > -LOG_DROP)
    Xl, Tl = X2[live], T[live]
    tau = np.minimum(maps.z_map_arr(4 * Tl / Xl), THETA1 - np.minimum(0.5, 1.0 / np.maximum(Tl, 2.0)))
    logs = np.empty(len(Xl))
    n_ev = 0
    for k in range(len(Xl)):
        lp, _, nk = log_P(float(Xl[k]), float(Tl[k]), q, tau=float(tau[k]), estimate=False)
        n_ev += nk
        logs[k] = lp + m
    wts = WT[live] * W[live]
    top = float(np.max(logs))
    terms = wts * np.exp(logs - top)
    s = float(np.sum(terms))
    # inner rule error, sampled at the heaviest nodes
    worst = 0.0
    for k in np.argsort(terms)[-3:]:
        _, rel, nk = log_P(float(Xl[k]), float(Tl[k]), q, tau=float(tau[k]), estimate=True)
        n_ev += nk
        worst = max(worst, rel)
    inner = worst * s
    pref = math.log(xn * xn * wb * wb / (4 * PI) * 2.0)
    return pref + top, s, inner, n_ev


def p_laplace(g: GroupPoint, q: QuadratureSpec = DEFAULT_SPEC, wbar: float | None = None) -> KernelResult:
    """Time-one kernel from the Laplace-type representation (positive integrand)."""
    res = dist.cc_distance_squared(g)
    xn, _, _ = _reduced(g)
    if res.case in (CaseTag.ORIGIN, CaseTag.VERTICAL, CaseTag.ABNORMAL):
        return replace(p_fourier(g, q), fallback_used=True)
    rp = dist.regime_params(g, res)
    wb = wbar if wbar is not None else rp.wbar
    if not wb or wb * xn < 1e-4:
        return replace(p_fourier(g, q), fallback_used=True)
    u1, u2 = res.u
    m = rp.m
    sw = min(0.5, 1.0 / math.sqrt(max(rp.L1, 1e-300))) if math.isfinite(rp.L1) else 0.5
    sg = min(1.0, 1.0 / math.sqrt(max(rp.L2, 1e-300))) if math.isfinite(rp.L2) else 1.0
    w_lo, w_hi = _ray_limits(xn, u1, u2, wb, m)
    n = q.panel_nodes - 10
    lp1, s1, in1, k1 = _laplace_sum(xn, u1, u2, wb, m, _laplace_grid(w_lo, w_hi, sw, sg, n, 1.0), q)
    lp2, s2, _, k2 = _laplace_sum(xn, u1, u2, wb, m, _laplace_grid(w_lo, w_hi, sw, sg, n - 2, 1.0), q)
    v2 = s2 * math.exp(lp2 - lp1)
    err = abs(s1 - v2) + in1
    return _finish(lp1 - 0.25 * xn * xn - m, s1, err, k1 + k2, Route.LAPLACE, "laplace", q)


# ------------------------------------------------------------ dispatcher

PLAIN_M_MAX = 12.0


def choose_method(g: GroupPoint) -> str:
    xn, t1, t2 = _reduced(g)
    if xn == 0.0 or (t1 == 0.0 and t2 == 0.0):
        return "fourier"
    res = dist.cc_distance_squared(g)
    m = 0.25 * (res.d2 - xn * xn)
    if m <= PLAIN_M_MAX:
        return "plain"
    if _shift_ok(res.theta, xn):
        return "shifted"
    if res.case is CaseTag.CUT:
        return "plain"
    return "laplace"


def log_p(g: GroupPoint, q: QuadratureSpec = DEFAULT_SPEC, method: str | None = None) -> KernelResult:
    """Best available route for p(g); ``method`` pins the choice."""
    method = method or choose_method(g)
    if method == "laplace":
        return p_laplace(g, q)
    if method in ("plain", "shifted"):
        xn, t1, t2 = _reduced(g)
        if xn > 0 and (t1 or t2):
            return p_fourier(g, q, method)
    return p_fourier(g, q)


def heat_kernel(g: GroupPoint, q: QuadratureSpec = DEFAULT_SPEC) -> KernelResult:
    return log_p(g, q)


def heat_kernel_time_log(h: float, g: GroupPoint, q: QuadratureSpec = DEFAULT_SPEC, method=None) -> float:
    """log p_h(g) with the normalising constant set to one."""
    if h <= 0:
        raise ValueError("h must be positive")
    return -4.5 * math.log(h) + log_p(g.dilate(1.0 / math.sqrt(h)), q, method).log_value


def heat_kernel_time(h: float, g: GroupPoint, q: QuadratureSpec = DEFAULT_SPEC) -> float:
    return math.exp(heat_kernel_time_log(h, g, q))


# ------------------------------------------------------------ abnormal F


def log_F_abnormal(v1: float, v2: float, q: QuadratureSpec = DEFAULT_SPEC) -> tuple[float, float]:
    X2, T = v1 * v1, abs(v2)
    tau = _line_tau(X2, T, THETA1)
    r = shifted_line(sf.calV_amp, THETA1, 0, X2, T, tau, nodes=q.panel_nodes)
    if not r.integral > 0:
        raise ToleranceNotMet("F quadrature lost positivity", best=r)
    return r.log_scale + math.log(2.0 * r.integral), r.est_error / r.integral


def F_abnormal(v1: float, v2: float, q: QuadratureSpec = DEFAULT_SPEC) -> float:
    lv, rel = log_F_abnormal(v1, v2, q)
    if rel > q.rel_tol:
        raise ToleranceNotMet(f"F: relative error {rel:.2e}", best=math.exp(lv))
    return math.exp(lv)


# ------------------------------------------------------------ asymptotics


def _regime_key(regime) -> str:
    return regime.value if hasattr(regime, "value") else str(regime)


def _log_i0e(x: float) -> float:
    return math.log(special.i0e(x))


def _leading_iii(g: GroupPoint, rp: RegimeParams, u1: float, u2: float, n: int = 24) -> float:
    xn, wb, x2 = rp.xnorm, rp.wbar, rp.xnorm ** 2
    A1 = rp.theta.theta2 ** 2 * sf.psi_family(rp.theta.r)[1]
    w0 = xn ** -0.5 * u1 ** 0.75 / wb
    w, ww = composite(np.linspace(0.0, w0, 9), n)
    gam, wg = composite(np.linspace(0.0, PI, 9), n)
    W, G = np.meshgrid(w, gam, indexing="ij")
    Ap = np.sqrt(u1 * u1 + u2 * u2 + 4 * wb * wb * W * W - 4 * u2 * wb * W * np.cos(G))
    gap = THETA1 - maps.z_map_arr(Ap / (wb * wb * W * W))
    quad = (np.sqrt(THETA1 * Ap) - wb * wb * W) ** 2 - (math.sqrt(THETA1 * A1) - wb) ** 2
    c = THETA1 * x2 * wb * wb * W * W / (2 * gap)
    lf = -0.25 * x2 * quad + np.log(special.i0e(c)) + 2 * np.log(gap) - np.log(W)
    top = float(np.max(lf))
    s = 2.0 * float(np.sum(np.outer(ww, wg) * np.exp(lf - top)))
    return top + math.log(s)


def log_asymptotic_leading(g: GroupPoint, regime, thresholds=None, check: bool = True) -> float:
    """log of the leading term of the large-distance asymptotics for ``regime``."""
    key = _regime_key(regime)
    res = dist.cc_distance_squared(g)
    rp = dist.regime_params(g, res)
    if check:
        th = thresholds or dist.RegimeThresholds()
        have = {r.value for r in dist.classify_params(rp, th)}
        if key not in have:
            raise RegimeMismatch(f"{key} hypotheses fail at this point (found {sorted(have)})")
    d2 = rp.d2
    if key == Regime.IV.value:
        xn = rp.xnorm
        u1, u2 = res.u if res.u is not None else (0.0, 0.0)
        lf, _ = log_F_abnormal(0.5 * xn * u2, 0.25 * xn * xn * u1)
        return -0.25 * xn * xn + math.log(4 * PI / (xn * xn)) + lf
    theta = rp.theta
    if theta is None:
        raise RegimeMismatch(f"{key} needs a critical point theta")
    r = theta.r
    if key == Regime.I.value:
        det = dist.det_neg_hess_phi(theta, rp.xnorm)
        return 1.5 * math.log(8 * PI) - 0.25 * d2 + math.log(r / math.sin(r)) - 0.5 * math.log(det)
    if key == Regime.II.value:
        eps = rp.epsilon
        b = THETA1 * rp.xnorm ** 2 * rp.wbar ** 2 / (2 * eps)
        return (math.log(16 * PI * PI * math.sqrt(PI * THETA1) * sf.q_factor(r))
                + _log_i0e(rp.L2) - 0.5 * math.log(eps * rp.L1) + _log_i0e(b) - 0.25 * d2)
    if key == Regime.III.value:
        u1, u2 = res.u
        return math.log(4 * PI * THETA1 ** 2 / -math.sin(THETA1)) - 0.25 * d2 + _leading_iii(g, rp, u1, u2)
    raise ValueError(f"unknown regime {regime!r}")


def asymptotic_leading(g: GroupPoint, regime, thresholds=None, check: bool = True) -> float:
    return math.exp(log_asymptotic_leading(g, regime, thresholds, check))


# ------------------------------------------------------------ bounds


def log_bnd(g: GroupPoint, rp: RegimeParams | None = None) -> float:
    rp = rp or dist.regime_params(g)
    d2 = rp.d2
    if rp.case is CaseTag.ABNORMAL:
        return -2.0 * math.log(rp.xnorm) - 0.25 * d2
    if rp.case in (CaseTag.ORIGIN, CaseTag.VERTICAL):
        return -math.log1p(d2) - 0.25 * d2
    L1, L2 = rp.L1, rp.L2
    return (-math.log1p(d2) + 0.5 * math.log1p(L1)
            - 0.5 * math.log(1.0 + L1 + rp.epsilon * rp.m * L2) - 0.25 * d2)


def bnd(g: GroupPoint) -> float:
    return math.exp(log_bnd(g))


def log_bound_ratio(g: GroupPoint, q: QuadratureSpec = DEFAULT_SPEC) -> float:
    return log_p(g, q).log_value - log_bnd(g)


def bound_ratio(g: GroupPoint, q: QuadratureSpec = DEFAULT_SPEC) -> float:
    return math.exp(log_bound_ratio(g, q))


def log_simhud_ratio(g: GroupPoint, branch: int, q: QuadratureSpec = DEFAULT_SPEC,
                     log_value: float | None = None) -> float:
    """log of p over the two-branch simplified envelope (branch 1: |x|^2 <~ |t|, 2: |x|^2 >> |t|).

    ``log_value`` reuses an already computed log p(g).
    """
    xn, t1, t2 = _reduced(g)
    tn = math.hypot(t1, t2)
    d2 = dist.cc_distance_squared(g).d2
    if branch == 1:
        env = -0.5 * math.log1p(t2 * xn / math.sqrt(tn)) - math.log(tn)
    elif branch == 2:
        env = -math.log1p(t2 / xn + xn ** -0.5 * t1 ** 0.25 * t2 ** 0.5) - 2 * math.log(xn)
    else:
        raise ValueError("branch must be 1 or 2")
    if log_value is None:
        log_value = log_p(g, q).log_value
    return log_value - env + 0.25 * d2


# ------------------------------------------------------------ derivatives


def _shift(g: GroupPoint, j: int, s: float) -> GroupPoint:
    e = [0.0, 0.0, 0.0]
    e[j] = s
    return g * GroupPoint(tuple(e), (0.0, 0.0, 0.0))


def grad_log_p(g: GroupPoint, q: QuadratureSpec = DEFAULT_SPEC, method: str | None = None,
               step: float | None = None) -> np.ndarray:
    """(X1 p, X2 p, X3 p)/p by central differences along the left-invariant flows."""
    method = method or choose_method(g)
    c = log_p(g, q, method)
    rel = max(c.rel_error if math.isfinite(c.rel_error) else 1e-12, 1e-14)
    h = step or max(1e-4, rel ** (1.0 / 3.0))
    out = np.zeros(3)
    for j in range(3):
        fp = log_p(_shift(g, j, h), q, method).log_value
        fm = log_p(_shift(g, j, -h), q, method).log_value
        diff = fp - fm
        if abs(diff) < 10 * rel and abs(diff) > 0 and np.linalg.norm(g.x) + np.linalg.norm(g.t) > 0:
            raise NoisyGradient(f"FD signal {diff:.2e} below noise {rel:.2e}")
        out[j] = diff / (2 * h)
    return out


def heat_equation_residual(g: GroupPoint, q: QuadratureSpec = DEFAULT_SPEC, step: float = 1e-2) -> float:
    """Relative mismatch between d/dh p_h and the sub-Laplacian of p_h at h = 1."""
    def ph(h, pt):
        return math.exp(heat_kernel_time_log(h, pt, q, method="plain"))

    p0 = ph(1.0, g)
    dt = (ph(1.0 + step, g) - ph(1.0 - step, g)) / (2 * step)
    lap = 0.0
    for j in range(3):
        lap += (ph(1.0, _shift(g, j, step)) - 2 * p0 + ph(1.0, _shift(g, j, -step))) / step**2
    return abs(dt - lap) / max(abs(dt), abs(lap))


# ------------------------------------------------------------ constants


def origin_value() -> float:
    """p(o) = 4 pi int_0^inf R^3/sinh R dR = pi^5/2."""
    return PI**5 / 2.0
