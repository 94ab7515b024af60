"""Scalar special functions on N(3,2).

Every public function accepts plain floats.  The amplitude helpers used by the
quadrature layer (``V_amp``, ``calV_amp``, ``upsilon_tilde``, ``f_amp``) also
accept numpy arrays, real or complex, with ``Re z >= 0``.

Evaluation strategy: closed trigonometric forms away from removable points,
even Taylor series in ``r**2`` close to ``r = 0`` (where the closed forms lose
digits to cancellation), and Mittag-Leffler partial fractions with a
Hurwitz-zeta tail as an independent second route.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, optimize, special

from .errors import DomainError, PoleProximity

POLE_GUARD = 1e-10
# Below this radius the closed forms are replaced by Taylor series.  At
# r = 0.05 the numerator of the closed form of Upsilon' already cancels
# about six digits, so the switch sits much further out.  The even series
# converge with ratio (r/pi)^2 <= 0.1 here.
TAYLOR_RADIUS = 1.0
_NTAYLOR = 40


# ---------------------------------------------------------------- roots


def _theta_roots(n: int) -> np.ndarray:
    """First ``n`` positive roots of tan r = r, via Newton on sin r - r cos r."""
    k = np.arange(1, n + 1, dtype=float)
    q = (k + 0.5) * np.pi
    x = q - 1.0 / q - 2.0 / (3.0 * q**3) - 13.0 / (15.0 * q**5)
    for _ in range(6):
        g = np.sin(x) - x * np.cos(x)
        x = x - g / (x * np.sin(x))
    return x


def theta_root(k: int) -> float:
    """k-th positive solution of tan r = r, located in (k pi, (k + 1/2) pi)."""
    if k < 1:
        raise DomainError("theta_root needs k >= 1")
    lo, hi = k * math.pi + 1e-12, (k + 0.5) * math.pi - 1e-12
    x = optimize.brentq(lambda r: math.sin(r) - r * math.cos(r), lo, hi, xtol=1e-16, rtol=1e-15)
    for _ in range(2):
        x -= (math.sin(x) - x * math.cos(x)) / (x * math.sin(x))
    return x


THETA1 = theta_root(1)


@dataclass(frozen=True)
class SpecConfig:
    series_terms: int = 200
    crossover_delta: float = 0.05
    theta_roots: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.series_terms < 50:
            raise DomainError("series_terms must be >= 50")
        if not (0.0 < self.crossover_delta <= 0.1):
            raise DomainError("crossover_delta must lie in (0, 0.1]")
        if not self.theta_roots:
            object.__setattr__(self, "theta_roots", tuple(_theta_roots(self.series_terms)))


@lru_cache(maxsize=8)
def default_config(series_terms: int = 200) -> SpecConfig:
    return SpecConfig(series_terms=series_terms)


# ------------------------------------------------------ Taylor machinery


def _series_reciprocal(b: np.ndarray) -> np.ndarray:
    a = np.zeros_like(b)
    a[0] = 1.0 / b[0]
    for n in range(1, len(b)):
        a[n] = -np.dot(b[1 : n + 1], a[n - 1 :: -1]) / b[0]
    return a


_PSI_C = np.array([2.0 * special.zeta(2 * k + 2) / np.pi ** (2 * k + 2) for k in range(_NTAYLOR)])
_PSI_C[0] = 1.0 / 3.0  # exact, so that Upsilon(0) = 3 to the last bit
_UPS_C = _series_reciprocal(_PSI_C)
_SIGN = (-1.0) ** np.arange(_NTAYLOR)
_F_C = _PSI_C * _SIGN  # (z coth z - 1)/z**2 = psi(i z)
_UPST_C = _UPS_C * _SIGN  # Upsilon~(z) = Upsilon(i z)
_V_C = _series_reciprocal(np.array([1.0 / math.factorial(2 * j + 1) for j in range(_NTAYLOR)]))
_CALV_C = _series_reciprocal(
    np.array([2.0 * (j + 1) / math.factorial(2 * j + 3) for j in range(_NTAYLOR)])
)
# (sin r - r cos r)/r**3 as a series in r**2
_D3_C = np.array([(-1.0) ** k * 2.0 * (k + 1) / math.factorial(2 * k + 3) for k in range(_NTAYLOR)])


def _even_taylor(a, r, order):
    """Value and first ``order`` (<= 3) derivatives of sum a_k r**(2k)."""
    w = r * r
    pv = np.polynomial.polynomial.polyval
    k = np.arange(len(a), dtype=float)
    res = [pv(w, a)]
    if order >= 1:
        c1 = (2 * k * a)[1:]  # r**(2k-1), k>=1
        res.append(r * pv(w, c1))
    if order >= 2:
        c2 = (2 * k * (2 * k - 1) * a)[1:]  # r**(2k-2)
        res.append(pv(w, c2))
    if order >= 3:
        c3 = (2 * k * (2 * k - 1) * (2 * k - 2) * a)[2:]  # r**(2k-3), k>=2
        res.append(r * pv(w, c3))
    return res


# ----------------------------------------------------------- psi family


def _check_poles(r: float) -> None:
    if r >= 3.0:
        k = round(r / math.pi)
        if k >= 1 and abs(r - k * math.pi) < POLE_GUARD:
            raise PoleProximity(f"r={r!r} is within {POLE_GUARD} of the pole {k}*pi")


def psi_family(r: float, cfg: SpecConfig | None = None) -> tuple[float, float, float]:
    """psi(r) = (1 - r cot r)/r**2 and its first two derivatives."""
    r = float(r)
    sgn = -1.0 if r < 0 else 1.0
    a = abs(r)
    _check_poles(a)
    if a < TAYLOR_RADIUS:
        p, dp, ddp = _even_taylor(_PSI_C, a, 2)
    else:
        s, c = math.sin(a), math.cos(a)
        cot = c / s
        csc2 = 1.0 / (s * s)
        p = (1.0 - a * cot) / (a * a)
        dp = (a * a * csc2 + a * cot - 2.0) / a**3
        ddp = -2.0 * (a**3 * cot * csc2 + a * a * csc2 + a * cot - 3.0) / a**4
    return float(p), float(sgn * dp), float(ddp)


def psi(r: float) -> float:
    return psi_family(r)[0]


def _hurwitz_tail_poly(cfg: SpecConfig) -> Polynomial:
    # 2 * sum_{j>N} 1/((j pi)^2 - r^2) = 2 sum_m r^(2m) zeta(2m+2, N+1)/pi^(2m+2)
    n = cfg.series_terms
    coef = np.zeros(12)
    for m in range(6):
        coef[2 * m] = 2.0 * special.zeta(2 * m + 2, n + 1) / np.pi ** (2 * m + 2)
    return Polynomial(coef)


def psi_series_family(r: float, cfg: SpecConfig | None = None) -> tuple[float, float, float]:
    """Partial-fraction route: psi = 2 sum_j 1/((j pi)^2 - r^2) with a zeta tail."""
    cfg = cfg or default_config()
    r = float(r)
    _check_poles(abs(r))
    j = np.arange(1, cfg.series_terms + 1) * np.pi
    den = j * j - r * r
    tail = _hurwitz_tail_poly(cfg)
    p = 2.0 * np.sum(1.0 / den) + tail(r)
    dp = 4.0 * r * np.sum(1.0 / den**2) + tail.deriv(1)(r)
    ddp = 2.0 * np.sum(2.0 / den**2 + 8.0 * r * r / den**3) + tail.deriv(2)(r)
    return float(p), float(dp), float(ddp)


# ------------------------------------------------------ Upsilon family


def upsilon_family(r: float, cfg: SpecConfig | None = None) -> tuple[float, float, float, float]:
    """Upsilon(r) = r**2/(1 - r cot r) = 1/psi(r) and three derivatives, |r| < theta_1."""
    r = float(r)
    a = abs(r)
    if a >= THETA1:
        raise DomainError(f"|r|={a!r} outside (-theta_1, theta_1)")
    sgn = -1.0 if r < 0 else 1.0
    if a < TAYLOR_RADIUS:
        u0, u1, u2, u3 = _even_taylor(_UPS_C, a, 3)
    else:
        s, c = math.sin(a), math.cos(a)
        d = s - a * c
        u0 = a * a * s / d
        u1 = (2 * a * s * s - a * a * s * c - a**3) / d**2
        u2 = (2 * a**4 * s + 4 * a**3 * c - 6 * a * a * s + 2 * s**3) / d**3
        u3 = (
            6 * c * s**3
            - a**5 * (2 + 4 * s * s)
            - 14 * a**4 * c * s
            + a**3 * (28 * s * s - 6)
            + 18 * a * a * c * s
            - 18 * a * s * s
        ) / d**4
    return float(u0), float(sgn * u1), float(u2), float(sgn * u3)


def _upsilon_tail_poly(cfg: SpecConfig) -> Polynomial:
    # sum_{k>N} r^2/(theta_k^2 - r^2) using theta_k^2 = q^2 - 2 - 1/(3 q^2) + ...
    n = cfg.series_terms
    z = [special.zeta(s, n + 1.5) / np.pi**s for s in (2, 4, 6, 8)]
    r2 = Polynomial([0, 0, 1])
    c = Polynomial([2, 0, 1])
    return r2 * (z[0] + z[1] * c + z[2] * (c * c + 1.0 / 3.0) + z[3] * c**3)


def upsilon_series_family(r: float, cfg: SpecConfig | None = None) -> tuple[float, float, float, float]:
    """Partial-fraction route: Upsilon = 3 - 2 sum_k r^2/(theta_k^2 - r^2)."""
    cfg = cfg or default_config()
    r = float(r)
    if abs(r) >= THETA1:
        raise DomainError(f"|r|={abs(r)!r} outside (-theta_1, theta_1)")
    th2 = np.asarray(cfg.theta_roots) ** 2
    r2 = r * r
    den = th2 - r2
    tail = _upsilon_tail_poly(cfg)
    u0 = 3.0 - 2.0 * np.sum(r2 / den) - 2.0 * tail(r)
    u1 = -4.0 * np.sum(th2 * r / den**2) - 2.0 * tail.deriv(1)(r)
    u2 = -4.0 * np.sum(th2 * (th2 + 3 * r2) / den**3) - 2.0 * tail.deriv(2)(r)
    u3 = -48.0 * np.sum(th2 * (th2 + r2) * r / den**4) - 2.0 * tail.deriv(3)(r)
    return float(u0), float(u1), float(u2), float(u3)


# ------------------------------------------------------- auxiliary phis


def _sin2_minus(r: float) -> float:
    """r**2 - sin(r)**2, series near 0."""
    if r < TAYLOR_RADIUS:
        # sin^2 r = sum_{k>=1} (-1)^(k+1) 2^(2k-1) r^(2k)/(2k)!
        return -sum((-1.0) ** (k + 1) * 2.0 ** (2 * k - 1) * r ** (2 * k) / math.factorial(2 * k)
                    for k in range(2, 20))
    return r * r - math.sin(r) ** 2


def _r_minus_sc(r: float) -> float:
    """r - sin r cos r, series near 0."""
    if r < TAYLOR_RADIUS:
        return -sum((-1.0) ** k * (2.0 * r) ** (2 * k + 1) / (2.0 * math.factorial(2 * k + 1))
                    for k in range(1, 20))
    return r - math.sin(r) * math.cos(r)


def aux_h(r: float) -> float:
    """h(r) = r^2 + r sin r cos r - 2 sin^2 r = psi'(r) r^3 sin^2 r."""
    if r < TAYLOR_RADIUS:
        return psi_family(r)[1] * r**3 * math.sin(r) ** 2
    s, c = math.sin(r), math.cos(r)
    return r * r + r * s * c - 2.0 * s * s


def aux_phis(r: float) -> tuple[float, float, float, float]:
    """(h, phi_1, phi_2, phi_3) at r > 0."""
    r = float(r)
    if r <= 0:
        raise DomainError("aux_phis needs r > 0")
    h = aux_h(r)
    num = _sin2_minus(r)
    phi1 = num / _r_minus_sc(r)
    phi2 = r * num / h
    return h, phi1, phi2, math.sqrt(phi1 * phi2)


# ------------------------------------------------------------------- mu


def mu(rho: float) -> float:
    """mu(rho) = (2 rho - sin 2 rho)/(2 sin^2 rho) on (-pi, pi)."""
    rho = float(rho)
    if abs(rho) >= math.pi:
        raise DomainError("mu needs |rho| < pi")
    a = abs(rho)
    if a < TAYLOR_RADIUS:
        # mu = (rho^2 psi)' = rho (2 psi + rho psi')
        p, dp, _ = psi_family(a)
        val = a * (2.0 * p + a * dp)
    else:
        val = (2.0 * a - math.sin(2.0 * a)) / (2.0 * math.sin(a) ** 2)
    return math.copysign(val, rho)


def _dmu(rho: float) -> float:
    # mu = (rho^2 psi)' so mu' = 2 psi + 4 rho psi' + rho^2 psi''
    p, dp, ddp = psi_family(rho)
    return 2.0 * p + 4.0 * rho * dp + rho * rho * ddp


def mu_inverse(gamma: float) -> float:
    """Inverse of mu: the unique rho in (-pi, pi) with mu(rho) = gamma."""
    gamma = float(gamma)
    if gamma == 0.0:
        return 0.0
    g = abs(gamma)
    # mu(pi - d) ~ pi/d^2 near pi, so this upper end always brackets
    d = min(0.5, 0.5 * math.sqrt(math.pi / g))
    while mu(math.pi - d) < g:
        d *= 0.5
    x = optimize.brentq(lambda x: mu(x) - g, 0.0, math.pi - d, xtol=1e-15, rtol=1e-15)
    for _ in range(2):
        step = (mu(x) - g) / _dmu(x)
        if not math.isfinite(step):
            break
        x -= step
    return math.copysign(x, gamma)


# -------------------------------------------------------------- K family


def k1_k2(r: float) -> tuple[float, float]:
    """K1 = psi'(r)/r and K2 = (psi'/r)'/r."""
    r = abs(float(r))
    _check_poles(r)
    if r < TAYLOR_RADIUS:
        k = np.arange(_NTAYLOR, dtype=float)
        pv = np.polynomial.polynomial.polyval
        k1 = pv(r * r, (2 * k * _PSI_C)[1:])
        k2 = pv(r * r, (2 * k * (2 * k - 2) * _PSI_C)[2:])
        return float(k1), float(k2)
    _, dp, ddp = psi_family(r)
    return dp / r, (ddp - dp / r) / (r * r)


def k_family(v1: float, v2: float) -> tuple[float, float, float, float]:
    """(K1, K2, K3, K) at v = (v1, v2), 0 < |v| < theta_1, |v| != pi."""
    r = math.hypot(v1, v2)
    if not (0.0 < r < THETA1):
        raise DomainError(f"|v|={r!r} outside (0, theta_1)")
    _check_poles(r)
    p = psi_family(r)[0]
    k1, k2 = k1_k2(r)
    k3 = 2.0 * p + k1 * v2 * v2
    kk = 2 * p * k1 + v1 * v1 * (2 * p * k2 - 4 * k1 * k1) + v2 * v2 * k1 * (5 * k1 + k2 * r * r)
    return k1, k2, k3, kk


def k_upsilon_form(v1: float, v2: float) -> float:
    """K written through Upsilon and its derivatives."""
    r = math.hypot(v1, v2)
    _check_poles(r)
    u0, u1, u2, _ = upsilon_family(r)
    return 2.0 / (u0**3 * r) * (-u2 / r * v1 * v1 - u1 / math.sin(r) ** 2 * v2 * v2)


# -------------------------------------------------------------- q factor


def _d_over_r3(r: float) -> float:
    """(sin r - r cos r)/r^3."""
    if r < TAYLOR_RADIUS:
        return float(np.polynomial.polynomial.polyval(r * r, _D3_C))
    return (math.sin(r) - r * math.cos(r)) / r**3


def q_factor(r: float) -> float:
    """q(r) = r^2 Upsilon/(-sin r Upsilon' sqrt(-Upsilon'')), even in r.

    Upsilon/sin r = r^2/(sin r - r cos r) removes the 0/0 at r = pi.
    """
    a = abs(float(r))
    if a >= THETA1:
        raise DomainError("q_factor needs |r| < theta_1")
    _, u1, u2, _ = upsilon_family(a)
    if a < TAYLOR_RADIUS:
        k = np.arange(_NTAYLOR, dtype=float)
        mdu_r = -float(np.polynomial.polynomial.polyval(a * a, (2 * k * _UPS_C)[1:]))
    else:
        mdu_r = -u1 / a
    return 1.0 / (_d_over_r3(a) * mdu_r * math.sqrt(-u2))


# ------------------------------------------------------------ amplitudes


def _amp(z, taylor, closed):
    z = np.asarray(z)
    small = np.abs(z) < TAYLOR_RADIUS
    out = np.empty(z.shape, dtype=np.result_type(z, float))
    if np.any(small):
        zs = z[small]
        out[small] = np.polynomial.polynomial.polyval(zs * zs, taylor)
    if np.any(~small):
        out[~small] = closed(z[~small])
    return out if out.ndim else out[()]


def _v_closed(z):
    e = np.exp(-2.0 * z)
    return 2.0 * z * np.exp(-z) / (1.0 - e)


def _calv_closed(z):
    e = np.exp(-2.0 * z)
    return 2.0 * z**3 * np.exp(-z) / ((z - 1.0) + (z + 1.0) * e)


def _upst_closed(z):
    e = np.exp(-2.0 * z)
    return z * z * (1.0 - e) / (z * (1.0 + e) - (1.0 - e))


def _f_closed(z):
    e = np.exp(-2.0 * z)
    return (z * (1.0 + e) / (1.0 - e) - 1.0) / (z * z)


def V_amp(z):
    """z/sinh z (Re z >= 0)."""
    return _amp(z, _V_C, _v_closed)


def calV_amp(z):
    """z^3/(z cosh z - sinh z) (Re z >= 0)."""
    return _amp(z, _CALV_C, _calv_closed)


def upsilon_tilde(z):
    """z^2/(z coth z - 1) (Re z >= 0); equals Upsilon(i z)."""
    return _amp(z, _UPST_C, _upst_closed)


def f_amp(z):
    """(z coth z - 1)/z^2 (Re z >= 0); equals psi(i z)."""
    return _amp(z, _F_C, _f_closed)


def amplitudes(rho: float) -> tuple[float, float, float]:
    """(V, calV, Upsilon~) at rho >= 0."""
    rho = float(rho)
    if rho < 0:
        raise DomainError("amplitudes needs rho >= 0")
    return float(V_amp(rho)), float(calV_amp(rho)), float(upsilon_tilde(rho))


def calV_product(rho: float, n_factors: int = 10_000) -> float:
    """3 prod_k (1 + rho^2/theta_k^2)^(-1), with the tail beyond n_factors
    folded in through a zeta-function estimate of its logarithm."""
    th = _theta_roots(n_factors)
    x = rho * rho / (th * th)
    logp = -np.sum(np.log1p(x))
    z = {s: special.zeta(s, n_factors + 1.5) / np.pi**s for s in (2, 4, 6)}
    s1 = z[2] + 2 * z[4] + 13.0 / 3.0 * z[6]
    s2 = z[4] + 4 * z[6]
    s3 = z[6]
    r2 = rho * rho
    logp -= r2 * s1 - r2 * r2 * s2 / 2.0 + r2**3 * s3 / 3.0
    return 3.0 * math.exp(logp)


# ---------------------------------------------------------------- Bessel


def bessel_i0(r: float) -> float:
    return float(special.i0(r))


def bessel_i0e(r: float) -> float:
    """exp(-|r|) I0(r)."""
    return float(special.i0e(r))


def bessel_i0_partial(rho: float, r: float, scaled: bool = False) -> float:
    """(1/2pi) int_{-rho}^{rho} exp(r cos g) dg for rho in (0, pi].

    With ``scaled`` the factor exp(-|r|) is applied, which keeps large
    arguments finite.
    """
    if not (0.0 < rho <= math.pi):
        raise DomainError("bessel_i0_partial needs rho in (0, pi]")
    shift = abs(r)
    knee = 1.0 / math.sqrt(1.0 + shift)
    val, _ = integrate.quad(lambda g: math.exp(r * math.cos(g) - shift), 0.0, rho,
                            epsabs=0.0, epsrel=1e-13, limit=200,
                            points=[knee] if knee < rho else None)
    val /= math.pi
    return val if scaled else val * math.exp(shift)


def psi_family_arr(r: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised psi_family for r >= 0 (no pole checks; callers keep clear of k pi)."""
    r = np.asarray(r, dtype=float)
    p = np.empty_like(r)
    dp = np.empty_like(r)
    ddp = np.empty_like(r)
    small = r < TAYLOR_RADIUS
    if np.any(small):
        a, b, c = _even_taylor(_PSI_C, r[small], 2)
        p[small], dp[small], ddp[small] = a, b, c
    big = ~small
    if np.any(big):
        a = r[big]
        s, c = np.sin(a), np.cos(a)
        cot = c / s
        csc2 = 1.0 / (s * s)
        p[big] = (1.0 - a * cot) / (a * a)
        dp[big] = (a * a * csc2 + a * cot - 2.0) / a**3
        ddp[big] = -2.0 * (a**3 * cot * csc2 + a * a * csc2 + a * cot - 3.0) / a**4
    return p, dp, ddp


def psi_family_near_pi(delta: float) -> tuple[float, float]:
    """(psi, psi') at r = pi + delta, accurate in relative terms for tiny |delta|."""
    r = math.pi + delta
    cot = math.cos(delta) / math.sin(delta)
    csc2 = 1.0 / math.sin(delta) ** 2
    p = (1.0 - r * cot) / (r * r)
    dp = (r * r * csc2 + r * cot - 2.0) / r**3
    return p, dp


def upsilon_family_arr(r: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised (Upsilon, Upsilon', Upsilon'') for 0 <= r < theta_1."""
    r = np.asarray(r, dtype=float)
    u0 = np.empty_like(r)
    u1 = np.empty_like(r)
    u2 = np.empty_like(r)
    small = r < TAYLOR_RADIUS
    if np.any(small):
        a, b, c = _even_taylor(_UPS_C, r[small], 2)
        u0[small], u1[small], u2[small] = a, b, c
    big = ~small
    if np.any(big):
        a = r[big]
        s, c = np.sin(a), np.cos(a)
        d = s - a * c
        u0[big] = a * a * s / d
        u1[big] = (2 * a * s * s - a * a * s * c - a**3) / d**2
        u2[big] = (2 * a**4 * s + 4 * a**3 * c - 6 * a * a * s + 2 * s**3) / d**3
    return u0, u1, u2
