"""Composite Gauss-Legendre rules and a shifted-contour line integral used
by the heat-kernel routes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import specfun as sf


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite(breaks, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of n-point Gauss-Legendre on every panel of ``breaks``."""
    b = np.asarray(breaks, dtype=float)
    x, w = gauss_legendre(n)
    a, c = b[:-1, None], b[1:, None]
    half = 0.5 * (c - a)
    nodes = (a + c) * 0.5 + half * x
    weights = half * w
    return nodes.ravel(), weights.ravel()


def graded_breaks(scale: float, rmax: float, hmax: float, levels: int = 5) -> np.ndarray:
    """Breakpoints on [0, rmax]: geometric refinement below ``scale``, then
    doubling steps capped at ``hmax``, then uniform steps of ``hmax``."""
    scale = min(scale, rmax)
    out = [0.0] + [scale * 2.0**-k for k in range(levels, 0, -1)] + [scale]
    r = scale
    while r < rmax:
        r = min(r + min(hmax, r), rmax)
        out.append(r)
    return np.asarray(out)


# --------------------------------------------------- shifted line integral


@dataclass(frozen=True)
class LineResult:
    log_scale: float  # value = exp(log_scale) * integral
    integral: float
    est_error: float  # absolute, same units as ``integral``
    n_evals: int
    tau: float


def _line_integrand(rho, tau, n_pow, amp, X2, T, ups_tau):
    z = rho + 1j * tau
    expo = -0.25 * X2 * (sf.upsilon_tilde(z) - ups_tau) + 1j * T * rho if X2 else 1j * T * rho
    val = amp(z) * np.exp(expo)
    if n_pow:
        val = val * z
    return val


def shifted_line(
    amp,
    pole: float,
    n_pow: int,
    X2: float,
    T: float,
    tau: float,
    nodes: int = 16,
    drop: float = 42.0,
    estimate: bool = True,
) -> LineResult:
    """Half-line part of the integral over R + i tau of z^n amp(z) exp(-X2 Ups~(z)/4 + i T z).

    ``n_pow`` = 1 gives the odd case (imaginary part), 0 the even case (real
    part). The full-line integral equals exp(log_scale) * 2 * integral (times
    i in the odd case).
    """
    if not 0.0 <= tau < pole:
        raise ValueError("tau must lie in [0, pole)")
    ups_tau = sf.upsilon_family(tau)[0] if X2 else 0.0
    take = np.imag if n_pow else np.real
    # local width from curvature and pole distance
    ell = min(1.0, pole - tau) if tau > 0 else 1.0
    if X2:
        curv = 0.25 * X2 * abs(sf.upsilon_family(tau)[2])
        if curv > 1.0:
            ell = min(ell, 1.0 / math.sqrt(curv))
    ell = max(ell, 1e-12)
    scan = np.concatenate([ell * np.geomspace(1e-3, 1.0, 16), ell + np.geomspace(0.05, 150.0, 160)])
    mod = np.abs(_line_integrand(scan, tau, n_pow, amp, X2, 0.0, ups_tau))
    with np.errstate(divide="ignore"):
        lm = np.log(mod)
    peak = np.max(lm[np.isfinite(lm)])
    keep = np.nonzero(lm > peak - drop)[0]
    rmax = scan[keep[-1] + 1] if keep[-1] + 1 < len(scan) else scan[-1]
    # one oscillation per panel at most; smooth tails get wider panels
    hmax = min(4.0, 2.0 * math.pi / T) if T > 0 else 4.0
    br = graded_breaks(ell, rmax, hmax)
    x, w = composite(br, nodes)
    v = take(_line_integrand(x, tau, n_pow, amp, X2, T, ups_tau))
    val = float(np.sum(w * v))
    err = 1e-16 * float(np.sum(w * np.abs(v)))
    n2 = 0
    if estimate:
        x2, w2 = composite(br, nodes - 6)
        v2 = take(_line_integrand(x2, tau, n_pow, amp, X2, T, ups_tau))
        err += abs(val - float(np.sum(w2 * v2)))
        n2 = len(x2)
    log_scale = -0.25 * X2 * ups_tau - T * tau
    return LineResult(log_scale, val, err, len(x) + n2 + len(scan), tau)
