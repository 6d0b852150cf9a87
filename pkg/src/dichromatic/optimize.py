"""Scalar minimization of spectral densities over the probe power K."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

INV_PHI = (math.sqrt(5) - 1) / 2
_STEP = 1e-20


def golden_section(f, a: float, b: float, rtol: float = 1e-10, max_iter: int = 500):
    """Golden-section search for a minimum of ``f`` on [a, b]; returns (x, f(x))."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= rtol * max(abs(a), abs(b), 1.0):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _slope(f, u):
    """d f(10**u) / du by the complex step, free of subtractive cancellation."""
    return float(np.imag(f(10.0 ** complex(u, _STEP)))) / _STEP


def minimize_over_K(f, k_ref: float, lo: float = 1e-6, hi: float = 1e6, rtol: float = 1e-10,
                    polish: bool = True) -> tuple[float, float]:
    """Minimize ``f(K)`` for K in [lo, hi] * k_ref.

    Golden-section search on log10 K locates the minimum; when ``f`` accepts
    complex K (it is analytic in K), the location is refined by a bracketed
    root of the complex-step derivative, because a comparison-only search
    cannot resolve the argmin of a quadratic-bottomed function below
    ~sqrt(machine epsilon).
    """
    if k_ref <= 0:
        raise ValueError("reference power must be positive")
    real_f = lambda u: float(np.real(f(10.0 ** u)))
    u_lo, u_hi = math.log10(lo * k_ref), math.log10(hi * k_ref)
    u, _ = golden_section(real_f, u_lo, u_hi, rtol=rtol)
    if polish:
        try:
            u = _polish(f, u, u_lo, u_hi)
        except (TypeError, ValueError):
            pass
    K = 10.0 ** u
    return K, real_f(u)


def _polish(f, u, u_lo, u_hi):
    width = 1e-6
    while True:
        a, b = max(u - width, u_lo), min(u + width, u_hi)
        sa, sb = _slope(f, a), _slope(f, b)
        if sa == 0:
            return a
        if sb == 0:
            return b
        if sa < 0 < sb:
            return brentq(lambda x: _slope(f, x), a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        if a == u_lo and b == u_hi:
            raise ValueError("no interior stationary point")
        width *= 10
