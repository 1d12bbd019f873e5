"""Real-argument special functions with explicit domain and overflow checks.

The numerical kernels come from :mod:`scipy.special`; this module adds the
argument validation, overflow signalling and error bookkeeping that the rest
of the package relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

from .errors import ConvergenceError, DomainError, OverflowSignal

__all__ = [
    "SpecFunResult",
    "gamma",
    "ln_gamma",
    "erfc",
    "erfcx",
    "bessel_i",
    "bessel_i_scaled",
    "hyp1f1",
    "hyp2f1",
]

# documented relative accuracy of each routine, used for the error estimate
_REL = {
    "gamma": 1e-14,
    "ln_gamma": 1e-15,
    "erfc": 1e-14,
    "bessel_i": 1e-13,
    "hyp1f1": 1e-12,
    "hyp2f1": 1e-12,
}


@dataclass(frozen=True)
class SpecFunResult:
    """A function value with an absolute error estimate."""

    value: float
    est_abs_error: float


def _wrap(value: float, kind: str, full: bool):
    value = float(value)
    if not full:
        return value
    return SpecFunResult(value, abs(value) * _REL[kind] + 1e-300)


def gamma(x: float, full: bool = False):
    """Gamma function for real x > 0.

    Raises
    ------
    DomainError
        If x <= 0.
    OverflowSignal
        If x > 171 (result exceeds double range).
    """
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"gamma: x must be positive, got {x}")
    if x > 171.0:
        raise OverflowSignal(f"gamma: overflow for x = {x}")
    return _wrap(sp.gamma(x), "gamma", full)


def ln_gamma(x: float, full: bool = False):
    """Natural log of the Gamma function for real x > 0."""
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"ln_gamma: x must be positive, got {x}")
    return _wrap(sp.gammaln(x), "ln_gamma", full)


def erfc(x, full: bool = False):
    """Complementary error function; accepts scalars or arrays."""
    if np.ndim(x):
        return sp.erfc(np.asarray(x, dtype=float))
    return _wrap(sp.erfc(float(x)), "erfc", full)


def erfcx(x):
    """Scaled complementary error function exp(x^2) erfc(x)."""
    if np.ndim(x):
        return sp.erfcx(np.asarray(x, dtype=float))
    return float(sp.erfcx(float(x)))


def _check_bessel_args(nu, x):
    if int(nu) != nu or nu < 0 or nu > 64:
        raise DomainError(f"bessel_i: order must be an integer in 0..64, got {nu}")
    if np.any(np.asarray(x) < 0):
        raise DomainError("bessel_i: argument must be non-negative")


def bessel_i_scaled(nu: int, x):
    """exp(-x) I_nu(x) for x >= 0; never overflows."""
    _check_bessel_args(nu, x)
    if np.ndim(x):
        return sp.ive(nu, np.asarray(x, dtype=float))
    return float(sp.ive(nu, float(x)))


def bessel_i(nu: int, x, full: bool = False):
    """Modified Bessel function of the first kind I_nu(x), integer nu.

    Raises
    ------
    OverflowSignal
        If the unscaled value exceeds double range (x beyond about 713).
    """
    _check_bessel_args(nu, x)
    scaled = sp.ive(nu, np.asarray(x, dtype=float))
    with np.errstate(over="ignore"):
        value = scaled * np.exp(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(value)):
        raise OverflowSignal("bessel_i: result overflows; use bessel_i_scaled")
    if np.ndim(x):
        return value
    return _wrap(value, "bessel_i", full)


def hyp1f1(a: float, b: float, x: float, full: bool = False):
    """Confluent hypergeometric function 1F1(a; b; x) for x >= 0.

    Raises
    ------
    DomainError
        If b is a non-positive integer or x < 0.
    ConvergenceError
        If the evaluation does not return a finite value.
    """
    a, b, x = float(a), float(b), float(x)
    if b <= 0 and b == math.floor(b):
        raise DomainError(f"hyp1f1: b must not be a non-positive integer, got {b}")
    if x < 0:
        raise DomainError(f"hyp1f1: x must be non-negative, got {x}")
    value = sp.hyp1f1(a, b, x)
    if not np.isfinite(value):
        partial = _hyp1f1_series_partial(a, b, x)
        raise ConvergenceError("hyp1f1: evaluation failed", partial=partial)
    return _wrap(value, "hyp1f1", full)


def _hyp1f1_series_partial(a, b, x, max_terms=10000):
    term = 1.0
    total = 1.0
    for k in range(max_terms):
        term *= (a + k) / (b + k) * x / (k + 1)
        total += term
        if not np.isfinite(total) or abs(term) < 1e-16 * abs(total):
            break
    return total


def hyp2f1(a: float, b: float, c: float, x: float, full: bool = False):
    """Gauss hypergeometric function 2F1(a, b; c; x) for 0 <= x < 1.

    Raises
    ------
    DomainError
        If c <= 0 or x is outside [0, 1).
    ConvergenceError
        If c - a - b <= 0 and x > 1 - 1e-6, where the series diverges at
        the endpoint and the value is not reliable.
    """
    a, b, c, x = float(a), float(b), float(c), float(x)
    if not c > 0:
        raise DomainError(f"hyp2f1: c must be positive, got {c}")
    if not 0.0 <= x < 1.0:
        raise DomainError(f"hyp2f1: x must lie in [0, 1), got {x}")
    if c - a - b <= 0 and x > 1.0 - 1e-6:
        raise ConvergenceError("hyp2f1: divergent near x = 1 for c - a - b <= 0")
    value = sp.hyp2f1(a, b, c, x)
    if not np.isfinite(value):
        raise ConvergenceError("hyp2f1: evaluation failed")
    return _wrap(value, "hyp2f1", full)
