"""Quadrature and series-acceleration helpers.

Everything here is vectorized: integrands receive a NumPy array of abscissae
and must return an array of the same shape.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ConvergenceError

__all__ = [
    "gauss_legendre",
    "composite_nodes",
    "tanh_sinh",
    "tanh_sinh_semi_infinite",
    "gauss_kronrod",
    "alternating_sum",
]

ArrayFn = Callable[[np.ndarray], np.ndarray]


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1] (read-only arrays)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_nodes(breaks: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of an n-point Gauss-Legendre rule on every panel.

    Parameters
    ----------
    breaks : ndarray, shape (..., P + 1)
        Panel endpoints along the last axis. Leading axes are batch axes, so
        one call builds independent rules for many integrals at once.
    n : int
        Nodes per panel.

    Returns
    -------
    nodes, weights : ndarray, shape (..., P * n)
    """
    x, w = gauss_legendre(n)
    lo = breaks[..., :-1, None]
    hi = breaks[..., 1:, None]
    half = 0.5 * (hi - lo)
    nodes = lo + half * (x + 1.0)
    weights = half * w
    shape = breaks.shape[:-1] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)


# --- tanh-sinh -------------------------------------------------------------

def _ts_level(h: float, offset: float, tmax: float):
    """Abscissae parameters t = offset + k*step on (0, tmax], step = 2h if offset else h."""
    step = 2.0 * h if offset else h
    t = np.arange(offset if offset else h, tmax + 0.5 * h, step)
    q = 0.5 * np.pi * np.sinh(t)
    # distance from the endpoint in units of (b - a): 1/(1 + e^{2q})
    dist = np.exp(-np.logaddexp(0.0, 2.0 * q))
    w = 0.5 * np.pi * np.cosh(t) * np.exp(-2.0 * np.logaddexp(0.0, -2.0 * q) - 2.0 * q) * 4.0
    # w = (pi/2) cosh t / cosh^2 q, written to avoid overflow of cosh q
    return dist, w


def tanh_sinh(f: ArrayFn, a: float, b: float, *, rtol: float = 1e-10, atol: float = 0.0,
              max_level: int = 9, tmax: float = 6.5) -> tuple[float, float]:
    """Integrate ``f`` over [a, b] with the double-exponential rule.

    Endpoint distances are formed without cancellation, so integrable power
    singularities at either end are handled as long as ``f`` can be evaluated
    arbitrarily close to them. Nodes whose weight underflows are dropped.

    Returns
    -------
    value, est_abs_error : float
        The error estimate is the change between the last two levels.
    """
    a = float(a)
    b = float(b)
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0
    length = b - a
    half = 0.5 * length
    mid = a + half

    def level_sum(dist, w):
        keep = w > 0.0
        dist = dist[keep]
        w = w[keep]
        x = np.concatenate([a + length * dist, b - length * dist])
        ww = np.concatenate([w, w])
        fx = np.asarray(f(x), dtype=float)
        if not np.all(np.isfinite(fx)):
            bad = ~np.isfinite(fx)
            # underflow of w*f to 0 is fine, genuine non-finite values are not
            if np.any(ww[bad] > 1e-300):
                raise ConvergenceError("tanh-sinh: integrand not finite at interior node")
            fx = np.where(bad, 0.0, fx)
        return float(np.dot(ww, fx))

    h = 1.0
    f0 = float(np.asarray(f(np.array([mid])), dtype=float)[0])
    raw = 0.5 * np.pi * f0
    dist, w = _ts_level(h, 0.0, tmax)
    raw += level_sum(dist, w)
    estimate = half * h * raw
    err = np.inf
    for level in range(1, max_level + 1):
        h *= 0.5
        dist, w = _ts_level(h, h, tmax)
        raw += level_sum(dist, w)
        new = half * h * raw
        err = abs(new - estimate)
        estimate = new
        if level >= 3 and err <= max(atol, rtol * abs(estimate)):
            return sign * estimate, err
    raise ConvergenceError(
        f"tanh-sinh did not converge (last change {err:.3g})",
        partial=sign * estimate,
        est_error=err,
    )


def tanh_sinh_semi_infinite(f: ArrayFn, *, split: float = 1.0, rtol: float = 1e-10,
                            atol: float = 0.0, max_level: int = 9) -> tuple[float, float]:
    """Integrate ``f`` over [0, inf) as [0, split] plus the reflected tail.

    The tail uses x = split / s, so an algebraic decay x^-p with p > 1 becomes
    an integrable endpoint singularity at s = 0.
    """
    v1, e1 = tanh_sinh(f, 0.0, split, rtol=rtol, atol=atol, max_level=max_level)

    def tail(s):
        # below s = 1e-150 the remaining mass is s^(p-1) for decay x^-p, so
        # clipping only guards against inf/inf
        s = np.maximum(s, 1e-150)
        x = split / s
        return np.asarray(f(x), dtype=float) * split / (s * s)

    v2, e2 = tanh_sinh(tail, 0.0, 1.0, rtol=rtol, atol=atol, max_level=max_level)
    return v1 + v2, e1 + e2


# --- adaptive Gauss-Kronrod --------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_K_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_K_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss points are the odd-indexed Kronrod points (0-based 1, 3, ..., 13)
_G_WEIGHTS = np.zeros(15)
_G_WEIGHTS[1:15:2] = np.concatenate([_WG[:-1], _WG[::-1]])


_EPS = float(np.finfo(float).eps)


def gauss_kronrod(f: ArrayFn, breaks, *, rtol: float = 1e-10, atol: float = 0.0,
                  max_iter: int = 60, max_panels: int = 50000) -> tuple[float, float]:
    """Globally adaptive 7/15-point Gauss-Kronrod integration.

    Parameters
    ----------
    f : callable
        Vectorized integrand.
    breaks : array_like
        Initial panel endpoints (sorted). The panel layout should reflect any
        known scales of the integrand; bisection then refines where the
        Kronrod-Gauss difference is largest.

    Returns
    -------
    value, est_abs_error : float
    """
    breaks = np.asarray(breaks, dtype=float)
    lo = breaks[:-1].copy()
    hi = breaks[1:].copy()
    done_val = 0.0
    done_err = 0.0

    def panel_rules(lo, hi):
        c = 0.5 * (lo + hi)
        r = 0.5 * (hi - lo)
        x = c[:, None] + r[:, None] * _K_NODES[None, :]
        fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
        if not np.all(np.isfinite(fx)):
            raise ConvergenceError("Gauss-Kronrod: non-finite integrand value")
        k = r * (fx @ _K_WEIGHTS)
        g = r * (fx @ _G_WEIGHTS)
        return k, np.abs(k - g)

    val, err = panel_rules(lo, hi)
    for _ in range(max_iter):
        total = done_val + val.sum()
        total_err = done_err + err.sum()
        tol = max(atol, rtol * abs(total))
        if total_err <= tol:
            return float(total), float(total_err)
        if tol < 50.0 * _EPS * abs(total):
            # refinement cannot get below rounding in the sum
            raise ConvergenceError(
                f"Gauss-Kronrod: tolerance {tol:.3g} is below rounding level of the result",
                partial=float(total), est_error=float(total_err))
        if lo.size > max_panels:
            break
        # panels whose share of the error budget is exceeded are bisected,
        # the rest are frozen
        share = tol / max(lo.size, 1)
        split = err > share
        if not np.any(split):
            split = err >= err.max()
        done_val += val[~split].sum()
        done_err += err[~split].sum()
        lo_s, hi_s = lo[split], hi[split]
        mid = 0.5 * (lo_s + hi_s)
        lo = np.concatenate([lo_s, mid])
        hi = np.concatenate([mid, hi_s])
        val, err = panel_rules(lo, hi)
    total = done_val + val.sum()
    total_err = done_err + err.sum()
    raise ConvergenceError(
        f"Gauss-Kronrod did not converge (error estimate {total_err:.3g})",
        partial=float(total),
        est_error=float(total_err),
    )


# --- alternating series -----------------------------------------------------

def alternating_sum(terms: np.ndarray) -> float:
    """Sum of (-1)^k terms[k] with Cohen-Villegas-Zagier acceleration.

    Exact for the weights it uses when ``terms`` are moments of a positive
    measure on [0, 1]; the error then falls like 5.83^-n for n terms.
    """
    terms = np.asarray(terms, dtype=float)
    n = terms.size
    d = (3.0 + np.sqrt(8.0)) ** n
    d = 0.5 * (d + 1.0 / d)
    b = -1.0
    c = -d
    s = 0.0
    for k in range(n):
        c = b - c
        s += c * terms[k]
        b = (k + n) * (k - n) * b / ((k + 0.5) * (k + 1.0))
    return s / d
