"""Direct oracles for the fading-averaged MMSE and mutual information.

Two independent routes: adaptive quadrature of the canonical curves against
the fading kernel, and Monte-Carlo over gain realizations. Nothing here uses
series expansions.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from . import canonical
from .constellations import Constellation, Kind, entropy, power
from .errors import ConvergenceError, DomainError, UnsupportedError
from .fading import FadingKind, FadingModel, kernel_density, tail_cutoff
from .quadrature import gauss_kronrod

__all__ = [
    "OracleMethod",
    "OracleResult",
    "avg_mmse_quad",
    "avg_mi_quad",
    "avg_mi_gap_quad",
    "avg_mmse_mc",
    "avg_mi_mc",
    "immse_check",
    "sample_gain2",
    "worker_count",
]

_MC_CHUNK = 1 << 16


class OracleMethod(str, enum.Enum):
    QUADRATURE = "Quadrature"
    MONTE_CARLO = "MonteCarlo"


@dataclass(frozen=True)
class OracleResult:
    value: float
    est_abs_error: float
    method: OracleMethod
    n_samples: int = 0
    seed: Optional[int] = None


def worker_count() -> int:
    """Thread cap from FADEXP_THREADS (default: CPU count)."""
    env = os.environ.get("FADEXP_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DomainError(f"FADEXP_THREADS must be an integer, got {env!r}") from None
    return max(1, os.cpu_count() or 1)


# --- quadrature -------------------------------------------------------------------

def _breaks(model: FadingModel, snr: float) -> np.ndarray:
    """Initial panels: geometric toward 0 plus a cluster around t ~ 1/snr."""
    T = tail_cutoff(model)
    pts = [np.geomspace(T * 1e-14, T, 48)]
    if snr > 0:
        around = np.geomspace(1e-3 / snr, 1e3 / snr, 25)
        pts.append(around[(around > T * 1e-14) & (around < T)])
    return np.unique(np.concatenate([[0.0]] + pts))


def _integrate(model, fn, snr, tol):
    def integrand(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = kernel_density(model, t[pos]) * fn(t[pos])
        return out

    try:
        return gauss_kronrod(integrand, _breaks(model, snr), rtol=tol, atol=1e-300)
    except ConvergenceError as exc:
        raise ConvergenceError(f"oracle quadrature failed at snr={snr}: {exc}",
                               partial=exc.partial, est_error=exc.est_error) from exc


def avg_mmse_quad(model: FadingModel, input: Constellation, snr: float, tol: float = 1e-10) -> OracleResult:
    """int_0^inf f(t) mmse(snr t) dt by adaptive Gauss-Kronrod."""
    snr = float(snr)
    if not snr >= 0:
        raise DomainError("snr must be non-negative")
    cv = canonical.curve(input)
    val, err = _integrate(model, lambda t: cv.mmse(snr * t), snr, tol)
    return OracleResult(val, err, OracleMethod.QUADRATURE)


def avg_mi_gap_quad(model: FadingModel, input: Constellation, snr: float, tol: float = 1e-10) -> OracleResult:
    """H(X) minus the average mutual information, for discrete inputs.

    The gain-squared density is f(t) / t, so the gap is int f(t)/t gap(snr t) dt.
    """
    if not input.is_discrete:
        raise UnsupportedError("the MI gap is defined for discrete inputs")
    snr = float(snr)
    cv = canonical.curve(input)
    val, err = _integrate(model, lambda t: cv.mi_gap(snr * t) / t, snr, tol)
    return OracleResult(val, err, OracleMethod.QUADRATURE)


def avg_mi_quad(model: FadingModel, input: Constellation, snr: float, tol: float = 1e-10) -> OracleResult:
    """Average mutual information E I(snr |h|^2) in nats."""
    snr = float(snr)
    if not snr >= 0:
        raise DomainError("snr must be non-negative")
    if input.kind is Kind.GAUSSIAN:
        val, err = _integrate(model, lambda t: np.log1p(snr * t) / t, snr, tol)
        return OracleResult(val, err, OracleMethod.QUADRATURE)
    if not input.is_discrete:
        raise UnsupportedError(f"average mutual information is not provided for {input.label}")
    gap = avg_mi_gap_quad(model, input, snr, tol)
    H = entropy(input)
    return OracleResult(max(H - gap.value, 0.0), gap.est_abs_error, OracleMethod.QUADRATURE)


def immse_check(model: FadingModel, input: Constellation, snr: float, h_step: float = 1e-3) -> float:
    """Relative mismatch between a central difference of the average MI and
    the average MMSE at ``snr``."""
    snr = float(snr)
    h = min(float(h_step), 0.5 * snr)
    if not h > 0:
        raise DomainError("need snr > 0 and h_step > 0")
    tol = 1e-13
    if input.is_discrete:
        lo = avg_mi_gap_quad(model, input, snr - h, tol).value
        hi = avg_mi_gap_quad(model, input, snr + h, tol).value
        slope = (lo - hi) / (2.0 * h)
    else:
        lo = avg_mi_quad(model, input, snr - h, tol).value
        hi = avg_mi_quad(model, input, snr + h, tol).value
        slope = (hi - lo) / (2.0 * h)
    ref = avg_mmse_quad(model, input, snr, tol).value
    return abs(slope - ref) / ref


# --- Monte Carlo ----------------------------------------------------------------

def sample_gain2(model: FadingModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw n realizations of |h|^2.

    Gaussian families sum squared unit normals (the line-of-sight component
    sits on the first real coordinate); Nakagami uses |h|^2 ~ Gamma(mu, w/mu)
    drawn by NumPy's Marsaglia-Tsang sampler.
    """
    kind = model.kind
    if kind is FadingKind.NAKAGAMI:
        mu, w = model.shape_mu, model.spread_w
        return rng.gamma(mu, w / mu, size=n)
    if kind in (FadingKind.RAYLEIGH, FadingKind.RICEAN, FadingKind.VECTOR):
        k = model.k if kind is FadingKind.VECTOR else 1
        z = rng.standard_normal((n, 2 * k)) * model.sigma
        z[:, 0] += model.mu_abs
        return np.einsum("ij,ij->i", z, z)
    raise UnsupportedError("Monte-Carlo needs a closed-form fading model")


class _CurveTable:
    """Dense spline of log g(s) against log s for fast per-sample lookup.

    Used only by the Monte-Carlo route, where millions of canonical values
    are needed; its accuracy (~1e-9 relative) is far below the sampling noise.
    """

    def __init__(self, fn, at_zero, s_max, points=4000):
        self.fn = fn
        self.at_zero = float(at_zero)
        self.s_lo = 1e-8
        self.s_hi = max(s_max, 1.0)
        grid = np.geomspace(self.s_lo, self.s_hi, points)
        vals = np.asarray(fn(grid), dtype=float)
        tiny = np.finfo(float).tiny
        self.cut = grid[-1] if np.all(vals > tiny) else grid[np.argmax(vals <= tiny)]
        keep = vals > tiny
        self.spline = CubicSpline(np.log(grid[keep]), np.log(vals[keep]))
        self.v_lo = float(vals[0])

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        small = s < self.s_lo
        out[small] = self.at_zero + (self.v_lo - self.at_zero) * s[small] / self.s_lo
        mid = (~small) & (s <= self.s_hi) & (s < self.cut)
        out[mid] = np.exp(self.spline(np.log(s[mid])))
        big = (s > self.s_hi) & (s < self.cut)
        if np.any(big):
            out[big] = self.fn(s[big])
        return out


def _mc(model, snr, n_samples, seed, table, weight, workers):
    n_samples = int(n_samples)
    if n_samples < 2:
        raise DomainError("need at least two samples")
    chunks = [(i, min(_MC_CHUNK, n_samples - i * _MC_CHUNK))
              for i in range((n_samples + _MC_CHUNK - 1) // _MC_CHUNK)]

    def run(chunk):
        idx, size = chunk
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), idx]))
        g2 = sample_gain2(model, rng, size)
        vals = weight(g2) * table(snr * g2)
        return float(vals.sum()), float(np.dot(vals, vals))

    workers = workers or worker_count()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s1 / n_samples
    var = max(s2 / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    return mean, math.sqrt(var / n_samples)


def _s_max(model, snr):
    return snr * tail_cutoff(model) * 4.0


def avg_mmse_mc(model: FadingModel, input: Constellation, snr: float, n_samples: int = 1_000_000,
                seed: int = 0, workers: Optional[int] = None) -> OracleResult:
    """Sample mean of |h|^2 mmse(snr |h|^2); the error is one standard error.

    Chunks of 65536 draws get seeds (seed, chunk index), so the value does
    not depend on the number of worker threads.
    """
    snr = float(snr)
    cv = canonical.curve(input)
    table = _CurveTable(cv.mmse, power(input), _s_max(model, snr))
    mean, se = _mc(model, snr, n_samples, seed, table, lambda g: g, workers)
    return OracleResult(mean, se, OracleMethod.MONTE_CARLO, int(n_samples), int(seed))


def avg_mi_mc(model: FadingModel, input: Constellation, snr: float, n_samples: int = 1_000_000,
              seed: int = 0, workers: Optional[int] = None) -> OracleResult:
    """Sample mean of I(snr |h|^2)."""
    snr = float(snr)
    if input.kind is Kind.GAUSSIAN:
        table = lambda s: np.log1p(s)  # noqa: E731
        mean, se = _mc(model, snr, n_samples, seed, table, lambda g: np.ones_like(g), workers)
        return OracleResult(mean, se, OracleMethod.MONTE_CARLO, int(n_samples), int(seed))
    if not input.is_discrete:
        raise UnsupportedError(f"average mutual information is not provided for {input.label}")
    cv = canonical.curve(input)
    H = entropy(input)
    table = _CurveTable(cv.mi_gap, H, _s_max(model, snr))
    mean, se = _mc(model, snr, n_samples, seed, table, lambda g: np.ones_like(g), workers)
    return OracleResult(H - mean, se, OracleMethod.MONTE_CARLO, int(n_samples), int(seed))
