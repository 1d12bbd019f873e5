"""Canonical AWGN channel y = sqrt(snr) x + n, n ~ CN(0, 1).

MMSE and mutual information of the unfaded channel for every supported input,
derivatives of the MMSE at snr = 0+, and the high-snr decay parameters of the
continuous inputs.

Discrete inputs are reduced to real one-dimensional factors whenever the
support is collinear or a product grid (PAM, QAM, BPSK, QPSK). Each factor is
integrated over the real output with composite Gauss-Legendre panels graded
toward the decision boundaries, and the integrands are written so that no
cancellation occurs: the posterior variance is formed relative to the most
likely point and the posterior entropy through ``log1p``. Both the MMSE and
the gap H(X) - I(snr) therefore keep full relative accuracy even where they
are ~1e-200. Genuinely planar supports (8-PSK and up, custom sets) use a
pairwise form of the posterior variance with Gauss-Hermite quadrature across
the pair axis.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import special as sp

from .constellations import Constellation, Kind, entropy, power
from .errors import ConvergenceError, DomainError, UnsupportedError
from .quadrature import composite_nodes

__all__ = [
    "CanonicalCurve",
    "DecayParams",
    "DerivativeEstimate",
    "curve",
    "mmse",
    "mutual_information",
    "mi_gap",
    "mmse_deriv_at_zero",
    "decay_params",
]

_LOG_PI = math.log(math.pi)
_N_GL = 16          # nodes per panel
_N_GRADED = 10      # geometric panels per half-cell
_TAIL_EXP = 50.0    # integrand below exp(-50) of its peak is dropped
_OUTER = 7.5        # reach beyond the extreme points, in noise units
_MAX_DERIV = 6
_CHUNK = 64         # snr values per vectorized block


@dataclass(frozen=True)
class DecayParams:
    """High-snr behaviour mmse ~ zeta / snr^r0 + O(snr^-r1)."""

    zeta: float
    r0: float
    r1: float


@dataclass(frozen=True)
class DerivativeEstimate:
    """A derivative value and its estimated absolute error."""

    value: float
    est_error: float


# --- reduction of discrete inputs ---------------------------------------------

def _unique_sorted(values, tol=1e-12):
    v = np.sort(values)
    keep = np.concatenate([[True], np.diff(v) > tol])
    return v[keep]


def _decompose(c: Constellation):
    """Split a discrete input into independent real factors if possible.

    Returns ``("real", [(x, p), ...])`` with real sorted supports whose MMSE
    and MI add up, or ``("planar", points, probs)``.
    """
    pts, prs = c.points, c.probs
    # collinear support: project onto the line, the offset is irrelevant
    ref = pts[0]
    rel = pts - ref
    far = rel[np.argmax(np.abs(rel))]
    direction = far / abs(far)
    proj = rel * np.conj(direction)
    scale = np.abs(rel).max()
    if np.all(np.abs(proj.imag) <= 1e-12 * scale):
        order = np.argsort(proj.real)
        return "real", [(proj.real[order], prs[order])]
    # product grid with product probabilities
    re_vals = _unique_sorted(pts.real)
    im_vals = _unique_sorted(pts.imag)
    if re_vals.size * im_vals.size == pts.size:
        ri = np.searchsorted(re_vals, pts.real - 1e-12)
        ii = np.searchsorted(im_vals, pts.imag - 1e-12)
        grid = np.zeros((re_vals.size, im_vals.size))
        grid[ri, ii] = prs
        pr = grid.sum(axis=1)
        pi = grid.sum(axis=0)
        if np.all(grid > 0) and np.allclose(grid, np.outer(pr, pi), rtol=1e-12, atol=0):
            return "real", [(re_vals, pr), (im_vals, pi)]
    return "planar", pts, prs


def _merge_factors(shape):
    """Attach multiplicities, evaluating identical factors once."""
    if shape[0] != "real":
        return shape
    merged = []
    for x, p in shape[1]:
        for i, (x2, p2, k) in enumerate(merged):
            if x.shape == x2.shape and np.array_equal(x, x2) and np.array_equal(p, p2):
                merged[i] = (x2, p2, k + 1)
                break
        else:
            merged.append((x, p, 1))
    return "real", merged


def _spread(shape):
    """Largest squared distance of a support point from its factor's mean."""
    if shape[0] == "real":
        return max(float(np.max((x - np.dot(p, x)) ** 2)) for x, p, _ in shape[1])
    pts, p = shape[1], shape[2]
    return float(np.max(np.abs(pts - np.dot(p, pts)) ** 2))


# --- one-dimensional factor: cell-graded quadrature -----------------------------

def _graded_breaks(length, reach):
    """Breakpoints on [0, length] graded geometrically toward 0.

    ``reach`` is where the integrand has decayed by exp(-_TAIL_EXP); beyond it
    a single panel covers the remainder.
    """
    g1 = np.minimum(reach, length)
    ratios = 2.0 ** np.arange(-(_N_GRADED - 1), 1)
    inner = g1[..., None] * ratios
    zero = np.zeros_like(g1)[..., None]
    return np.concatenate([zero, inner, length[..., None]], axis=-1)


def _real_nodes(x, snr):
    """Output-space nodes and weights for a sorted real support, per snr."""
    rs = np.sqrt(snr)[:, None]
    pos = rs * x[None, :]                       # (S, m) noiseless outputs
    half = 0.5 * (pos[:, 1:] - pos[:, :-1])     # (S, m-1) half-gaps
    mid = pos[:, :-1] + half
    reach = -half + np.sqrt(half * half + _TAIL_EXP)
    b = _graded_breaks(half, reach)             # (S, m-1, P+1)
    u, w = composite_nodes(b, _N_GL)
    left = mid[..., None] - u                   # toward the lower point
    right = mid[..., None] + u
    outer_b = np.broadcast_to(np.linspace(0.0, _OUTER, 9), (snr.size, 9))
    uo, wo = composite_nodes(outer_b, _N_GL)
    lo = pos[:, :1] - uo
    hi = pos[:, -1:] + uo
    S = snr.size
    y = np.concatenate([left.reshape(S, -1), right.reshape(S, -1), lo, hi], axis=1)
    wt = np.concatenate([w.reshape(S, -1), w.reshape(S, -1), wo, wo], axis=1)
    return y, wt


def _posterior_terms(y, snr, x, p):
    """Log evidence and posterior quantities at output nodes y (S, N)."""
    rs = np.sqrt(snr)[:, None, None]
    logp = np.log(p)
    v = logp - (y[..., None] - rs * x) ** 2     # (S, N, m)
    jmax = np.argmax(v, axis=-1)
    vmax = np.take_along_axis(v, jmax[..., None], axis=-1)
    e = np.exp(v - vmax)
    np.put_along_axis(e, jmax[..., None], 0.0, axis=-1)
    rest = e.sum(axis=-1)
    log1 = np.log1p(rest)
    log_evidence = vmax[..., 0] + log1 - 0.5 * _LOG_PI
    post = e / (1.0 + rest)[..., None]           # posteriors of the non-argmax points
    top = 1.0 / (1.0 + rest)
    return log_evidence, post, top, jmax, v, vmax, log1


def _real_mmse(x, p, snr):
    out = np.empty(snr.size)
    for s0 in range(0, snr.size, _CHUNK):
        s = snr[s0:s0 + _CHUNK]
        y, w = _real_nodes(x, s)
        log_ev, post, top, jmax, *_ = _posterior_terms(y, s, x, p)
        d = x[None, None, :] - x[jmax][..., None]
        m1 = np.sum(post * d, axis=-1)
        m2 = np.sum(post * d * d, axis=-1)
        var = np.maximum(m2 - m1 * m1, 0.0)
        out[s0:s0 + _CHUNK] = np.sum(w * np.exp(log_ev) * var, axis=1)
    return out


def _real_gap(x, p, snr):
    out = np.empty(snr.size)
    for s0 in range(0, snr.size, _CHUNK):
        s = snr[s0:s0 + _CHUNK]
        y, w = _real_nodes(x, s)
        log_ev, post, top, jmax, v, vmax, log1 = _posterior_terms(y, s, x, p)
        # -log(post_l) for the non-argmax points, -log(top) = log1p(rest)
        with np.errstate(divide="ignore", invalid="ignore"):
            nlog = (vmax + log1[..., None]) - v
            h = np.where(post > 0, post * nlog, 0.0).sum(axis=-1) + top * log1
        out[s0:s0 + _CHUNK] = np.sum(w * np.exp(log_ev) * h, axis=1)
    return out


# --- planar supports ----------------------------------------------------------

def _planar_mmse(pts, p, snr, gh_order):
    """Pairwise posterior variance: sum_{j<k} |dx|^2 E[pi_j pi_k]."""
    gv, gw = sp.roots_hermite(gh_order)
    logp = np.log(p)
    m = pts.size
    out = np.zeros(snr.size)
    for s_idx, s in enumerate(snr):
        rs = math.sqrt(s)
        total = 0.0
        for j in range(m):
            for k in range(j + 1, m):
                delta = pts[k] - pts[j]
                dist = abs(delta)
                e = delta / dist
                a = 0.5 * rs * dist
                reach = -a + math.sqrt(a * a + _TAIL_EXP)
                b = _graded_breaks(np.array(a + reach), np.array(reach))
                u, w = composite_nodes(b, _N_GL)
                u = np.concatenate([-u, u])
                w = np.concatenate([w, w])
                mid = 0.5 * rs * (pts[j] + pts[k])
                y = mid + u[:, None] * e + 1j * e * gv[None, :]
                lv = logp - np.abs(y[..., None] - rs * pts) ** 2
                vmax = lv.max(axis=-1, keepdims=True)
                lse = vmax[..., 0] + np.log(np.exp(lv - vmax).sum(axis=-1))
                integrand = np.exp(lv[..., j] + lv[..., k] - lse + gv[None, :] ** 2 - _LOG_PI)
                total += dist * dist * float(w @ integrand @ gw)
        out[s_idx] = total
    return out


def _planar_gap(pts, p, snr, gh_order):
    """Tensor Gauss-Hermite over the complex noise of the posterior entropy."""
    gv, gw = sp.roots_hermite(gh_order)
    noise = (gv[:, None] + 1j * gv[None, :]).ravel()
    wn = np.outer(gw, gw).ravel() / math.pi
    logp = np.log(p)
    out = np.empty(snr.size)
    for s_idx, s in enumerate(snr):
        rs = math.sqrt(s)
        acc = 0.0
        for j in range(pts.size):
            # log(p_l/p_j) - |sqrt(s)(x_j - x_l) + n|^2 + |n|^2
            d = rs * (pts[j] - pts)
            ex = (logp - logp[j])[None, :] - np.abs(d[None, :] + noise[:, None]) ** 2 \
                + np.abs(noise[:, None]) ** 2
            ex[:, j] = -np.inf
            emax = ex.max(axis=1, keepdims=True)
            # log(1 + sum e^ex), stable for both signs of emax
            with np.errstate(over="ignore"):
                big = emax[:, 0] > 0
                lg = np.where(
                    big,
                    emax[:, 0] + np.log(np.exp(-emax[:, 0]) + np.exp(ex - emax).sum(axis=1)),
                    np.log1p(np.exp(ex).sum(axis=1)),
                )
            acc += p[j] * float(wn @ lg)
        out[s_idx] = acc
    return out


# --- continuous inputs -----------------------------------------------------------

def _inf_pam_mmse(snr):
    """Uniform input on [-sqrt(3), sqrt(3)] through real noise of variance 1/2."""
    A = math.sqrt(3.0)
    out = np.empty(snr.size)
    for i, s in enumerate(snr):
        if s == 0.0:
            out[i] = 1.0
            continue
        sx = 1.0 / math.sqrt(2.0 * s)            # posterior std before truncation
        reach = 9.0 * sx
        edges = np.array([0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 9.0]) * sx
        pts = np.concatenate([-A - edges[::-1], -A + edges[1:], A - edges[::-1], A + edges[1:]])
        pts = np.unique(np.clip(pts, -A - reach, A + reach))
        pts = np.unique(np.concatenate([pts, [0.0]]))
        mu, w = composite_nodes(pts[None, :], _N_GL)
        mu, w = mu[0], w[0]
        if sx > 0.5 * A:
            # wide posterior: the closed-form truncated variance cancels, so
            # take the variance over x directly, centred on its own mean
            xg, xw = composite_nodes(np.array([[-A, 0.0, A]]), 24)
            kern = xw * np.exp(-s * (xg - mu[:, None]) ** 2)
            zx = kern.sum(axis=1)
            mean = (kern @ xg[0]) / zx
            var = np.einsum("ij,ij->i", kern, (xg - mean[:, None]) ** 2) / zx
            out[i] = math.sqrt(s / math.pi) * float(np.sum(w * zx * var)) / (2.0 * A)
            continue
        alpha = (-A - mu) / sx
        beta = (A - mu) / sx
        z = _norm_interval(alpha, beta)
        phia = np.exp(-0.5 * alpha ** 2) / math.sqrt(2 * math.pi)
        phib = np.exp(-0.5 * beta ** 2) / math.sqrt(2 * math.pi)
        with np.errstate(invalid="ignore", divide="ignore"):
            m1 = (phia - phib) / z
            var = 1.0 + (alpha * phia - beta * phib) / z - m1 * m1
        var = np.where(z > 0, np.maximum(var, 0.0), 0.0)
        out[i] = sx * sx * float(np.sum(w * z * var)) / (2.0 * A)
    return out


def _norm_interval(alpha, beta):
    """P(alpha < Z < beta) for standard normal Z without cancellation."""
    upper = 0.5 * (sp.erfc(alpha / math.sqrt(2)) - sp.erfc(beta / math.sqrt(2)))
    lower = 0.5 * (sp.erfc(-beta / math.sqrt(2)) - sp.erfc(-alpha / math.sqrt(2)))
    return np.where(alpha > 0, upper, np.where(beta < 0, lower, 1.0 - 0.5 * (
        sp.erfc(beta / math.sqrt(2)) + sp.erfc(-alpha / math.sqrt(2)))))


def _inf_psk_mmse(snr):
    """Uniform phase: reduce to the Rice-distributed output magnitude.

    Given |y| = r the phase posterior is von Mises with concentration
    kappa = 2 sqrt(snr) r, so mmse = 1 - E[(I1/I0)(kappa)^2].
    """
    out = np.empty(snr.size)
    for i, s in enumerate(snr):
        if s == 0.0:
            out[i] = 1.0
            continue
        rs = math.sqrt(s)
        lo = max(0.0, rs - 9.0)
        hi = rs + 9.0
        brk = np.unique(np.clip(rs + np.array([-9, -6, -4, -3, -2, -1, 0, 1, 2, 3, 4, 6, 9.0]), lo, hi))
        brk = np.unique(np.concatenate([[lo], brk, [hi]]))
        if lo == 0.0:
            brk = np.unique(np.concatenate([brk, np.geomspace(1e-4, max(brk[1], 1e-3), 6)]))
        r, w = composite_nodes(brk[None, :], _N_GL)
        r, w = r[0], w[0]
        kappa = 2.0 * rs * r
        i0 = sp.ive(0, kappa)
        ratio = sp.ive(1, kappa) / i0
        # Rice density 2 r exp(-(r^2 + s)) I0(2 sqrt(s) r), scaled form
        dens = 2.0 * r * np.exp(-(r - rs) ** 2) * i0
        out[i] = float(np.sum(w * dens * (1.0 - ratio) * (1.0 + ratio)))
    return out


# --- the curve object -------------------------------------------------------------

class CanonicalCurve:
    """MMSE and mutual information of one input on the canonical channel.

    Scalar evaluations are memoized; the memo is guarded by a lock and only
    ever stores values computed by the same deterministic routine, so results
    do not depend on it.
    """

    def __init__(self, input: Constellation, quadrature_order: int = 64):
        self.input = input
        self.quadrature_order = int(quadrature_order)
        self._lock = threading.Lock()
        self.cache: dict = {}
        if input.is_discrete:
            self._shape = _merge_factors(_decompose(input))
            self._entropy = entropy(input)
        else:
            self._shape = None
            self._entropy = math.inf
        self._power = power(input)
        if input.is_discrete:
            self._peak = _spread(self._shape)
        else:
            self._peak = 3.0 if input.kind in (Kind.INF_PAM, Kind.INF_QAM) else 1.0

    # -- raw evaluators on arrays

    def _mmse_array(self, snr: np.ndarray) -> np.ndarray:
        kind = self.input.kind
        if kind is Kind.GAUSSIAN:
            return 1.0 / (1.0 + snr)
        if kind is Kind.INF_PAM:
            return _inf_pam_mmse(snr)
        if kind is Kind.INF_QAM:
            return _inf_pam_mmse(0.5 * snr)
        if kind is Kind.INF_PSK:
            return _inf_psk_mmse(snr)
        if self._shape[0] == "real":
            return sum(k * _real_mmse(x, p, snr) for x, p, k in self._shape[1])
        _, pts, prs = self._shape
        val = _planar_mmse(pts, prs, snr, self.quadrature_order)
        hi = _planar_mmse(pts, prs, snr, 2 * self.quadrature_order)
        return np.where(np.abs(val - hi) < 1e-9, val, hi)

    def _gap_array(self, snr: np.ndarray) -> np.ndarray:
        if not self.input.is_discrete:
            raise UnsupportedError(f"H(X) - I(snr) is not defined for {self.input.label}")
        if self._shape[0] == "real":
            return sum(k * _real_gap(x, p, snr) for x, p, k in self._shape[1])
        _, pts, prs = self._shape
        val = _planar_gap(pts, prs, snr, self.quadrature_order)
        hi = _planar_gap(pts, prs, snr, 2 * self.quadrature_order)
        return np.where(np.abs(val - hi) < 1e-9, val, hi)

    # -- public API

    def mmse(self, snr):
        """Canonical MMSE at ``snr`` (scalar or array, snr >= 0)."""
        return self._evaluate(snr, "mmse", self._mmse_array)

    def mi_gap(self, snr):
        """H(X) - I(snr) for discrete inputs, accurate where it is tiny."""
        return self._evaluate(snr, "gap", self._gap_array)

    def mutual_information(self, snr):
        """Mutual information in nats."""
        kind = self.input.kind
        if kind is Kind.GAUSSIAN:
            s = _as_snr(snr)
            res = np.log1p(s)
            return float(res) if np.ndim(snr) == 0 else res
        if not self.input.is_discrete:
            raise UnsupportedError(f"mutual information is not provided for {self.input.label}")
        gap = self.mi_gap(snr)
        return np.maximum(self._entropy - gap, 0.0) if np.ndim(snr) else max(self._entropy - gap, 0.0)

    def _evaluate(self, snr, tag, fn):
        s = _as_snr(snr)
        if np.ndim(snr) == 0:
            key = (tag, float(s))
            with self._lock:
                hit = self.cache.get(key)
            if hit is not None:
                return hit
            val = float(fn(np.array([float(s)]))[0])
            with self._lock:
                self.cache[key] = val
            return val
        flat = s.ravel()
        return fn(flat).reshape(s.shape)

    def mmse_deriv_at_zero(self, order: int) -> DerivativeEstimate:
        """d^m mmse / dsnr^m at 0+ from Chebyshev fits near the origin."""
        order = int(order)
        if order < 0 or order > _MAX_DERIV:
            raise DomainError(f"derivative order must be in 0..{_MAX_DERIV}, got {order}")
        if self.input.kind is Kind.GAUSSIAN:
            return DerivativeEstimate(float((-1) ** order * math.factorial(order)), 0.0)
        if order == 0:
            return DerivativeEstimate(self._power, 0.0)
        return _chebyshev_derivative(self._mmse_array, order, self._peak)


def _as_snr(snr):
    s = np.asarray(snr, dtype=float)
    if np.any(~np.isfinite(s)) or np.any(s < 0):
        raise DomainError("snr must be finite and non-negative")
    return s


# interval lengths (times 1/peak energy) for the Chebyshev fits at snr = 0
_DERIV_SPANS = (0.2, 0.14, 0.1, 0.07, 0.05)
_DERIV_NODES = 18


def _chebyshev_derivative(fn, order, peak):
    """Differentiate a Chebyshev interpolant of fn on [0, a] at its left end.

    Several interval lengths a are tried; the value is taken where two
    neighbouring lengths agree best and that disagreement is the error.
    """
    n = _DERIV_NODES
    u = -np.cos(np.pi * (np.arange(n) + 0.5) / n)
    ests, noise = [], []
    for span in _DERIV_SPANS:
        a = span / peak
        vals = fn(a * (u + 1.0) / 2.0)
        coef = C.chebfit(u, vals, n - 1)
        ests.append(float(C.chebval(-1.0, C.chebder(coef, order))) * (2.0 / a) ** order)
        # rounding in the samples, amplified by the rescaled differentiation
        noise.append(1e-12 * float(np.max(np.abs(vals))) * (2.0 / a) ** order)
    best = (math.inf, math.nan, 0.0)
    for i, (lo, hi) in enumerate(zip(ests, ests[1:])):
        err = abs(hi - lo)
        if err < best[0]:
            best = (err, 0.5 * (lo + hi), noise[i + 1])
    err, val, floor = best
    if not np.isfinite(val):
        raise ConvergenceError("derivative fit failed")
    # neighbouring spans share most of their error, so pad the spread
    return DerivativeEstimate(val, max(4.0 * err, floor))


@lru_cache(maxsize=64)
def curve(input: Constellation, quadrature_order: int = 64) -> CanonicalCurve:
    """Shared curve object per input (its memo is reused across callers)."""
    return CanonicalCurve(input, quadrature_order)


def mmse(input: Constellation, snr):
    return curve(input).mmse(snr)


def mutual_information(input: Constellation, snr):
    return curve(input).mutual_information(snr)


def mi_gap(input: Constellation, snr):
    return curve(input).mi_gap(snr)


def mmse_deriv_at_zero(input: Constellation, order: int) -> DerivativeEstimate:
    return curve(input).mmse_deriv_at_zero(order)


def decay_params(input: Constellation) -> DecayParams:
    """(zeta, r0, r1) for the uniform continuous inputs."""
    table = {
        Kind.INF_PSK: DecayParams(0.5, 1.0, 2.0),
        Kind.INF_PAM: DecayParams(0.5, 1.0, 1.5),
        Kind.INF_QAM: DecayParams(1.0, 1.0, 1.5),
    }
    if input.kind not in table:
        raise UnsupportedError(f"decay parameters are defined for uniform continuous inputs, not {input.label}")
    return table[input.kind]
