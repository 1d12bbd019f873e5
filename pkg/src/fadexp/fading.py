"""Fading models through their kernel f(t) = sqrt(t) f_|h|(sqrt(t)) / 2.

For every closed-form model the module provides the kernel itself, the
small-t power-series coefficients f(t) ~ sum_m p_m t^(a_m), and the Mellin
transform M[f; z] = int_0^inf t^(z-1) f(t) dt. The kernel mass equals the
gain second moment E|h|^2.
"""

from __future__ import annotations

import ast
import enum
import json
import math
import operator
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special as sp

from . import specfun
from .errors import ConvergenceError, DomainError, UnsupportedError
from .quadrature import gauss_kronrod

__all__ = [
    "FadingKind",
    "CustomFading",
    "FadingModel",
    "rayleigh",
    "ricean",
    "nakagami",
    "vector",
    "custom",
    "kernel_density",
    "small_t_coefficients",
    "small_t_terms",
    "mellin_f",
    "mellin_f_continued",
    "second_moment",
    "tail_cutoff",
    "from_json",
    "parse_fading",
]


class FadingKind(str, enum.Enum):
    RAYLEIGH = "rayleigh"
    RICEAN = "ricean"
    NAKAGAMI = "nakagami"
    VECTOR = "vector"
    CUSTOM = "custom"


@dataclass(frozen=True)
class CustomFading:
    """User-supplied kernel.

    Parameters
    ----------
    coeffs : sequence of (a, p, log_power)
        Small-t expansion f(t) ~ sum p t^a (ln t)^log_power, in increasing a.
    density : callable
        Vectorized kernel f(t).
    mellin : callable, optional
        Closed form of M[f; z]; quadrature of ``density`` is used otherwise.
    q_nonzero : bool
        Set when the kernel has an exponentially small factor exp(-q / t)
        type behaviour at 0, in which case no power expansion is produced.
    second_moment : float, optional
        E|h|^2; computed by quadrature when absent.
    error_order : float, optional
        Exponent R of the remainder of the supplied expansion, if known.
    """

    coeffs: tuple
    density: Callable[[np.ndarray], np.ndarray]
    mellin: Optional[Callable[[float], float]] = None
    q_nonzero: bool = False
    second_moment: Optional[float] = None
    error_order: Optional[float] = None


@dataclass(frozen=True)
class FadingModel:
    kind: FadingKind
    sigma: float = 0.0
    mu_abs: float = 0.0
    shape_mu: float = 0.0
    spread_w: float = 0.0
    k: int = 1
    custom: Optional[CustomFading] = field(default=None, compare=False)
    label: str = ""

    @property
    def closed_form(self) -> bool:
        return self.kind is not FadingKind.CUSTOM

    @property
    def two_sigma2(self) -> float:
        return 2.0 * self.sigma * self.sigma

    @property
    def los_ratio(self) -> float:
        """|mu|^2 / (2 sigma^2) for the Gaussian families."""
        return self.mu_abs ** 2 / self.two_sigma2


def rayleigh(sigma: float) -> FadingModel:
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    return FadingModel(FadingKind.RAYLEIGH, sigma=float(sigma), label=f"rayleigh(sigma={sigma:g})")


def ricean(mu_abs: float, sigma: float) -> FadingModel:
    if not sigma > 0 or mu_abs < 0:
        raise DomainError("ricean needs sigma > 0 and |mu| >= 0")
    return FadingModel(FadingKind.RICEAN, sigma=float(sigma), mu_abs=float(mu_abs),
                       label=f"ricean(mu={mu_abs:g},sigma={sigma:g})")


def nakagami(mu: float, w: float) -> FadingModel:
    if not mu >= 0.5:
        raise DomainError(f"Nakagami shape must be >= 1/2, got {mu}")
    if not w > 0:
        raise DomainError(f"Nakagami spread must be positive, got {w}")
    return FadingModel(FadingKind.NAKAGAMI, shape_mu=float(mu), spread_w=float(w),
                       label=f"nakagami(mu={mu:g},w={w:g})")


def vector(k: int, sigma: float, mu_abs: float = 0.0) -> FadingModel:
    if int(k) != k or k < 1:
        raise DomainError(f"vector dimension must be a positive integer, got {k}")
    if not sigma > 0 or mu_abs < 0:
        raise DomainError("vector fading needs sigma > 0 and ||mu|| >= 0")
    return FadingModel(FadingKind.VECTOR, sigma=float(sigma), mu_abs=float(mu_abs), k=int(k),
                       label=f"vector(k={k},mu={mu_abs:g},sigma={sigma:g})")


def custom(coeffs: Sequence, density: Callable, mellin: Optional[Callable] = None,
           q_nonzero: bool = False, second_moment: Optional[float] = None,
           error_order: Optional[float] = None, label: str = "custom") -> FadingModel:
    """Kernel given by the user; coefficients are taken as stated, never fitted."""
    if density is None:
        raise DomainError("custom fading needs a density callback")
    rows = []
    for entry in coeffs:
        a, p, n = (tuple(entry) + (0,))[:3]
        if int(n) != n or n < 0:
            raise DomainError("log powers must be non-negative integers")
        rows.append((float(a), float(p), int(n)))
    if not q_nonzero and not rows:
        raise DomainError("custom fading needs small-t coefficients")
    kernel = CustomFading(tuple(rows), density, mellin, bool(q_nonzero), second_moment, error_order)
    return FadingModel(FadingKind.CUSTOM, custom=kernel, label=label)


# --- kernel --------------------------------------------------------------------

def _vector_kernel(t, k, s2, mu):
    """Kernel of the k-dimensional Gaussian gain, s2 = 2 sigma^2."""
    if mu == 0.0:
        return np.exp(k * np.log(t) - t / s2 - k * math.log(s2) - sp.gammaln(k))
    x = 2.0 * np.sqrt(t) * mu / s2
    # I_{k-1}(x) e^{-(t + mu^2)/s2} = ive(k-1, x) e^{-(sqrt(t) - mu)^2 / s2}
    return (t ** ((k + 1) / 2.0) / (mu ** (k - 1) * s2)
            * np.exp(-(np.sqrt(t) - mu) ** 2 / s2) * sp.ive(k - 1, x))


def kernel_density(model: FadingModel, t):
    """f(t) for t > 0 (scalar or array)."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("kernel density needs t > 0")
    kind = model.kind
    if kind is FadingKind.RAYLEIGH:
        s2 = model.two_sigma2
        out = arr / s2 * np.exp(-arr / s2)
    elif kind in (FadingKind.RICEAN, FadingKind.VECTOR):
        k = 1 if kind is FadingKind.RICEAN else model.k
        out = _vector_kernel(arr, k, model.two_sigma2, model.mu_abs)
    elif kind is FadingKind.NAKAGAMI:
        mu, w = model.shape_mu, model.spread_w
        out = np.exp(mu * math.log(mu / w) - sp.gammaln(mu) + mu * np.log(arr) - mu * arr / w)
    else:
        out = np.asarray(model.custom.density(arr), dtype=float)
    return float(out) if np.ndim(t) == 0 else out


# --- small-t coefficients ---------------------------------------------------------

def _vector_coeffs(k, s2, mu, M):
    A = mu * mu / s2
    out = []
    for a in range(M):
        total = 0.0
        for b in range(a + 1):
            if b and mu == 0.0:
                break
            log_mag = (2 * b * math.log(mu) if b else 0.0) - sp.gammaln(a - b + 1) \
                - (a + b + k) * math.log(s2) - sp.gammaln(b + 1) - sp.gammaln(b + k)
            total += (-1) ** (a - b) * math.exp(log_mag - A)
        out.append((float(a + k), total))
    return out


def small_t_terms(model: FadingModel, M: int):
    """First M small-t terms as (a, p, log_power) triples."""
    M = int(M)
    if M < 0 or M > 30:
        raise DomainError(f"number of coefficients must be in 0..30, got {M}")
    kind = model.kind
    if kind is FadingKind.CUSTOM:
        if model.custom.q_nonzero:
            return []
        return list(model.custom.coeffs[:M])
    if kind is FadingKind.RAYLEIGH:
        s2 = model.two_sigma2
        pairs = [(m + 1.0, (-1) ** m * math.exp(-sp.gammaln(m + 1) - (m + 1) * math.log(s2)))
                 for m in range(M)]
    elif kind in (FadingKind.RICEAN, FadingKind.VECTOR):
        k = 1 if kind is FadingKind.RICEAN else model.k
        pairs = _vector_coeffs(k, model.two_sigma2, model.mu_abs, M)
    else:
        mu, w = model.shape_mu, model.spread_w
        lead = mu * math.log(mu / w) - sp.gammaln(mu)
        pairs = [(m + mu, (-1) ** m * math.exp(lead + m * math.log(mu / w) - sp.gammaln(m + 1)))
                 for m in range(M)]
    return [(a, p, 0) for a, p in pairs]


def small_t_coefficients(model: FadingModel, M: int):
    """First M (a_m, p_m) pairs of f(t) ~ sum p_m t^(a_m) as t -> 0+."""
    if model.kind is FadingKind.CUSTOM and model.custom is None:
        raise DomainError("custom fading without coefficients")
    terms = small_t_terms(model, M)
    if any(n for _, _, n in terms):
        raise UnsupportedError("kernel expansion has log terms; use small_t_terms")
    return [(a, p) for a, p, _ in terms]


# --- Mellin transform ---------------------------------------------------------------

def _gamma_signed(x):
    """(sign, log|Gamma(x)|); raises at the poles."""
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"Gamma has a pole at {x}")
    return float(sp.gammasgn(x)), float(sp.gammaln(x))


def _mellin_closed(model: FadingModel, z: float) -> float:
    kind = model.kind
    if kind is FadingKind.RAYLEIGH:
        sg, lg = _gamma_signed(z + 1.0)
        return sg * math.exp(z * math.log(model.two_sigma2) + lg)
    if kind in (FadingKind.RICEAN, FadingKind.VECTOR):
        k = 1 if kind is FadingKind.RICEAN else model.k
        A = model.los_ratio
        sg, lg = _gamma_signed(z + k)
        base = sg * math.exp(z * math.log(model.two_sigma2) + lg - sp.gammaln(k) - A)
        if A == 0.0:
            return base
        return base * specfun.hyp1f1(z + k, k, A)
    mu, w = model.shape_mu, model.spread_w
    sg, lg = _gamma_signed(z + mu)
    return sg * math.exp(z * math.log(w / mu) + lg - sp.gammaln(mu))


def _strip_lower(model: FadingModel) -> float:
    kind = model.kind
    if kind in (FadingKind.RAYLEIGH, FadingKind.RICEAN):
        return -1.0
    if kind is FadingKind.VECTOR:
        return -float(model.k)
    if kind is FadingKind.NAKAGAMI:
        return -model.shape_mu
    terms = model.custom.coeffs
    return -terms[0][0] if terms else 0.0


def mellin_f(model: FadingModel, z: float) -> float:
    """M[f; z] inside the strip of convergence.

    Raises
    ------
    DomainError
        For z at or left of the strip edge (-1 for Rayleigh/Ricean, -mu for
        Nakagami, -k for the vector model).
    """
    z = float(z)
    lower = _strip_lower(model)
    if not z > lower:
        raise DomainError(f"M[f; z] of {model.label} converges only for z > {lower}, got {z}")
    if model.closed_form:
        return _mellin_closed(model, z)
    if model.custom.mellin is not None:
        return float(model.custom.mellin(z))
    return _mellin_numeric(model, z)


def _mellin_numeric(model, z):
    T = tail_cutoff(model)
    breaks = np.concatenate([[0.0], np.geomspace(1e-10, T, 60)])
    val, _ = gauss_kronrod(lambda t: t ** (z - 1.0) * kernel_density(model, t), breaks, rtol=1e-11)
    return val


def mellin_f_continued(model: FadingModel, z: float, deriv_order: int = 0,
                       double_pole: bool = False) -> float:
    """Analytic continuation of z -> M[f; 1 - z] and its z-derivatives.

    With ``double_pole`` the target is instead the regularized bracket
    B(w) = (w - z)^2 pi M[f; 1 - w] / sin(pi w) at an integer z where both
    M[f; 1 - w] and 1/sin(pi w) have simple poles; B and its derivatives are
    finite there. Derivatives come from central differences extrapolated in
    the step (h, h/2, h/4, ...) starting at h = 1e-2, with sin evaluated at
    exact offsets from the integer.
    """
    if not model.closed_form:
        raise UnsupportedError("analytic continuation needs a closed-form model")
    j = int(deriv_order)
    if j not in (0, 1, 2):
        raise DomainError(f"deriv_order must be 0, 1 or 2, got {deriv_order}")
    z = float(z)
    if double_pole:
        zi = round(z)
        if abs(z - zi) > 1e-12:
            raise DomainError("double_pole needs an integer point")
        sgn = -1.0 if zi % 2 else 1.0

        def bracket(h):
            return h * h * math.pi * _mellin_closed(model, 1.0 - zi - h) / (sgn * math.sin(math.pi * h))

        return _central_derivative(bracket, j, include_center=False)

    def g(h):
        return _mellin_closed(model, 1.0 - z - h)

    if j == 0:
        return g(0.0)
    return _central_derivative(g, j, include_center=True)


def _central_derivative(g, order, include_center, h0=1e-2, levels=6):
    """Richardson table for g^(order)(0) (order 0: the limit at 0)."""
    def estimate(h):
        if order == 0:
            return 0.5 * (g(h) + g(-h))
        if order == 1:
            return (g(h) - g(-h)) / (2.0 * h)
        center = g(0.0) if include_center else _limit_center(g, h)
        return (g(h) - 2.0 * center + g(-h)) / (h * h)

    rows = []
    best_err, best = math.inf, math.nan
    for i in range(levels):
        h = h0 / 2.0 ** i
        row = [estimate(h)]
        for m in range(1, i + 1):
            fac = 4.0 ** m
            row.append(row[m - 1] + (row[m - 1] - rows[i - 1][m - 1]) / (fac - 1.0))
            err = abs(row[m] - rows[i - 1][m - 1])
            if err < best_err:
                best_err, best = err, row[m]
        rows.append(row)
    if not np.isfinite(best):
        raise ConvergenceError("step extrapolation failed to contract")
    return float(best)


def _limit_center(g, h):
    # value at 0 of an even-in-h extrapolation: g(0) ~ (4 E(h/2) - E(h)) / 3, E(h) = (g(h) + g(-h))/2
    e1 = 0.5 * (g(h) + g(-h))
    e2 = 0.5 * (g(0.5 * h) + g(-0.5 * h))
    e3 = 0.5 * (g(0.25 * h) + g(-0.25 * h))
    r1 = (4.0 * e2 - e1) / 3.0
    r2 = (4.0 * e3 - e2) / 3.0
    return (16.0 * r2 - r1) / 15.0


# --- moments and support ----------------------------------------------------------

def second_moment(model: FadingModel) -> float:
    """E|h|^2, which is also the kernel mass M[f; 1]."""
    kind = model.kind
    if kind in (FadingKind.RAYLEIGH, FadingKind.RICEAN):
        return model.two_sigma2 + model.mu_abs ** 2
    if kind is FadingKind.VECTOR:
        return model.k * model.two_sigma2 + model.mu_abs ** 2
    if kind is FadingKind.NAKAGAMI:
        return model.spread_w
    if model.custom.second_moment is not None:
        return float(model.custom.second_moment)
    return _mellin_numeric(model, 1.0)


def tail_cutoff(model: FadingModel, eps: float = 1e-18) -> float:
    """A point T with int_T^inf t^j f(t) dt negligible (relative eps) for small j."""
    kind = model.kind
    if kind is FadingKind.RAYLEIGH:
        return model.two_sigma2 * float(sp.gammainccinv(4.0, eps))
    if kind is FadingKind.NAKAGAMI:
        mu, w = model.shape_mu, model.spread_w
        return w / mu * float(sp.gammainccinv(mu + 3.0, eps))
    if kind in (FadingKind.RICEAN, FadingKind.VECTOR):
        k = 1 if kind is FadingKind.RICEAN else model.k
        if model.mu_abs == 0.0:
            return model.two_sigma2 * float(sp.gammainccinv(k + 3.0, eps))
        spread = math.sqrt(model.two_sigma2 * (-math.log(eps) + 2.0 * (k + 3.0) * 3.0))
        return (model.mu_abs + spread) ** 2
    # custom: scan outward until the kernel is negligible against its peak
    t = np.geomspace(1e-6, 1e6, 241)
    f = np.abs(np.asarray(model.custom.density(t), dtype=float)) * t ** 3
    peak = f.max()
    beyond = np.nonzero((f < eps * peak) & (t > t[np.argmax(f)]))[0]
    if beyond.size == 0:
        raise ConvergenceError("custom kernel does not decay within 1e6")
    return float(t[beyond[0]])


# --- parsing --------------------------------------------------------------------------

def from_json(doc) -> FadingModel:
    """Build a closed-form model from ``{"kind": ..., parameters}``.

    Custom kernels need a Python callback and cannot come from JSON.
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    kind = str(doc.get("kind", "")).lower()
    try:
        if kind == "rayleigh":
            return rayleigh(float(doc["sigma"]))
        if kind in ("ricean", "rice", "rician"):
            return ricean(float(doc.get("mu", doc.get("mu_abs", 0.0))), float(doc["sigma"]))
        if kind == "nakagami":
            return nakagami(float(doc.get("mu", doc.get("shape_mu"))), float(doc.get("w", doc.get("spread_w"))))
        if kind == "vector":
            return vector(int(doc["k"]), float(doc["sigma"]), float(doc.get("mu", doc.get("mu_abs", 0.0))))
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"malformed fading document: {exc}") from exc
    if kind == "custom":
        raise DomainError("custom fading must be built in Python (it needs a density callback)")
    raise DomainError(f"unknown fading kind {kind!r}")


def parse_fading(value) -> FadingModel:
    """Parse ``rayleigh:sigma=0.7071``, ``nakagami:mu=0.5,w=1``, a JSON
    mapping, or a path to a JSON file."""
    if isinstance(value, FadingModel):
        return value
    if isinstance(value, dict):
        return from_json(value)
    text = str(value).strip()
    if text.startswith("{"):
        return from_json(text)
    if text.endswith(".json"):
        with open(text, encoding="utf-8") as fh:
            return from_json(json.load(fh))
    kind, _, rest = text.partition(":")
    doc = {"kind": kind.strip().lower()}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise DomainError(f"bad fading parameter {item!r}")
        doc[key.strip().lower()] = _parse_number(val.strip())
    return from_json(doc)


_ALLOWED_FUNCS = {"sqrt": math.sqrt}
_ALLOWED_NAMES = {"pi": math.pi, "e": math.e}


def _parse_number(text: str) -> float:
    """Accept plain floats and arithmetic like ``sqrt(0.9)`` or ``1/(2*sqrt(5))``."""
    try:
        return float(text)
    except ValueError:
        pass
    try:
        tree = ast.parse(text, mode="eval")
        return float(_eval_node(tree.body))
    except (SyntaxError, ValueError, ZeroDivisionError, TypeError) as exc:
        raise DomainError(f"cannot parse number {text!r}") from exc


def _eval_node(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return node.value
    if isinstance(node, ast.Name) and node.id in _ALLOWED_NAMES:
        return _ALLOWED_NAMES[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        v = _eval_node(node.operand)
        return v if isinstance(node.op, ast.UAdd) else -v
    if isinstance(node, ast.BinOp):
        ops = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
               ast.Div: operator.truediv, ast.Pow: operator.pow}
        op = ops.get(type(node.op))
        if op is not None:
            return op(_eval_node(node.left), _eval_node(node.right))
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _ALLOWED_FUNCS and len(node.args) == 1 and not node.keywords):
        return _ALLOWED_FUNCS[node.func.id](_eval_node(node.args[0]))
    raise ValueError("unsupported expression")
