"""Asymptotic expansions of the fading-averaged MMSE and mutual information.

High-snr expansions pair the small-t behaviour of the fading kernel with
Mellin transforms of the canonical MMSE; low-snr expansions pair the kernel
moments with the derivatives of the canonical MMSE at 0.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import canonical, reference
from .constellations import Constellation, Kind, entropy
from .errors import DomainError, UnsupportedError
from .fading import (FadingKind, FadingModel, mellin_f, mellin_f_continued, small_t_terms)
from .mellin import mellin_mmse, mellin_mmse_log_weighted

__all__ = [
    "Regime",
    "Term",
    "Expansion",
    "ExpansionRangeWarning",
    "high_snr_avg_mmse_discrete",
    "high_snr_avg_mi_discrete",
    "high_snr_avg_mmse_continuous",
    "low_snr_avg_mmse",
    "low_snr_avg_mi",
    "general_high_snr",
    "mi_from_mmse",
    "evaluate",
    "decay_rate",
    "DEFAULT_HIGH_TERMS",
    "DEFAULT_LOW_TERMS",
]

DEFAULT_HIGH_TERMS = 4
DEFAULT_LOW_TERMS = 3
_MAX_HIGH_TERMS = 12
_MAX_LOW_TERMS = 6
_INT_TOL = 1e-9


class Regime(str, enum.Enum):
    HIGH = "HighSnr"
    LOW = "LowSnr"


class ExpansionRangeWarning(UserWarning):
    """An expansion is evaluated outside the snr range it is meant for."""


@dataclass(frozen=True)
class Term:
    coeff: float
    snr_pow: float
    log_pow: int = 0

    def value(self, snr: float) -> float:
        out = self.coeff * snr ** self.snr_pow
        if self.log_pow:
            out *= math.log(snr) ** self.log_pow
        return out


@dataclass(frozen=True)
class Expansion:
    """constant + sum coeff * snr^snr_pow * (log snr)^log_pow.

    High-snr terms are ordered by decreasing (snr_pow, log_pow), low-snr terms
    by increasing snr_pow. The remainder is O(snr^-error_order) at high snr
    (every smaller exponent, when the bound is an open interval) and
    O(snr^error_order) at low snr.
    """

    constant: float
    terms: tuple
    regime: Regime
    error_order: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "regime", Regime(self.regime))
        for t in self.terms:
            if not math.isfinite(t.coeff):
                raise DomainError(f"non-finite expansion coefficient {t}")
            if t.log_pow < 0:
                raise DomainError("log powers must be non-negative")
        keys = [(t.snr_pow, t.log_pow) for t in self.terms]
        if self.regime is Regime.HIGH:
            ok = all(a > b for a, b in zip(keys, keys[1:]))
        else:
            ok = all(a[0] < b[0] for a, b in zip(keys, keys[1:]))
        if not ok:
            raise DomainError(f"terms out of order for a {self.regime.value} expansion")

    @property
    def n_terms(self) -> int:
        """Number of distinct snr powers."""
        return len({t.snr_pow for t in self.terms})

    def truncate(self, M: int) -> "Expansion":
        """Keep the terms belonging to the first M snr powers."""
        pows = []
        for t in self.terms:
            if t.snr_pow not in pows:
                pows.append(t.snr_pow)
        keep = set(pows[:M])
        terms = [t for t in self.terms if t.snr_pow in keep]
        order = pows[M] if len(pows) > M else None
        if order is None:
            err = self.error_order
        else:
            err = -order if self.regime is Regime.HIGH else order
        return Expansion(self.constant, terms, self.regime, err, dict(self.meta))

    def to_dict(self) -> dict:
        return {
            "constant": self.constant,
            "terms": [{"coeff": t.coeff, "snr_pow": t.snr_pow, "log_pow": t.log_pow} for t in self.terms],
            "regime": self.regime.value,
            "error_order": self.error_order if math.isfinite(self.error_order) else "inf",
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc) -> "Expansion":
        if isinstance(doc, str):
            doc = json.loads(doc)
        err = doc["error_order"]
        err = math.inf if err in ("inf", "Infinity") else float(err)
        terms = [Term(float(t["coeff"]), float(t["snr_pow"]), int(t.get("log_pow", 0))) for t in doc["terms"]]
        return cls(float(doc["constant"]), terms, Regime(doc["regime"]), err)


def _collect(raw, regime):
    """Merge (coeff, pow, log_pow) triples with equal keys and sort them."""
    acc: dict = {}
    for c, p, n in raw:
        key = (float(p), int(n))
        acc[key] = acc.get(key, 0.0) + c
    rev = regime is Regime.HIGH
    return [Term(float(c), p, n) for (p, n), c in sorted(acc.items(), reverse=rev)]


# --- high snr, discrete inputs ----------------------------------------------------

def _require_discrete(input):
    if not input.is_discrete:
        raise DomainError(f"{input.label} is not a discrete input")


def _kernel_terms(model, M):
    """Small-t terms grouped by exponent, at most M distinct exponents."""
    if not 1 <= M <= _MAX_HIGH_TERMS:
        raise DomainError(f"number of terms must be in 1..{_MAX_HIGH_TERMS}, got {M}")
    raw = small_t_terms(model, 30 if model.kind is FadingKind.CUSTOM else M + 1)
    groups: list = []
    for a, p, n in raw:
        if groups and abs(groups[-1][0] - a) < 1e-12:
            groups[-1][1].append((p, n))
        else:
            groups.append((a, [(p, n)]))
    return groups[:M], (groups[M][0] if len(groups) > M else None)


def general_high_snr(model: FadingModel, input: Constellation, M: int = DEFAULT_HIGH_TERMS) -> Expansion:
    """High-snr MMSE expansion for any kernel with f(t) ~ sum p t^a (ln t)^n.

    Each kernel term contributes
    p snr^(-1-a) sum_j C(n, j) (-log snr)^j M^(n-j)[mmse; 1+a]
    where M^(k) is the k-th derivative in z of the Mellin transform. A kernel
    that is exponentially small at 0 gives no power terms at all: the result
    is the empty expansion with an infinite error order.
    """
    _require_discrete(input)
    if model.kind is FadingKind.CUSTOM and model.custom.q_nonzero:
        return Expansion(0.0, (), Regime.HIGH, math.inf)
    groups, nxt = _kernel_terms(model, M)
    raw = []
    for a, entries in groups:
        for p, n in entries:
            for j in range(n + 1):
                k = n - j
                if k == 0:
                    mel = mellin_mmse(input, a).value
                else:
                    mel = mellin_mmse_log_weighted(input, 1.0 + a, k)
                raw.append((p * math.comb(n, j) * (-1) ** j * mel, -1.0 - a, j))
    if nxt is not None:
        err = 1.0 + nxt
    elif model.kind is FadingKind.CUSTOM and model.custom.error_order is not None:
        err = float(model.custom.error_order)
    else:
        err = 1.0 + groups[-1][0]
    return Expansion(0.0, _collect(raw, Regime.HIGH), Regime.HIGH, err,
                     {"quantity": "mmse", "model": model.label, "input": input.label})


def high_snr_avg_mmse_discrete(model: FadingModel, input: Constellation,
                               M: int = DEFAULT_HIGH_TERMS) -> Expansion:
    """sum_m p_m M[mmse; 1+a_m] snr^(-1-a_m) for a discrete input.

    For Rayleigh and Ricean a_m = m+1, for Nakagami a_m = m+mu, for the vector
    model a_m = m+k.
    """
    _require_discrete(input)
    return general_high_snr(model, input, M)


def _tail_integral(term: Term):
    """int_snr^inf of one MMSE term as a list of (coeff, pow, log_pow)."""
    b = -term.snr_pow - 1.0            # term is c eps^(-1-b) (ln eps)^j
    if not b > 0:
        raise DomainError("tail integral diverges for snr_pow >= -1")
    j = term.log_pow
    return [(term.coeff * math.factorial(j) / math.factorial(i) / b ** (j - i + 1), -b, i)
            for i in range(j + 1)]


def mi_from_mmse(mmse_exp: Expansion, constant: float) -> Expansion:
    """MI expansion constant - int_snr^inf (MMSE expansion), term by term."""
    if mmse_exp.regime is not Regime.HIGH:
        raise DomainError("tail integration applies to high-snr expansions")
    raw = []
    for t in mmse_exp.terms:
        raw.extend((-c, p, n) for c, p, n in _tail_integral(t))
    err = mmse_exp.error_order - 1.0
    meta = dict(mmse_exp.meta, quantity="mi")
    return Expansion(float(constant), _collect(raw, Regime.HIGH), Regime.HIGH, err, meta)


def high_snr_avg_mi_discrete(model: FadingModel, input: Constellation,
                             M: int = DEFAULT_HIGH_TERMS) -> Expansion:
    """H(X) - sum_m p_m M[mmse; 1+a_m] snr^(-a_m) / a_m."""
    _require_discrete(input)
    return mi_from_mmse(general_high_snr(model, input, M), entropy(input))


# --- high snr, continuous inputs --------------------------------------------------

def _leading_kernel_exponent(model):
    return small_t_terms(model, 1)[0][0]


def _sin_pole_is_double(model, n):
    """Whether z = n + 1 is also a pole of M[f; 1 - z]."""
    kind = model.kind
    if kind in (FadingKind.RAYLEIGH, FadingKind.RICEAN):
        return n + 1 >= 2
    if kind is FadingKind.VECTOR:
        return n + 1 >= model.k + 1
    mu = model.shape_mu
    if abs(mu - round(mu)) < _INT_TOL:
        return n + 1 >= round(mu) + 1
    return False


def _gaussian_input_terms(model, M):
    """Residue series for the Gaussian input, first M distinct powers.

    Poles of pi M[f; 1-z] / sin(pi z) right of the strip: z = n+1 from the
    sine and z = 1 + a_m from the kernel. Apart they are simple; where they
    coincide the double pole yields a log(snr) term.
    """
    if not model.closed_form:
        raise UnsupportedError("the Gaussian-input series needs a closed-form fading model")
    kernel = [(a, p) for a, p, _ in small_t_terms(model, M + 2)]
    poles: dict = {}
    for n in range(M + 2):
        poles.setdefault(round(n + 1.0, 12), {"sin": None, "ker": None})["sin"] = n
    for a, p in kernel:
        poles.setdefault(round(1.0 + a, 12), {"sin": None, "ker": None})["ker"] = p
    z_sorted = sorted(poles)
    raw = []
    used = 0
    for z0 in z_sorted:
        if used == M:
            break
        info = poles[z0]
        n, p = info["sin"], info["ker"]
        if n is not None and (p is not None or _sin_pole_is_double(model, n)):
            H = mellin_f_continued(model, z0, 0, double_pole=True)
            dH = mellin_f_continued(model, z0, 1, double_pole=True)
            raw.append((H, -z0, 1))
            raw.append((-dH, -z0, 0))
        elif n is not None:
            raw.append(((-1) ** n * mellin_f_continued(model, z0, 0), -z0, 0))
        else:
            raw.append((p * math.pi / math.sin(math.pi * z0), -z0, 0))
        used += 1
    rest = [z for z in z_sorted if z > -raw[-1][1]]
    err = rest[0] if rest else math.inf
    return _collect(raw, Regime.HIGH), err


def high_snr_avg_mmse_continuous(model: FadingModel, input: Constellation,
                                 M: int = DEFAULT_HIGH_TERMS) -> Expansion:
    """High-snr expansion for the continuous inputs.

    The uniform-phase and uniform-amplitude inputs get the single term
    zeta M[f; 0] / snr (zeta = 1/2, 1/2, 1 for infinite PSK, PAM, QAM); the
    remainder is O(snr^-R) for every R below ``error_order``. The Gaussian
    input gets its full residue series truncated to M powers.
    """
    kind = input.kind
    meta = {"quantity": "mmse", "model": model.label, "input": input.label}
    if kind is Kind.GAUSSIAN:
        if not 1 <= M <= _MAX_HIGH_TERMS:
            raise DomainError(f"number of terms must be in 1..{_MAX_HIGH_TERMS}, got {M}")
        terms, err = _gaussian_input_terms(model, M)
        return Expansion(0.0, terms, Regime.HIGH, err, meta)
    if kind is Kind.DISCRETE:
        raise DomainError("use the discrete-input expansion for finite constellations")
    dp = canonical.decay_params(input)
    if model.kind is FadingKind.CUSTOM and model.custom.q_nonzero:
        a0 = math.inf
    else:
        a0 = _leading_kernel_exponent(model)
    coeff = dp.zeta * mellin_f(model, 0.0)
    return Expansion(0.0, [Term(coeff, -1.0, 0)], Regime.HIGH, min(1.0 + a0, dp.r1), meta)


# --- low snr -----------------------------------------------------------------------

def low_snr_avg_mmse(model: FadingModel, input: Constellation, M: int = DEFAULT_LOW_TERMS) -> Expansion:
    """sum_m M[f; m+1] mmse^(m)(0+) / m! snr^m for m < M."""
    M = int(M)
    if not 1 <= M <= _MAX_LOW_TERMS:
        raise DomainError(f"low-snr terms must be in 1..{_MAX_LOW_TERMS}, got {M}")
    cv = canonical.curve(input)
    terms = []
    for m in range(M):
        d = cv.mmse_deriv_at_zero(m).value
        terms.append(Term(mellin_f(model, m + 1.0) * d / math.factorial(m), float(m), 0))
    return Expansion(0.0, terms, Regime.LOW, float(M),
                     {"quantity": "mmse", "model": model.label, "input": input.label})


def low_snr_avg_mi(model: FadingModel, input: Constellation, M: int = DEFAULT_LOW_TERMS) -> Expansion:
    """int_0^snr of the low-snr MMSE expansion."""
    e = low_snr_avg_mmse(model, input, M)
    terms = [Term(t.coeff / (t.snr_pow + 1.0), t.snr_pow + 1.0, 0) for t in e.terms]
    return Expansion(0.0, terms, Regime.LOW, e.error_order + 1.0, dict(e.meta, quantity="mi"))


# --- evaluation --------------------------------------------------------------------

def evaluate(e: Expansion, snr: float) -> float:
    """constant + sum coeff snr^pow (log snr)^log_pow."""
    snr = float(snr)
    if not snr > 0:
        raise DomainError("snr must be positive")
    if e.regime is Regime.HIGH and snr < 10.0:
        warnings.warn(f"high-snr expansion evaluated at snr={snr:g}", ExpansionRangeWarning, stacklevel=2)
    if e.regime is Regime.LOW and snr > 0.1:
        warnings.warn(f"low-snr expansion evaluated at snr={snr:g}", ExpansionRangeWarning, stacklevel=2)
    return e.constant + math.fsum(t.value(snr) for t in e.terms)


def decay_rate(model: FadingModel, input: Constellation, snr_lo_db: float, snr_hi_db: float,
               quantity: str = "mmse", points: int = 11) -> float:
    """Least-squares slope of -log(oracle) against log snr between two dB points.

    ``quantity`` is "mmse" for the average MMSE or "mi_gap" for
    H(X) - average MI.
    """
    if not snr_hi_db > snr_lo_db:
        raise DomainError("need snr_hi_db > snr_lo_db")
    snr = 10.0 ** (np.linspace(snr_lo_db, snr_hi_db, points) / 10.0)
    if quantity == "mmse":
        vals = [reference.avg_mmse_quad(model, input, s).value for s in snr]
    elif quantity == "mi_gap":
        _require_discrete(input)
        vals = [reference.avg_mi_gap_quad(model, input, s).value for s in snr]
    else:
        raise DomainError(f"unknown quantity {quantity!r}")
    slope = np.polyfit(np.log(snr), -np.log(vals), 1)[0]
    return float(slope)
