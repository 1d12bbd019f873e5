"""Power allocation over a bank of parallel independent fading channels.

Channel i sees y_i = sqrt(snr) h_i sqrt(p_i) x_i + n_i with sum p_i <= P.
The exact policy equalizes snr * avg_mmse_i(snr p_i) = lambda over the active
channels; the asymptotic policy uses the leading high-snr MMSE term.
"""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import reference
from .constellations import Constellation, parse_input, power
from .errors import ConvergenceError, DomainError, UnsupportedError
from .fading import FadingKind, FadingModel, from_json as fading_from_json, parse_fading, \
    second_moment, small_t_terms
from .mellin import mellin_mmse

__all__ = [
    "ChannelBank",
    "AllocationMethod",
    "PowerAllocation",
    "exact_allocation",
    "asymptotic_allocation",
    "asymptotic_weights",
    "constrained_capacity",
    "kkt_residual",
    "load_bank",
    "bank_from_json",
    "rayleigh_pair_bank",
    "ricean_pair_bank",
]

_GRID_PER_DECADE = 8
_ORACLE_TOL = 1e-12


@dataclass(frozen=True)
class ChannelBank:
    subchannels: tuple
    total_power: float = 1.0

    def __post_init__(self):
        subs = tuple((m, c) for m, c in self.subchannels)
        object.__setattr__(self, "subchannels", subs)
        if not subs:
            raise DomainError("a channel bank needs at least one subchannel")
        if not self.total_power > 0:
            raise DomainError("total power must be positive")
        for model, c in subs:
            if not c.is_discrete:
                raise DomainError(f"subchannel input {c.label} is not discrete")
            if not math.isfinite(second_moment(model)):
                raise DomainError("subchannel gain has infinite second moment")

    def __len__(self):
        return len(self.subchannels)


class AllocationMethod(str, enum.Enum):
    EXACT = "ExactKKT"
    ASYMPTOTIC = "Asymptotic"


@dataclass(frozen=True)
class PowerAllocation:
    p: tuple
    lam: float
    capacity: float
    method: AllocationMethod
    kkt_residual: float

    def to_dict(self) -> dict:
        return {"p": list(self.p), "lambda": self.lam, "capacity": self.capacity,
                "method": self.method.value, "kkt_residual": self.kkt_residual}


# --- bank construction --------------------------------------------------------------

def bank_from_json(doc) -> ChannelBank:
    """``{"P": 1, "subchannels": [{"fading": {...} | "rayleigh:sigma=1", "input": "16qam" | {...}}]}``"""
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        subs = []
        for entry in doc["subchannels"]:
            fad = entry["fading"]
            model = fading_from_json(fad) if isinstance(fad, dict) else parse_fading(fad)
            subs.append((model, parse_input(entry["input"])))
        P = float(doc.get("P", 1.0))
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed bank document: {exc}") from exc
    return ChannelBank(tuple(subs), P)


def load_bank(path: str) -> ChannelBank:
    with open(path, encoding="utf-8") as fh:
        return bank_from_json(json.load(fh))


def rayleigh_pair_bank(P: float = 1.0) -> ChannelBank:
    """Rayleigh 2 sigma^2 = 4 with 16-QAM next to Rayleigh 2 sigma^2 = 1 with QPSK."""
    from .constellations import make_psk, make_qam
    from .fading import rayleigh
    return ChannelBank(((rayleigh(math.sqrt(2.0)), make_qam(16)),
                        (rayleigh(math.sqrt(0.5)), make_psk(4))), P)


def ricean_pair_bank(P: float = 1.0) -> ChannelBank:
    """As ``rayleigh_pair_bank`` with a line-of-sight component 1 + i on both channels."""
    from .constellations import make_psk, make_qam
    from .fading import ricean
    mu = math.sqrt(2.0)
    return ChannelBank(((ricean(mu, math.sqrt(2.0)), make_qam(16)),
                        (ricean(mu, math.sqrt(0.5)), make_psk(4))), P)


# --- per-channel inverse of the KKT map ------------------------------------------------

class _ChannelCurve:
    """x -> avg_mmse(x) for one subchannel, with its inverse.

    Oracle values on a log grid (8 per decade) are memoized; inversion brackets
    the target on the grid, interpolates in log-log, and may then be polished
    by secant steps on direct oracle calls.
    """

    def __init__(self, model: FadingModel, c: Constellation):
        self.model, self.input = model, c
        self.at_zero = second_moment(model) * power(c)
        self._grid: dict = {}
        self._direct: dict = {}

    def value(self, x: float) -> float:
        if x <= 0.0:
            return self.at_zero
        got = self._direct.get(x)
        if got is None:
            got = reference.avg_mmse_quad(self.model, self.input, x, tol=_ORACLE_TOL).value
            self._direct[x] = got
        return got

    def _node(self, k: int) -> float:
        v = self._grid.get(k)
        if v is None:
            v = self.value(10.0 ** (k / _GRID_PER_DECADE))
            self._grid[k] = v
        return v

    def interp_inverse(self, v: float) -> float:
        """x with avg_mmse(x) ~ v from the memoized grid (v < at_zero)."""
        lo, hi = -6 * _GRID_PER_DECADE, 0
        while self._node(hi) > v:
            lo, hi = hi, hi + 2 * _GRID_PER_DECADE
            if hi > 20 * _GRID_PER_DECADE:
                raise ConvergenceError("power inversion left the grid")
        if self._node(lo) <= v:
            # target between 0 and the smallest grid node: linear in x there
            x0 = 10.0 ** (lo / _GRID_PER_DECADE)
            return x0 * (self.at_zero - v) / (self.at_zero - self._node(lo))
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self._node(mid) > v:
                lo = mid
            else:
                hi = mid
        ks = [k for k in range(lo - 1, hi + 2)]
        lx = np.array([k / _GRID_PER_DECADE * math.log(10.0) for k in ks])
        ly = np.log([self._node(k) for k in ks])
        # inverse interpolation: log x as a cubic in log avg_mmse
        coef = np.polyfit(ly - ly.mean(), lx, 3)
        return float(math.exp(np.polyval(coef, math.log(v) - ly.mean())))

    def inverse(self, v: float, rtol: float = 1e-13) -> float:
        """x with avg_mmse(x) = v by secant steps in log-log from the grid guess."""
        if v >= self.at_zero:
            return 0.0
        lv = math.log(v)
        x0 = self.interp_inverse(v)
        x1 = x0 * (1.0 + 1e-4)
        f0 = math.log(self.value(x0)) - lv
        f1 = math.log(self.value(x1)) - lv
        for _ in range(30):
            if f1 == f0:
                break
            lx2 = math.log(x1) - f1 * (math.log(x1) - math.log(x0)) / (f1 - f0)
            x0, f0 = x1, f1
            x1 = math.exp(lx2)
            f1 = math.log(self.value(x1)) - lv
            if abs(f1) < rtol or abs(x1 - x0) < rtol * x1:
                return x1
        if abs(f1) < 1e-9:
            return x1
        raise ConvergenceError("power inversion did not converge", partial=x1, est_error=abs(f1))


_CURVES: dict = {}


def _curve(model, c):
    key = (model, c)
    cv = _CURVES.get(key)
    if cv is None:
        cv = _CURVES[key] = _ChannelCurve(model, c)
    return cv


# --- exact policy ----------------------------------------------------------------------

def _powers(curves, snr, lam, exact, workers):
    target = lam / snr

    def one(cv):
        if target >= cv.at_zero:
            return 0.0
        x = cv.inverse(target) if exact else cv.interp_inverse(target)
        return x / snr

    if workers > 1 and len(curves) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, curves))
    return [one(cv) for cv in curves]


def kkt_residual(bank: ChannelBank, snr: float, p, lam: float) -> float:
    """Largest relative KKT violation over all subchannels.

    Active channels need snr avg_mmse_i(snr p_i) = lambda; inactive ones
    need snr avg_mmse_i(0) <= lambda.
    """
    worst = 0.0
    for (model, c), pi in zip(bank.subchannels, p):
        cv = _curve(model, c)
        g = snr * cv.value(snr * pi)
        if pi > 0:
            worst = max(worst, abs(g - lam) / lam)
        else:
            worst = max(worst, max(g - lam, 0.0) / lam)
    return worst


def exact_allocation(bank: ChannelBank, snr: float, workers: Optional[int] = None) -> PowerAllocation:
    """Solve the KKT conditions of max sum_i avg_I_i(snr p_i) s.t. sum p_i = P.

    lambda is first bracketed in (0, snr max_i E|h_i|^2 E|x_i|^2] and found by
    Brent's method on the grid-interpolated inverses; it is then polished
    with secant steps in which every per-channel inverse is exact.
    """
    snr = float(snr)
    if not snr > 0:
        raise DomainError("snr must be positive")
    P = bank.total_power
    curves = [_curve(m, c) for m, c in bank.subchannels]
    workers = workers or reference.worker_count()
    lam_max = snr * max(cv.at_zero for cv in curves)

    def excess(loglam, exact):
        return math.fsum(_powers(curves, snr, math.exp(loglam), exact, workers)) - P

    hi = math.log(lam_max)
    lo = hi - 1.0
    while excess(lo, False) <= 0:
        hi, lo = lo, lo - 2.0
        if lo < hi - 200:
            raise ConvergenceError("could not bracket lambda")
    l0 = brentq(lambda u: excess(u, False), lo, hi, xtol=1e-12, rtol=1e-12)
    # secant polish with exact inverses
    l1 = l0 + 1e-6
    f0, f1 = excess(l0, True), excess(l1, True)
    for _ in range(30):
        if abs(f1) <= 1e-13 * P or f1 == f0:
            break
        l2 = l1 - f1 * (l1 - l0) / (f1 - f0)
        l0, f0 = l1, f1
        l1, f1 = l2, excess(l2, True)
    lam = math.exp(l1)
    p = _powers(curves, snr, lam, True, workers)
    if abs(math.fsum(p) - P) > 1e-9 * P:
        raise ConvergenceError("power constraint not met", partial=p, est_error=abs(math.fsum(p) - P))
    cap = constrained_capacity(bank, snr, p)
    return PowerAllocation(tuple(p), lam, cap, AllocationMethod.EXACT, kkt_residual(bank, snr, p, lam))


# --- asymptotic policy -------------------------------------------------------------------

def asymptotic_weights(bank: ChannelBank) -> list:
    """tau_i = exp(-|mu_i|^2 / 2 sigma_i^2) M[mmse_i; 2] / (2 sigma_i^2)."""
    taus = []
    for model, c in bank.subchannels:
        if model.kind not in (FadingKind.RAYLEIGH, FadingKind.RICEAN):
            raise UnsupportedError(f"the asymptotic policy covers Rayleigh and Ricean fading, not {model.label}")
        a0, p0, _ = small_t_terms(model, 1)[0]
        taus.append(p0 * mellin_mmse(c, a0).value)
    return taus


def asymptotic_allocation(bank: ChannelBank, snr: float, with_capacity: bool = True) -> PowerAllocation:
    """p_i = P sqrt(tau_i) / sum_j sqrt(tau_j), lambda = (sum_j sqrt(tau_j) / P)^2 / snr."""
    snr = float(snr)
    if not snr > 0:
        raise DomainError("snr must be positive")
    roots = [math.sqrt(t) for t in asymptotic_weights(bank)]
    total = math.fsum(roots)
    P = bank.total_power
    p = [P * r / total for r in roots]
    lam = (total / P) ** 2 / snr
    if with_capacity:
        cap = constrained_capacity(bank, snr, p)
        res = kkt_residual(bank, snr, p, lam)
    else:
        cap, res = math.nan, math.nan
    return PowerAllocation(tuple(p), lam, cap, AllocationMethod.ASYMPTOTIC, res)


def constrained_capacity(bank: ChannelBank, snr: float, p) -> float:
    """sum_i avg_I_i(snr p_i) in nats."""
    if isinstance(p, PowerAllocation):
        p = p.p
    if len(p) != len(bank):
        raise DomainError("allocation length does not match the bank")
    total = 0.0
    for (model, c), pi in zip(bank.subchannels, p):
        if pi < 0:
            raise DomainError("powers must be non-negative")
        if pi > 0:
            total += reference.avg_mi_quad(model, c, snr * pi, tol=_ORACLE_TOL).value
    return total
