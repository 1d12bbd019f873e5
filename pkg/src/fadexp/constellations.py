"""Input distributions: finite constellations and continuous families."""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError

__all__ = [
    "Kind",
    "Constellation",
    "make_psk",
    "make_pam",
    "make_qam",
    "make_discrete",
    "gaussian",
    "inf_psk",
    "inf_pam",
    "inf_qam",
    "min_distance",
    "power",
    "entropy",
    "from_json",
    "load_json",
    "parse_input",
]

_DUP_TOL = 1e-12
_PROB_TOL = 1e-9


class Kind(str, enum.Enum):
    DISCRETE = "discrete"
    INF_PSK = "infpsk"
    INF_PAM = "infpam"
    INF_QAM = "infqam"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True, eq=False)
class Constellation:
    """An input distribution.

    Discrete inputs carry their support and probabilities; the continuous
    families are identified by ``kind`` alone and always have unit power.
    """

    kind: Kind
    points: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None
    label: str = ""
    _key: tuple = field(default=(), repr=False)

    @property
    def is_discrete(self) -> bool:
        return self.kind is Kind.DISCRETE

    @property
    def size(self) -> int:
        if not self.is_discrete:
            raise DomainError(f"{self.label} has no finite support")
        return len(self.points)

    def key(self) -> tuple:
        """Hashable identity used for caching."""
        return self._key

    def __eq__(self, other):
        return isinstance(other, Constellation) and self._key == other._key

    def __hash__(self):
        return hash(self._key)


def make_discrete(points, probs=None, label: str = "custom") -> Constellation:
    """Validate and build a discrete constellation.

    Probabilities off by more than 1e-9 from unit sum are rejected; smaller
    deviations are renormalized away.
    """
    pts = np.asarray(points, dtype=complex).ravel()
    if pts.size < 2:
        raise DomainError("a discrete constellation needs at least two points")
    if probs is None:
        pr = np.full(pts.size, 1.0 / pts.size)
    else:
        pr = np.asarray(probs, dtype=float).ravel()
        if pr.shape != pts.shape:
            raise DomainError("points and probs differ in length")
    if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(pr)):
        raise DomainError("points and probabilities must be finite")
    if np.any(pr <= 0):
        raise DomainError("all probabilities must be positive")
    total = pr.sum()
    if abs(total - 1.0) > _PROB_TOL:
        raise DomainError(f"probabilities sum to {total!r}, not 1")
    pr = pr / total
    diff = np.abs(pts[:, None] - pts[None, :])
    np.fill_diagonal(diff, np.inf)
    if diff.min() < _DUP_TOL:
        raise DomainError("constellation has duplicate points")
    pts.setflags(write=False)
    pr.setflags(write=False)
    key = ("discrete", label, pts.tobytes(), pr.tobytes())
    return Constellation(Kind.DISCRETE, pts, pr, label, key)


def make_psk(m: int) -> Constellation:
    """m equiprobable points on the unit circle, starting at 1."""
    if int(m) != m or m < 2:
        raise DomainError(f"PSK order must be an integer >= 2, got {m}")
    m = int(m)
    pts = np.exp(2j * np.pi * np.arange(m) / m)
    # exact axis points keep real constellations exactly real
    pts = np.where(np.abs(pts.imag) < 1e-15, pts.real + 0j, pts)
    pts = np.where(np.abs(pts.real) < 1e-15, 1j * pts.imag, pts)
    if m == 4:
        pts = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / math.sqrt(2.0)
        label = "qpsk"
    elif m == 2:
        label = "bpsk"
    else:
        label = f"{m}psk"
    return make_discrete(pts, None, label)


def _pam_levels(m: int) -> np.ndarray:
    levels = np.arange(-(m - 1), m, 2, dtype=float)
    return levels / math.sqrt((m * m - 1) / 3.0)


def make_pam(m: int) -> Constellation:
    """Unit-power equiprobable m-PAM on the real line."""
    if int(m) != m or m < 2:
        raise DomainError(f"PAM order must be an integer >= 2, got {m}")
    return make_discrete(_pam_levels(int(m)), None, f"{int(m)}pam")


def make_qam(m: int) -> Constellation:
    """Unit-power square m-QAM: two sqrt(m)-PAM axes scaled by 1/sqrt(2)."""
    side = math.isqrt(int(m)) if int(m) == m and m > 0 else 0
    if side < 2 or side * side != m:
        raise DomainError(f"QAM order must be a perfect square >= 4, got {m}")
    lv = _pam_levels(side) / math.sqrt(2.0)
    pts = (lv[:, None] + 1j * lv[None, :]).ravel()
    return make_discrete(pts, None, f"{int(m)}qam")


def _continuous(kind: Kind) -> Constellation:
    return Constellation(kind, None, None, kind.value, (kind.value,))


def gaussian() -> Constellation:
    """Zero-mean unit-variance circularly symmetric Gaussian input."""
    return _continuous(Kind.GAUSSIAN)


def inf_psk() -> Constellation:
    """Uniform phase on the unit circle."""
    return _continuous(Kind.INF_PSK)


def inf_pam() -> Constellation:
    """Uniform on [-sqrt(3), sqrt(3)]."""
    return _continuous(Kind.INF_PAM)


def inf_qam() -> Constellation:
    """Uniform on the square of side 2 sqrt(3/2)."""
    return _continuous(Kind.INF_QAM)


def min_distance(c: Constellation) -> float:
    """Smallest distance between two support points."""
    if not c.is_discrete:
        raise DomainError("min_distance needs a discrete constellation")
    diff = np.abs(c.points[:, None] - c.points[None, :])
    np.fill_diagonal(diff, np.inf)
    return float(diff.min())


def power(c: Constellation) -> float:
    """Average energy E|x|^2."""
    if not c.is_discrete:
        return 1.0
    return float(np.dot(c.probs, np.abs(c.points) ** 2))


def entropy(c: Constellation) -> float:
    """Entropy in nats of a discrete input (log m when equiprobable)."""
    if not c.is_discrete:
        raise DomainError("entropy is defined for discrete inputs only")
    p = c.probs
    if np.ptp(p) == 0.0:
        return math.log(p.size)
    return float(-np.dot(p, np.log(p)))


def from_json(doc) -> Constellation:
    """Build a constellation from ``{"label", "points": [{"re", "im", "prob"}]}``."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        entries = doc["points"]
        pts = [complex(float(e.get("re", 0.0)), float(e.get("im", 0.0))) for e in entries]
        probs = [float(e["prob"]) for e in entries]
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"malformed constellation document: {exc}") from exc
    return make_discrete(pts, probs, str(doc.get("label", "custom")))


def load_json(path: str) -> Constellation:
    with open(path, encoding="utf-8") as fh:
        return from_json(json.load(fh))


_NAMED = re.compile(r"^(\d+)[-_]?(psk|pam|qam)$")


def parse_input(value) -> Constellation:
    """Resolve a name such as ``qpsk``, ``16qam``, ``8-pam``, ``gaussian``,
    ``infpsk``, a JSON file path, or a JSON mapping."""
    if isinstance(value, Constellation):
        return value
    if isinstance(value, dict):
        return from_json(value)
    name = str(value).strip().lower()
    simple = {
        "bpsk": lambda: make_psk(2),
        "qpsk": lambda: make_psk(4),
        "gaussian": gaussian,
        "infpsk": inf_psk,
        "inf-psk": inf_psk,
        "infpam": inf_pam,
        "inf-pam": inf_pam,
        "infqam": inf_qam,
        "inf-qam": inf_qam,
    }
    if name in simple:
        return simple[name]()
    m = _NAMED.match(name)
    if m:
        order, fam = int(m.group(1)), m.group(2)
        return {"psk": make_psk, "pam": make_pam, "qam": make_qam}[fam](order)
    if name.endswith(".json"):
        return load_json(str(value))
    if name.startswith("{"):
        return from_json(str(value))
    raise DomainError(f"unknown input {value!r}")
