"""MMSE and mutual information of coherent fading channels with arbitrary
inputs: canonical curves, fading averages, Mellin-transform asymptotics and
power allocation."""

from .constellations import (Constellation, gaussian, inf_pam, inf_psk, inf_qam, make_discrete,
                             make_pam, make_psk, make_qam, parse_input)
from .errors import ConvergenceError, DomainError, FadexpError, OverflowSignal, UnsupportedError
from .fading import FadingModel, nakagami, parse_fading, rayleigh, ricean, vector

__all__ = [
    "Constellation",
    "gaussian",
    "inf_pam",
    "inf_psk",
    "inf_qam",
    "make_discrete",
    "make_pam",
    "make_psk",
    "make_qam",
    "parse_input",
    "FadingModel",
    "rayleigh",
    "ricean",
    "nakagami",
    "vector",
    "parse_fading",
    "FadexpError",
    "DomainError",
    "OverflowSignal",
    "ConvergenceError",
    "UnsupportedError",
]

__version__ = "0.1.0"
