"""Quantum-noise budget of a two-tone (dichromatic) opto-mechanical force sensor.

Closed-form transfer functions and force-referred spectra, a brute-force
frequency-domain solver used to audit them, probe-power optimization, and a
stochastic time-domain simulator with Welch spectra and matched-filter detection.
"""

from .model import (
    ForceSignal,
    MeanField,
    SteadyStateError,
    SystemParams,
    compensation_pumps,
    normalized_power_K,
    steady_state,
    validate,
    xi_factor,
)
from .spectra import StrategyKind, StrategySpec, TransferRow, sf_combined, sf_raw, sf_sql, strategy_sf

__version__ = "0.1.0"

__all__ = [
    "ForceSignal", "MeanField", "SteadyStateError", "SystemParams", "StrategyKind", "StrategySpec",
    "TransferRow", "compensation_pumps", "normalized_power_K", "sf_combined", "sf_raw", "sf_sql",
    "steady_state", "strategy_sf", "validate", "xi_factor",
]
