"""Closed-form output quadratures and force-referred noise spectra.

Input channels are quadratures in the sum/difference basis of the two probe
modes. Vacuum quadratures carry unit single-sided PSD, the thermal ones
``2 n_T + 1`` (zero when the thermal channel is disabled). Force referral
divides an output PSD by the squared magnitude of its signal coefficients.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .model import SystemParams, k_sql, normalized_power_K, sqrt_xi_K, xi_factor

MAIN_CHANNELS = (
    "alpha_a+", "alpha_a-", "alpha_phi+", "alpha_phi-",
    "q_a", "q_phi", "f_a", "f_phi",
)
TILDE_CHANNELS = ("talpha_a+", "talpha_a-", "talpha_phi+", "talpha_phi-")
CHANNELS = MAIN_CHANNELS + TILDE_CHANNELS
SIGNAL_CHANNELS = ("f_a", "f_phi")
THERMAL_CHANNELS = ("q_a", "q_phi")


class StrategyKind(str, enum.Enum):
    RAW_MINUS_AMPLITUDE = "raw_minus_amplitude"
    COMBINED_AMPLITUDE = "combined_amplitude"
    PHASE_PLUS = "phase_plus"
    COMBINED_PHASE = "combined_phase"
    GENERALIZED_PAIR = "generalized_pair"
    SIDEBAND_CORRUPTED = "sideband_corrupted"
    SIDEBAND_FILTERED = "sideband_filtered"


@dataclass(frozen=True)
class StrategySpec:
    kind: StrategyKind
    varphi: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if self.kind is StrategyKind.GENERALIZED_PAIR:
            if self.varphi is None or not math.isfinite(self.varphi):
                raise ValueError("generalized pair needs a finite varphi")
        elif self.varphi is not None:
            raise ValueError("varphi only applies to the generalized pair")


@dataclass
class TransferRow:
    """Complex coefficients of one output quadrature over the input channels."""

    omega: float
    coeffs: dict = field(default_factory=dict)
    label: str = ""

    def __getitem__(self, channel) -> complex:
        return self.coeffs.get(channel, 0j)

    def vector(self, channels=CHANNELS) -> np.ndarray:
        return np.array([self[c] for c in channels], dtype=complex)

    def scaled(self, factor, label=None) -> "TransferRow":
        return TransferRow(self.omega, {k: factor * v for k, v in self.coeffs.items()}, label or self.label)

    def plus(self, other: "TransferRow", factor=1.0, label=None) -> "TransferRow":
        if other.omega != self.omega:
            raise ValueError(f"rows at different frequencies: {self.omega} vs {other.omega}")
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0j) + factor * v
        return TransferRow(self.omega, out, label or self.label)

    def is_finite(self) -> bool:
        return all(np.isfinite(v) for v in self.coeffs.values())


@dataclass
class ForceSpectrum:
    grid: np.ndarray
    values: dict
    sql: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if self.grid.size and np.any(np.diff(self.grid) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        for name, v in self.values.items():
            v = np.asarray(v, dtype=float)
            if np.any(v[np.isfinite(v)] < 0):
                raise ValueError(f"negative spectral density in {name}")
            self.values[name] = v


def _as_K(params, Omega, K):
    if K is None:
        return normalized_power_K(params, Omega)
    K = np.asarray(K)
    if np.any(np.real(K) <= 0):
        raise ValueError("normalized probe power K must be positive")
    return K


def _require_power(params, Omega, K):
    K = _as_K(params, Omega, K)
    if np.any(np.real(K) <= 0):
        raise ValueError("shot-noise term diverges at zero probe power")
    return K


def thermal_floor(params: SystemParams) -> float:
    """Force-referred thermal term 2 gamma_m (2 n_T + 1), zero when disabled."""
    if not params.thermal_on:
        return 0.0
    return 2.0 * params.gamma_m * (2.0 * params.n_T + 1.0)


def channel_psd(params: SystemParams, channel: str) -> float:
    if channel in SIGNAL_CHANNELS:
        return 0.0
    if channel in THERMAL_CHANNELS:
        return (2.0 * params.n_T + 1.0) if params.thermal_on else 0.0
    return 1.0


def frequency_grid(params: SystemParams, n: int = 2001, kind: str = "linear",
                   lo: float | None = None, hi: float | None = None) -> np.ndarray:
    """Evaluation grid in rad/s.

    The default spans +-5e3 gamma_m, clipped inside the optical line where
    the slow-amplitude model holds. ``log`` grids are positive only.
    """
    if n < 1:
        raise ValueError("grid needs at least one point")
    if kind == "linear":
        top = hi if hi is not None else min(5e3 * params.gamma_m, params.gamma * (1 - 1.0 / n))
        bottom = lo if lo is not None else -top
        return np.linspace(bottom, top, n)
    if kind == "log":
        bottom = lo if lo is not None else 1e-2 * params.gamma_m
        top = hi if hi is not None else min(1e2 * params.gamma_m, 0.5 * params.gamma)
        if bottom <= 0:
            raise ValueError("log grid needs a positive lower edge")
        return np.geomspace(bottom, top, n)
    raise ValueError(f"unknown grid kind {kind!r}")


# -- transfer rows ---------------------------------------------------------

def transfer_amplitude(params: SystemParams, Omega: float) -> tuple[TransferRow, TransferRow]:
    """Rows of the amplitude sum/difference outputs (beta_a+, beta_a-)."""
    xi = complex(xi_factor(params.gamma, Omega))
    K = float(normalized_power_K(params, Omega))
    sk = complex(sqrt_xi_K(params, Omega))
    mech = params.gamma_m - 1j * Omega
    plus = TransferRow(Omega, {"alpha_a+": xi}, "beta_a+")
    minus = TransferRow(Omega, {
        "alpha_a-": xi,
        "alpha_a+": -xi * K / mech,
        "q_a": -sk * math.sqrt(2 * params.gamma_m) / mech,
        "f_phi": sk / mech,
    }, "beta_a-")
    return plus, minus


def transfer_phase(params: SystemParams, Omega: float) -> tuple[TransferRow, TransferRow]:
    """Rows of the phase outputs (beta_phi-, beta_phi+); the signal enters through f_a."""
    xi = complex(xi_factor(params.gamma, Omega))
    K = float(normalized_power_K(params, Omega))
    sk = complex(sqrt_xi_K(params, Omega))
    mech = params.gamma_m - 1j * Omega
    minus = TransferRow(Omega, {"alpha_phi-": xi}, "beta_phi-")
    plus = TransferRow(Omega, {
        "alpha_phi+": xi,
        "alpha_phi-": -xi * K / mech,
        "q_phi": -sk * math.sqrt(2 * params.gamma_m) / mech,
        "f_a": -sk / mech,
    }, "beta_phi+")
    return minus, plus


def combine_back_action_free(reference: TransferRow, measured: TransferRow,
                             channel: str = "alpha_a+") -> TransferRow:
    """Subtract the back action seen in ``measured`` using ``reference``.

    ``reference`` carries only the back-action channel (e.g. beta_a+), so the
    combination ``measured - (m/r) reference`` eliminates that channel; its
    coefficient is set to exactly zero.
    """
    if reference.omega != measured.omega:
        raise ValueError("rows must be evaluated at the same frequency")
    r = reference[channel]
    if r == 0:
        raise ValueError(f"reference row has no weight on {channel}")
    weight = measured[channel] / r
    out = measured.plus(reference, -weight, label=measured.label + "^comb")
    out.coeffs[channel] = 0j
    return out


def back_action_kernel(params: SystemParams, Omega):
    """Post-processing kernel K/(gamma_m - i Omega) applied to the measured reference output."""
    return normalized_power_K(params, Omega) / (params.gamma_m - 1j * np.asarray(Omega))


def combined_amplitude_row(params: SystemParams, Omega: float) -> TransferRow:
    plus, minus = transfer_amplitude(params, Omega)
    return combine_back_action_free(plus, minus, "alpha_a+")


def combined_phase_row(params: SystemParams, Omega: float) -> TransferRow:
    minus, plus = transfer_phase(params, Omega)
    return combine_back_action_free(minus, plus, "alpha_phi-")


def generalized_pair(params: SystemParams, Omega: float, varphi: float) -> tuple[TransferRow, TransferRow]:
    """Normalized sum and difference of the rotated per-mode quadratures.

    With ``b+v = b+a cos v + b+phi sin v`` and ``b-v = b-a cos v - b-phi sin v``
    the rows returned are ``(b+v +- b-v)/sqrt 2``, i.e.
    ``beta_a+ cos v + beta_phi- sin v`` (no mechanical signal) and
    ``beta_a- cos v + beta_phi+ sin v``.
    """
    a_plus, a_minus = transfer_amplitude(params, Omega)
    p_minus, p_plus = transfer_phase(params, Omega)
    c, s = math.cos(varphi), math.sin(varphi)
    total = a_plus.scaled(c, "b_sum").plus(p_minus, s)
    diff = a_minus.scaled(c, "b_diff").plus(p_plus, s)
    return total, diff


def generalized_combined_row(params: SystemParams, Omega: float, varphi: float) -> TransferRow:
    total, diff = generalized_pair(params, Omega, varphi)
    kernel = complex(back_action_kernel(params, Omega))
    out = diff.plus(total, kernel, label="b_diff^comb")
    out.coeffs["alpha_a+"] = 0j
    out.coeffs["alpha_phi-"] = 0j
    return out


def strategy_row(params: SystemParams, Omega: float, strategy: StrategySpec, *,
                 exact: bool = True) -> TransferRow:
    """Output row actually recorded (after post-processing) for a strategy."""
    kind = StrategySpec(strategy) if isinstance(strategy, str) else strategy
    kind, varphi = kind.kind, kind.varphi
    if kind is StrategyKind.RAW_MINUS_AMPLITUDE:
        return transfer_amplitude(params, Omega)[1]
    if kind is StrategyKind.COMBINED_AMPLITUDE:
        return combined_amplitude_row(params, Omega)
    if kind is StrategyKind.PHASE_PLUS:
        return transfer_phase(params, Omega)[1]
    if kind is StrategyKind.COMBINED_PHASE:
        return combined_phase_row(params, Omega)
    if kind is StrategyKind.GENERALIZED_PAIR:
        return generalized_combined_row(params, Omega, varphi)
    from . import sidebands
    if kind is StrategyKind.SIDEBAND_CORRUPTED:
        return sidebands.beta_comb_with_sidebands(params, Omega, exact=exact)
    if kind is StrategyKind.SIDEBAND_FILTERED:
        return sidebands.filtered_row(params, Omega, exact=exact)
    raise ValueError(f"unsupported strategy {kind}")


# -- spectral densities ----------------------------------------------------

def row_psd(row: TransferRow, params: SystemParams) -> float:
    """Single-sided noise PSD of an output row (signal channels excluded)."""
    return float(sum(abs(v) ** 2 * channel_psd(params, ch) for ch, v in row.coeffs.items()))


def signal_gain(row: TransferRow) -> float:
    return float(sum(abs(row[ch]) ** 2 for ch in SIGNAL_CHANNELS))


def force_referred_psd(row: TransferRow, params: SystemParams) -> float:
    gain = signal_gain(row)
    if gain == 0:
        raise ValueError(f"row {row.label!r} carries no signal; cannot refer to force")
    return row_psd(row, params) / gain


def sf_raw(params: SystemParams, Omega, K=None):
    """Difference amplitude quadrature alone: thermal + shot + back action."""
    K = _require_power(params, Omega, K)
    w2 = params.gamma_m ** 2 + np.asarray(Omega) ** 2
    return thermal_floor(params) + w2 / K + K


def sf_sql(params: SystemParams, Omega):
    return 2.0 * k_sql(params, Omega)


def sf_combined(params: SystemParams, Omega, K=None):
    """Back-action-free combination: thermal + shot only."""
    K = _require_power(params, Omega, K)
    w2 = params.gamma_m ** 2 + np.asarray(Omega) ** 2
    return thermal_floor(params) + w2 / K


def detection_threshold(spectrum_value, tau):
    """Smallest detectable f_s0 at unit SNR over a force of duration tau."""
    if np.any(np.asarray(tau) <= 0):
        raise ValueError("tau must be positive")
    bandwidth = 2 * np.pi / np.asarray(tau)
    return np.sqrt(np.asarray(spectrum_value) * bandwidth / (2 * np.pi))


def strategy_sf(params: SystemParams, Omega, strategy: StrategySpec, *, exact: bool = True):
    """Force-referred PSD of a strategy from its transfer rows, vectorized over Omega."""
    omegas = np.atleast_1d(np.asarray(Omega, dtype=float))
    out = np.array([force_referred_psd(strategy_row(params, float(w), strategy, exact=exact), params)
                    for w in omegas])
    return out if np.ndim(Omega) else float(out[0])
