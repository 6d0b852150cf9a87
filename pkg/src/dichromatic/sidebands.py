"""Parasitic sidebands at omega_+- -+ 2 omega_m and their partial compensation.

The sideband fields beat with the pumps and drive the mechanics through the
sum quadrature ``tg_a+`` (amplitude set) and ``tg_phi-`` (phase set). Those
quadratures carry no mechanical information, so their contribution survives
the back-action-free combination. Output filtering of the sidebands scales
the residual by ``R ~ |Omega| / 2 omega_m``.
"""

from __future__ import annotations

import math

import numpy as np

from .model import SystemParams, k_sql, normalized_power_K, xi_factor
from .spectra import (
    TransferRow,
    _require_power,
    combined_amplitude_row,
    combined_phase_row,
    thermal_floor,
)


def detuned_denominators(params: SystemParams, Omega):
    """(gamma + 2i omega_m - i Omega, gamma - 2i omega_m - i Omega)."""
    Omega = np.asarray(Omega)
    base = params.gamma - 1j * Omega
    return base + 2j * params.omega_m, base - 2j * params.omega_m


def tilde_intracavity(params: SystemParams, Omega: float) -> tuple[TransferRow, TransferRow]:
    """Intracavity sidebands in the ladder basis.

    ``tc+ = (sqrt(2g) ta+ - eta C d*) / D+`` and
    ``tc- = (sqrt(2g) ta- + eta C d) / D-``; ``d`` and ``d*`` label the
    mechanical amplitude and its conjugate partner at the same Omega.
    """
    dp, dm = detuned_denominators(params, Omega)
    s = math.sqrt(2 * params.gamma)
    k = params.eta_C
    plus = TransferRow(Omega, {"ta+": s / dp, "d*": -k / dp}, "tc+")
    minus = TransferRow(Omega, {"ta-": s / dm, "d": k / dm}, "tc-")
    return plus, minus


def tilde_g_exact(params: SystemParams, Omega: float, approximate: bool = False
                  ) -> tuple[TransferRow, TransferRow]:
    """Sideband sum quadratures (tg_a+, tg_phi-) over the tilde input channels.

    The exact form keeps both detuned denominators; ``approximate`` gives the
    resolved-sideband limit ``tg_a+ ~ sqrt(gamma/2)/omega_m * talpha_phi-``.
    Neither row depends on the mechanics.
    """
    amp = math.sqrt(params.gamma / 2)
    if approximate:
        c = amp / params.omega_m
        return (TransferRow(Omega, {"talpha_phi-": c}, "tg_a+"),
                TransferRow(Omega, {"talpha_a+": -c}, "tg_phi-"))
    dp, dm = detuned_denominators(params, Omega)
    s = 1 / dp + 1 / dm
    d = 1 / dp - 1 / dm
    g_a = TransferRow(Omega, {"talpha_a+": amp * s, "talpha_phi-": 1j * amp * d}, "tg_a+")
    g_phi = TransferRow(Omega, {"talpha_a+": -1j * amp * d, "talpha_phi-": amp * s}, "tg_phi-")
    return g_a, g_phi


def tilde_weight(params: SystemParams, Omega):
    """Weight xi K (gamma - i Omega) / ((gamma_m - i Omega) sqrt(2 gamma)) of tg_a+ in beta_a-."""
    Omega = np.asarray(Omega)
    xi = xi_factor(params.gamma, Omega)
    K = normalized_power_K(params, Omega)
    return xi * K * (params.gamma - 1j * Omega) / ((params.gamma_m - 1j * Omega) * math.sqrt(2 * params.gamma))


def beta_comb_with_sidebands(params: SystemParams, Omega: float, *, exact: bool = True,
                             reduction: float = 1.0) -> TransferRow:
    """Back-action-free amplitude combination with the residual sideband back action."""
    base = combined_amplitude_row(params, Omega)
    g_a, _ = tilde_g_exact(params, Omega, approximate=not exact)
    w = complex(tilde_weight(params, Omega)) * reduction
    row = base.plus(g_a, w, label="beta_a-^comb+sb")
    row.coeffs["alpha_a+"] = 0j
    return row


def beta_comb_phase_with_sidebands(params: SystemParams, Omega: float, *, exact: bool = True,
                                   reduction: float = 1.0) -> TransferRow:
    """Phase-set counterpart: tg_phi- enters beta_phi+ with the opposite sign."""
    base = combined_phase_row(params, Omega)
    _, g_phi = tilde_g_exact(params, Omega, approximate=not exact)
    w = complex(tilde_weight(params, Omega)) * reduction
    row = base.plus(g_phi, -w, label="beta_phi+^comb+sb")
    row.coeffs["alpha_phi-"] = 0j
    return row


def reduction_factor(params: SystemParams, Omega):
    """Residual fraction |Omega| / 2 omega_m left after optimal sideband filtering."""
    return np.abs(np.asarray(Omega, dtype=float)) / (2 * params.omega_m)


def filter_phase(params: SystemParams) -> complex:
    """Quadrature phase exp(i phi) = sqrt((gamma + 2i w_m)/(gamma - 2i w_m)) of the sideband readout."""
    g, w = params.gamma, params.omega_m
    return complex(np.sqrt((g + 2j * w) / (g - 2j * w)))


def filtered_row(params: SystemParams, Omega: float, *, exact: bool = True) -> TransferRow:
    """Combined row after sideband filtering: tilde coefficients scaled by R."""
    R = float(reduction_factor(params, Omega))
    row = beta_comb_with_sidebands(params, Omega, exact=exact, reduction=R)
    row.label = "beta_a-^filtered"
    return row


def _tilde_noise_factor(params: SystemParams, Omega, exact: bool):
    """Force-referred tilde term divided by K: (gamma^2 + Omega^2) times 1/4w_m^2 or its exact form."""
    Omega = np.asarray(Omega, dtype=float)
    lorentz = params.gamma ** 2 + Omega ** 2
    if not exact:
        return lorentz / (4 * params.omega_m ** 2)
    dp, dm = detuned_denominators(params, Omega)
    return 0.5 * lorentz * (1 / np.abs(dp) ** 2 + 1 / np.abs(dm) ** 2)


def sf_with_sidebands(params: SystemParams, Omega, K=None, *, exact: bool = False):
    """Combined-strategy PSD including the parasitic back action.

    ``exact=False`` is the resolved-sideband closed form
    ``thermal + (gamma_m^2 + W^2)/K + K (gamma^2 + W^2)/(4 w_m^2)``.
    """
    K = _require_power(params, Omega, K)
    w2 = params.gamma_m ** 2 + np.asarray(Omega) ** 2
    return thermal_floor(params) + w2 / K + K * _tilde_noise_factor(params, Omega, exact)


def sideband_bound(params: SystemParams, Omega):
    """Lower bound thermal + sqrt(gamma^2 + W^2)/(2 w_m) * S_SQL of the closed form."""
    Omega = np.asarray(Omega, dtype=float)
    return thermal_floor(params) + np.hypot(params.gamma, Omega) / (2 * params.omega_m) * 2 * k_sql(params, Omega)


def optimal_K_sidebands(params: SystemParams, Omega):
    """Probe power minimizing the sideband-limited PSD: 2 w_m sqrt((g_m^2+W^2)/(g^2+W^2))."""
    Omega = np.asarray(Omega, dtype=float)
    return 2 * params.omega_m * k_sql(params, Omega) / np.hypot(params.gamma, Omega)


def sf_filtered(params: SystemParams, Omega, K=None, *, exact: bool = False):
    """PSD after sideband filtering.

    For ``gamma_m = 0`` this is the closed form ``W^2/K + K g^2 W^2/(16 w_m^4)``.
    Otherwise the general form with the tilde term scaled by R^2 is used,
    which equals the PSD of :func:`filtered_row`.
    """
    K = _require_power(params, Omega, K)
    Omega = np.asarray(Omega, dtype=float)
    if params.gamma_m == 0 and not exact:
        return Omega ** 2 / K + K * params.gamma ** 2 * Omega ** 2 / (16 * params.omega_m ** 4)
    R = reduction_factor(params, Omega)
    w2 = params.gamma_m ** 2 + Omega ** 2
    return thermal_floor(params) + w2 / K + K * R ** 2 * _tilde_noise_factor(params, Omega, exact)


def filtered_minimum(params: SystemParams, Omega):
    """Minimum over K of the gamma_m = 0 filtered closed form: gamma W^2 / (2 w_m^2)."""
    Omega = np.asarray(Omega, dtype=float)
    return params.gamma * Omega ** 2 / (2 * params.omega_m ** 2)


def displayed_filtered_bound(params: SystemParams, Omega):
    """The bound (gamma |W| / 2 w_m^2) * S_SQL as usually quoted; twice the true minimum at gamma_m = 0."""
    Omega = np.asarray(Omega, dtype=float)
    return params.gamma * np.abs(Omega) / (2 * params.omega_m ** 2) * 2 * k_sql(params, Omega)
