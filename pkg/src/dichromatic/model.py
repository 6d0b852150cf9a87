"""Physical parameters, regime checks and elementary frequency-domain factors.

All rates are angular frequencies in rad/s. The probe amplitudes are taken
real and equal (``C_+ = C_- = C``) and the coupling ``eta`` real, so the
optical and mechanical quadratures decouple into amplitude and phase sets.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants

HBAR = constants.hbar
K_B = constants.k

__all__ = [
    "HBAR",
    "K_B",
    "SystemParams",
    "ModeFrequencies",
    "MeanField",
    "ForceSignal",
    "Diagnostic",
    "SteadyStateError",
    "validate",
    "zero_point_amplitude",
    "coupling_eta",
    "bose_occupation",
    "mode_frequencies",
    "xi_factor",
    "normalized_power_K",
    "sqrt_xi_K",
    "k_sql",
    "steady_state",
    "compensation_pumps",
]


@dataclass(frozen=True)
class SystemParams:
    """Rates, coupling and pump of the two-mode opto-mechanical sensor.

    ``eta`` (s^-1) and ``pump_C`` (photon-flux normalized, s^-1/2) only enter
    the noise spectra through the product ``eta * pump_C``.
    """

    gamma: float
    gamma_m: float
    omega_m: float
    eta: float = 1.0
    pump_C: float = 0.0
    n_T: float = 0.0
    thermal_on: bool = False
    omega0: float | None = None
    mass: float | None = None
    length: float | None = None

    def __post_init__(self):
        for name in ("gamma", "omega_m"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be a positive finite rate, got {value!r}")
        # gamma_m = 0 is the lossless-oscillator limit used by some closed forms
        if not math.isfinite(self.gamma_m) or self.gamma_m < 0:
            raise ValueError(f"gamma_m must be finite and non-negative, got {self.gamma_m!r}")
        for name in ("eta", "pump_C", "n_T"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {value!r}")
        for name in ("omega0", "mass", "length"):
            value = getattr(self, name)
            if value is not None and (not math.isfinite(value) or value <= 0):
                raise ValueError(f"{name} must be positive when given, got {value!r}")

    @classmethod
    def canonical(cls, K0: float | None = None, **overrides) -> "SystemParams":
        """Desk-scale parameters: gamma = 2pi 1e4, gamma_m = 2pi 1e2, omega_m = 2pi 1e6.

        ``K0`` is the normalized probe power at Omega = 0; it defaults to the
        resonant SQL power ``gamma_m``.
        """
        base = dict(gamma=2 * np.pi * 1e4, gamma_m=2 * np.pi * 1e2, omega_m=2 * np.pi * 1e6, eta=1.0)
        base.update(overrides)
        params = cls(**base)
        return params.with_K0(params.gamma_m if K0 is None else K0)

    @classmethod
    def from_physical(cls, gamma, gamma_m, omega_m, omega0, mass, length, **kwargs) -> "SystemParams":
        """Build parameters deriving ``eta`` from carrier frequency, mass and arm length."""
        x0 = zero_point_amplitude(mass, omega_m)
        eta = coupling_eta(omega0, length, x0)
        return cls(gamma=gamma, gamma_m=gamma_m, omega_m=omega_m, eta=eta,
                   omega0=omega0, mass=mass, length=length, **kwargs)

    @property
    def eta_C(self) -> float:
        return self.eta * self.pump_C

    @property
    def K0(self) -> float:
        return 4.0 * self.eta_C ** 2 / self.gamma

    @property
    def nu(self) -> float:
        if self.gamma_m == 0:
            return math.inf
        return self.eta ** 2 / (self.gamma * self.gamma_m)

    def with_K0(self, K0: float) -> "SystemParams":
        """Return a copy whose pump amplitude gives ``K(0) = K0``."""
        if K0 < 0:
            raise ValueError("K0 must be non-negative")
        if self.eta == 0:
            raise ValueError("cannot set the probe power with zero coupling")
        C = math.sqrt(K0 * self.gamma / 4.0) / self.eta
        return dataclasses.replace(self, pump_C=C)

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ModeFrequencies:
    omega_minus: float
    omega_plus: float
    splitting: float


@dataclass(frozen=True)
class MeanField:
    C_plus: complex
    C_minus: complex
    D: complex
    nu: float
    iterations: int = 0


@dataclass(frozen=True)
class ForceSignal:
    """Resonant force ``F0 cos(omega_m t + psi)`` switched on for ``tau`` seconds.

    ``f_s0`` is normalized by ``sqrt(2 hbar omega_m m)`` (units s^-1). The slow
    complex amplitude driving the oscillator is ``(f_s0 / 2) exp(-i psi)``;
    ``psi = -pi/2`` puts the whole force into the ``f_phi`` quadrature read
    by the amplitude-quadrature strategies.
    """

    f_s0: float
    psi_f: float = -np.pi / 2
    tau: float = 0.05
    t_start: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("force duration tau must be positive")

    @property
    def bandwidth(self) -> float:
        return 2 * np.pi / self.tau

    @property
    def slow_amplitude(self) -> complex:
        return 0.5 * self.f_s0 * np.exp(-1j * self.psi_f)

    @property
    def quadratures(self) -> tuple[float, float]:
        """(f_a, f_phi) carried by the force during its window."""
        fs = self.slow_amplitude
        return math.sqrt(2) * fs.real, math.sqrt(2) * fs.imag


@dataclass(frozen=True)
class Diagnostic:
    condition: str
    ratio: float
    threshold: float
    status: str  # "pass" or "warn"

    @property
    def ok(self) -> bool:
        return self.status == "pass"


class SteadyStateError(RuntimeError):
    """Mean-field iteration failed; ``nu_C2`` tells how close to instability."""

    def __init__(self, message, nu_C2):
        super().__init__(f"{message} (nu*C^2 = {nu_C2:.6g})")
        self.nu_C2 = nu_C2


def validate(params: SystemParams, factor: float = 10.0) -> list[Diagnostic]:
    """Check the resolved-sideband ordering gamma_m << gamma << omega_m.

    Violations are reported as warnings; the oracle and the simulator remain
    usable outside the regime.
    """
    if params.gamma_m <= 0:
        raise ValueError("regime check needs a positive mechanical linewidth")
    checks = [
        ("gamma_m << gamma", params.gamma / params.gamma_m),
        ("gamma << omega_m", params.omega_m / params.gamma),
    ]
    return [Diagnostic(name, ratio, factor, "pass" if ratio >= factor else "warn")
            for name, ratio in checks]


def zero_point_amplitude(mass: float, omega_m: float) -> float:
    if mass <= 0 or omega_m <= 0:
        raise ValueError("mass and omega_m must be positive")
    return math.sqrt(HBAR / (2.0 * mass * omega_m))


def coupling_eta(omega0: float, length: float, x0: float) -> float:
    if omega0 <= 0 or length <= 0:
        raise ValueError("omega0 and length must be positive")
    if x0 < 0:
        raise ValueError("x0 must be non-negative")
    return x0 / length * omega0


def bose_occupation(omega_m: float, temperature: float) -> float:
    """Mean thermal phonon number 1/(exp(hbar w / kT) - 1)."""
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if temperature == 0:
        return 0.0
    return 1.0 / math.expm1(HBAR * omega_m / (K_B * temperature))


def mode_frequencies(omega0: float, omega_m: float) -> ModeFrequencies:
    """Split modes synchronized to the mechanics: |kappa| = omega_m / 2."""
    half = omega_m / 2.0
    return ModeFrequencies(omega0 - half, omega0 + half, omega_m)


def xi_factor(gamma, Omega):
    """Cavity reflection phase (gamma + i Omega)/(gamma - i Omega)."""
    Omega = np.asarray(Omega)
    return (gamma + 1j * Omega) / (gamma - 1j * Omega)


def normalized_power_K(params: SystemParams, Omega):
    """Normalized probe power 4 gamma (eta C)^2 / (gamma^2 + Omega^2)."""
    Omega = np.asarray(Omega, dtype=float)
    g = params.gamma
    return 4.0 * g * params.eta_C ** 2 / (g * g + Omega * Omega)


def sqrt_xi_K(params: SystemParams, Omega):
    """Branch of sqrt(xi K) fixed as 2 sqrt(gamma) eta C / (gamma - i Omega)."""
    Omega = np.asarray(Omega, dtype=float)
    return 2.0 * math.sqrt(params.gamma) * params.eta_C / (params.gamma - 1j * Omega)


def k_sql(params: SystemParams, Omega):
    """Probe power that reaches the SQL at Omega: sqrt(gamma_m^2 + Omega^2)."""
    Omega = np.asarray(Omega, dtype=float)
    return np.hypot(params.gamma_m, Omega)


def steady_state(params: SystemParams, A_plus: float, A_minus: float, *,
                 paper_mode: bool = True, rtol: float = 1e-12,
                 max_iter: int = 200, damping: float = 0.5) -> MeanField:
    """Mean intracavity amplitudes under the ponderomotive nonlinearity.

    Solves ``C+ (1 + nu |C-|^2) = g A+`` and ``C- (1 - nu |C+|^2) = g A-``
    with ``g = sqrt(2/gamma)`` on the branch continuously connected to
    ``nu = 0``. ``paper_mode`` drops the mechanical mean amplitude (D = 0).
    """
    if A_plus < 0 or A_minus < 0:
        raise ValueError("pump amplitudes must be real and non-negative")
    if params.gamma_m == 0:
        raise ValueError("mean field is undefined for an undamped oscillator")
    g = math.sqrt(2.0 / params.gamma)
    nu = params.nu
    if paper_mode or nu == 0.0 or A_minus == 0.0 or A_plus == 0.0:
        if paper_mode or nu == 0.0:
            cp, cm = g * A_plus, g * A_minus
        elif A_minus == 0.0:
            cp, cm = g * A_plus, 0.0
        else:
            cp, cm = 0.0, g * A_minus
        D = 0.0 if paper_mode else params.eta * cp * cm / params.gamma_m
        return MeanField(complex(cp), complex(cm), complex(D), nu, 0)

    def residual(x):
        return x * (1.0 + nu * g * g * A_minus ** 2 / (1.0 - nu * x * x) ** 2) - g * A_plus

    def derivative(x):
        u = 1.0 - nu * x * x
        return 1.0 + nu * g * g * A_minus ** 2 * (1.0 / u ** 2 + 4.0 * nu * x * x / u ** 3)

    x = g * A_plus
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if nu * x * x >= 1.0:
            break
        cm = g * A_minus / (1.0 - nu * x * x)
        x_new = (1.0 - damping) * x + damping * g * A_plus / (1.0 + nu * cm * cm)
        if abs(x_new - x) <= rtol * abs(x_new):
            x = x_new
            converged = True
            break
        x = x_new
    if not converged:
        # Newton from the linear guess, kept inside the stable branch.
        x = g * A_plus
        for it in range(1, max_iter + 1):
            if nu * x * x >= 1.0:
                raise SteadyStateError("mean-field solution crossed the ponderomotive instability", nu * x * x)
            step = residual(x) / derivative(x)
            x_new = x - step
            if nu * x_new * x_new >= 1.0:
                x_new = 0.5 * (x + 1.0 / math.sqrt(nu))
            if abs(x_new - x) <= rtol * abs(x_new):
                x = x_new
                converged = True
                break
            x = x_new
    if not converged or abs(residual(x)) > 1e-9 * g * A_plus:
        raise SteadyStateError("mean-field iteration did not converge", nu * x * x)
    cm = g * A_minus / (1.0 - nu * x * x)
    D = params.eta * x * cm / params.gamma_m
    return MeanField(complex(x), complex(cm), complex(D), nu, it)


def compensation_pumps(params: SystemParams, eta_e: float, C_plus: complex, C_minus: complex) -> complex:
    """Product E+ E-* of auxiliary-polarization pumps that cancels the mean drive on D."""
    if eta_e == 0:
        raise ValueError("compensation is impossible with zero auxiliary coupling")
    return -np.conj(params.eta) * C_plus * np.conj(C_minus) / eta_e
