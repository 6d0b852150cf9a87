"""Time-domain stochastic simulation of the linearized slow-amplitude equations.

Operator noises are replaced by complex Gaussian white noises with the same
symmetrized correlators: ``<a(t) a*(t')> = delta(t - t') / 2`` for vacuum
inputs and ``(n_T + 1/2) delta`` for the thermal bath. Because the dynamics
are linear and only symmetrized spectra are estimated, this c-number
substitution reproduces the quantum noise spectra. With this normalization
each real quadrature series has unit single-sided PSD.

The integrator is Euler-Maruyama with step ``dt``; outputs
``b = -a + sqrt(2 gamma) c`` are block-averaged over ``decimation`` steps,
which keeps white-noise levels intact when recording at a lower rate.
The back-action kernel's causal pole is applied at the integration step
before decimation, so the combined readouts see no aliased vacuum noise.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import signal as sps

from .model import ForceSignal, SystemParams, normalized_power_K, sqrt_xi_K
from .spectra import (
    StrategyKind,
    StrategySpec,
    back_action_kernel,
    sf_combined,
    sf_raw,
)


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    duration: float
    seed: int = 0
    dt: float | None = None
    decimation: int | None = None
    force: ForceSignal | None = None
    noise: bool = True
    include_sidebands: bool = False
    strategies: tuple = ()
    envelope: object = None
    chunk_blocks: int = 2048

    def resolve(self, params: SystemParams) -> tuple[float, int]:
        """Concrete (dt, decimation) for ``params``, checking stability limits."""
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        default_dt = 0.005 / params.gamma
        if self.include_sidebands:
            default_dt /= 100
        dt = self.dt if self.dt is not None else default_dt
        if dt > 0.01 / params.gamma * (1 + 1e-12):
            raise ValueError(f"dt={dt:.3g} s exceeds 0.01/gamma; Euler-Maruyama would misrepresent the cavity")
        if self.include_sidebands and dt * params.omega_m > 0.05:
            raise ValueError("sideband integration needs dt well below 1/omega_m")
        if self.duration < 50 / max(params.gamma_m, 1e-300):
            warnings.warn("duration shorter than 50/gamma_m: the mechanical line is not resolved", stacklevel=3)
        if self.decimation is not None:
            dec = int(self.decimation)
        else:
            # record fast enough that block-averaging droop is negligible up to ~20 gamma_m
            dec = max(1, int(math.pi / (500 * max(params.gamma_m, 1e-300) * dt)))
        if dec < 1:
            raise ValueError("decimation must be >= 1")
        return dt, dec


@dataclass
class TimeSeriesBundle:
    """Block-averaged outputs and sampled intracavity amplitudes of one trajectory."""

    times: np.ndarray
    dt_out: float
    b_plus: np.ndarray
    b_minus: np.ndarray
    c_plus: np.ndarray
    c_minus: np.ndarray
    d: np.ndarray
    metadata: dict = field(default_factory=dict)
    # outputs passed through K(0)/(gamma_m + d/dt) at the integration step, then block-averaged
    kb_plus: np.ndarray | None = None
    kb_minus: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.times)
        for name in ("b_plus", "b_minus", "c_plus", "c_minus", "d", "kb_plus", "kb_minus"):
            arr = getattr(self, name)
            if arr is None:
                continue
            if len(arr) != n:
                raise ValueError(f"{name} has length {len(arr)}, expected {n}")
            if not np.all(np.isfinite(arr)):
                raise SimulationError(f"{name} contains non-finite samples")

    @property
    def quadratures(self) -> dict:
        """Sum/difference output quadratures beta_a+-, beta_phi+-."""
        return _quadratures(self.b_plus, self.b_minus)

    @property
    def filtered_quadratures(self) -> dict | None:
        if self.kb_plus is None or self.kb_minus is None:
            return None
        return _quadratures(self.kb_plus, self.kb_minus)


def _quadratures(bp, bm) -> dict:
    return {
        "beta_a+": bp.real + bm.real,
        "beta_a-": bp.real - bm.real,
        "beta_phi+": bp.imag + bm.imag,
        "beta_phi-": bp.imag - bm.imag,
    }


def params_hash(params: SystemParams) -> str:
    blob = json.dumps(params.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@numba.njit(cache=True)
def _integrate(rng, state, n_blocks, dec, dt, gamma, gamma_m, k, sig_a, sig_q,
               force, f_on, f_off, step0, omega_m, sidebands, k0,
               out_bp, out_bm, out_cp, out_cm, out_d, out_kp, out_km):
    cp, cm, d, tp, tm = state[0], state[1], state[2], state[3], state[4]
    zp, zm = state[5], state[6]
    lam_z = math.exp(-gamma_m * dt)
    gain_z = k0 * (-math.expm1(-gamma_m * dt) / gamma_m if gamma_m > 0 else dt)
    sg = math.sqrt(2.0 * gamma)
    sm = math.sqrt(2.0 * gamma_m)
    lam_p = np.exp(-(gamma + 2j * omega_m) * dt)
    lam_m = np.exp(-(gamma - 2j * omega_m) * dt)
    gain_p = (1.0 - lam_p) / (gamma + 2j * omega_m)
    gain_m = (1.0 - lam_m) / (gamma - 2j * omega_m)
    step = step0
    for blk in range(n_blocks):
        acc_p = 0j
        acc_m = 0j
        acc_zp = 0j
        acc_zm = 0j
        for _ in range(dec):
            dap = complex(rng.standard_normal(), rng.standard_normal()) * sig_a
            dam = complex(rng.standard_normal(), rng.standard_normal()) * sig_a
            dq = complex(rng.standard_normal(), rng.standard_normal()) * sig_q
            fs = force[blk] if (step >= f_on and step < f_off) else 0j
            drive_d = -gamma_m * d + k * (cp + cm.conjugate()) + 1j * fs
            if sidebands:
                drive_d -= k * (tm + tp.conjugate())
                dtp = complex(rng.standard_normal(), rng.standard_normal()) * sig_a
                dtm = complex(rng.standard_normal(), rng.standard_normal()) * sig_a
                tp_new = lam_p * tp + gain_p * (-k * d.conjugate()) + sg * dtp
                tm_new = lam_m * tm + gain_m * (k * d) + sg * dtm
                tp, tm = tp_new, tm_new
            cp_new = cp + dt * (-gamma * cp - k * d) + sg * dap
            cm_new = cm + dt * (-gamma * cm + k * d.conjugate()) + sg * dam
            # midpoint field: makes the discrete cavity reflection exactly all-pass
            bp_step = -dap / dt + sg * 0.5 * (cp + cp_new)
            bm_step = -dam / dt + sg * 0.5 * (cm + cm_new)
            acc_p += bp_step
            acc_m += bm_step
            # low-pass the outputs before decimation so the kernel sees no aliased noise
            zp_new = lam_z * zp + gain_z * bp_step
            zm_new = lam_z * zm + gain_z * bm_step
            acc_zp += 0.5 * (zp + zp_new)
            acc_zm += 0.5 * (zm + zm_new)
            zp, zm = zp_new, zm_new
            d = d + dt * drive_d + sm * dq
            cp, cm = cp_new, cm_new
            step += 1
        out_bp[blk] = acc_p / dec
        out_bm[blk] = acc_m / dec
        out_cp[blk] = cp
        out_cm[blk] = cm
        out_d[blk] = d
        out_kp[blk] = acc_zp / dec
        out_km[blk] = acc_zm / dec
    state[0], state[1], state[2], state[3], state[4] = cp, cm, d, tp, tm
    state[5], state[6] = zp, zm


def simulate(params: SystemParams, config: SimConfig) -> TimeSeriesBundle:
    """Integrate one trajectory; identical (params, config) give identical output."""
    dt, dec = config.resolve(params)
    n_blocks = int(round(config.duration / (dt * dec)))
    if n_blocks < 1:
        raise ValueError("duration shorter than one recorded sample")
    rng = np.random.default_rng(np.uint64(config.seed))
    sig_a = math.sqrt(dt / 4.0) if config.noise else 0.0
    n_T = params.n_T if params.thermal_on else 0.0
    sig_q = math.sqrt((n_T + 0.5) * dt / 2.0) if (config.noise and params.thermal_on) else 0.0
    times = (np.arange(n_blocks) + 0.5) * dec * dt
    if config.envelope is not None:
        # arbitrary complex slow envelope F_s(t), held constant over each recorded block
        force = np.asarray(config.envelope(times), dtype=complex) * np.ones(n_blocks)
        f_on, f_off = 0, n_blocks * dec
        peak = float(np.max(np.abs(force))) if n_blocks else 0.0
    elif config.force is not None:
        force = np.full(n_blocks, complex(config.force.slow_amplitude))
        f_on = int(round(config.force.t_start / dt))
        f_off = f_on + int(round(config.force.tau / dt))
        peak = abs(force[0])
    else:
        force, f_on, f_off, peak = np.zeros(n_blocks, dtype=complex), -1, -1, 0.0
    names = ("bp", "bm", "cp", "cm", "d", "kp", "km")
    out = {name: np.empty(n_blocks, dtype=complex) for name in names}
    state = np.zeros(7, dtype=complex)
    k0 = float(normalized_power_K(params, 0.0))
    scale = 1.0 + math.sqrt(params.K0 / max(params.gamma_m, 1e-300)) + peak / max(params.gamma_m, 1e-300)
    chunk = max(1, config.chunk_blocks)
    for start in range(0, n_blocks, chunk):
        nb = min(chunk, n_blocks - start)
        views = [out[k][start:start + nb] for k in names]
        _integrate(rng, state, nb, dec, dt, params.gamma, params.gamma_m, params.eta_C,
                   sig_a, sig_q, force[start:start + nb], f_on, f_off, start * dec, params.omega_m,
                   config.include_sidebands, k0, *views)
        if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > 1e6 * scale:
            raise SimulationError(
                f"integration unstable at t={(start + nb) * dec * dt:.4g} s (|state| = {np.max(np.abs(state)):.3g})")
    meta = {"seed": int(config.seed), "dt": dt, "decimation": dec, "params_hash": params_hash(params),
            "noise": config.noise, "include_sidebands": config.include_sidebands}
    return TimeSeriesBundle(times, dt * dec, out["bp"], out["bm"], out["cp"], out["cm"], out["d"], meta,
                            out["kp"], out["km"])


# -- spectral estimation -----------------------------------------------------

def welch_psd(series, dt: float, segment_length: int, window: str = "hann"):
    """One-sided Welch PSD (Hann, 50 % overlap) on angular frequencies Omega >= 0.

    Normalized per Hz so that real white noise with ``<x x> = delta / 2``
    has PSD 1.
    """
    series = np.asarray(series)
    if segment_length < 2 or segment_length > len(series) // 4:
        raise ValueError(f"segment length {segment_length} needs at least 4 segments in {len(series)} samples")
    f, p = sps.welch(series, fs=1.0 / dt, window=window, nperseg=segment_length,
                     noverlap=segment_length // 2, detrend=False, scaling="density",
                     return_onesided=True)
    return 2 * np.pi * f, p


def n_segments(n_samples: int, segment_length: int) -> int:
    step = segment_length - segment_length // 2
    return (n_samples - segment_length) // step + 1


def _omega_for_fft(n: int, dt: float):
    """Physics frequency of each rfft bin: numpy's e^{-i 2 pi f t} is e^{+i Omega t} here."""
    return -2 * np.pi * np.fft.rfftfreq(n, dt)


_AMPLITUDE = {StrategyKind.RAW_MINUS_AMPLITUDE, StrategyKind.COMBINED_AMPLITUDE}
_PHASE = {StrategyKind.PHASE_PLUS, StrategyKind.COMBINED_PHASE}


def strategy_series(bundle: TimeSeriesBundle, params: SystemParams, strategy: StrategySpec) -> np.ndarray:
    """Recorded output series after the strategy's post-processing."""
    strategy = _spec(strategy)
    q = bundle.quadratures
    kind = strategy.kind
    if kind is StrategyKind.RAW_MINUS_AMPLITUDE:
        return q["beta_a-"]
    if kind is StrategyKind.PHASE_PLUS:
        return q["beta_phi+"]
    if kind in (StrategyKind.COMBINED_AMPLITUDE, StrategyKind.COMBINED_PHASE):
        main, ref = (("beta_a-", "beta_a+") if kind is StrategyKind.COMBINED_AMPLITUDE
                     else ("beta_phi+", "beta_phi-"))
        n = len(q[main])
        omega = _omega_for_fft(n, bundle.dt_out)
        fq = bundle.filtered_quadratures
        if fq is None or normalized_power_K(params, 0.0) == 0:
            kernel = back_action_kernel(params, omega)
            return q[main] + np.fft.irfft(kernel * np.fft.rfft(q[ref]), n)
        # remaining K(Omega)/K(0) factor is smooth, so decimation aliasing is negligible
        shape = normalized_power_K(params, omega) / normalized_power_K(params, 0.0)
        return q[main] + np.fft.irfft(shape * np.fft.rfft(fq[ref]), n)
    raise ValueError(f"strategy {kind.value} is not available from time-domain records")


def signal_gain(params: SystemParams, Omega, strategy: StrategySpec):
    """Signed coefficient of the readout force quadrature (f_phi or f_a) in the strategy output."""
    strategy = _spec(strategy)
    g = sqrt_xi_K(params, Omega) / (params.gamma_m - 1j * np.asarray(Omega))
    if strategy.kind in _AMPLITUDE:
        return g
    if strategy.kind in _PHASE:
        return -g
    raise ValueError(f"unsupported strategy {strategy.kind.value}")


def analytic_sf(params: SystemParams, Omega, strategy) -> np.ndarray:
    """Closed-form force PSD of the strategies reachable from time-domain records."""
    kind = _spec(strategy).kind
    if kind in (StrategyKind.RAW_MINUS_AMPLITUDE, StrategyKind.PHASE_PLUS):
        return sf_raw(params, Omega)
    if kind in (StrategyKind.COMBINED_AMPLITUDE, StrategyKind.COMBINED_PHASE):
        return sf_combined(params, Omega)
    raise ValueError(f"strategy {kind.value} is not available from time-domain records")


def _spec(strategy):
    return strategy if isinstance(strategy, StrategySpec) else StrategySpec(strategy)


@dataclass
class StrategyEstimate:
    omega: np.ndarray
    sf_estimate: np.ndarray
    sf_analytic: np.ndarray
    output_psd: np.ndarray
    referred_series: np.ndarray
    segments: int


def measure_strategy(bundle: TimeSeriesBundle, params: SystemParams, strategy,
                     segment_length: int | None = None, settle: float | None = None) -> StrategyEstimate:
    """Force-referred PSD estimate of a strategy, with the analytic prediction on the same bins."""
    strategy = _spec(strategy)
    series = strategy_series(bundle, params, strategy)
    skip = int((settle if settle is not None else 20 / max(params.gamma_m, 1e-300)) / bundle.dt_out)
    skip = min(skip, len(series) // 10)
    data = series[skip:]
    if segment_length is None:
        segment_length = 2 ** int(math.floor(math.log2(max(len(data) // 48, 8))))
    omega, psd = welch_psd(data, bundle.dt_out, segment_length)
    gain2 = np.abs(signal_gain(params, omega, strategy)) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        sf = psd / gain2
    analytic = analytic_sf(params, omega, strategy)
    n = len(series)
    spectrum = np.fft.rfft(series)
    g = signal_gain(params, _omega_for_fft(n, bundle.dt_out), strategy)
    referred = np.fft.irfft(spectrum / g, n)
    return StrategyEstimate(omega, sf, analytic, psd, referred, n_segments(len(data), segment_length))


def band_agreement(estimate: StrategyEstimate, lo: float, hi: float) -> float:
    """Median relative deviation |estimate/analytic - 1| over lo <= Omega <= hi."""
    mask = (estimate.omega >= lo) & (estimate.omega <= hi)
    if not np.any(mask):
        raise ValueError("no Welch bins inside the requested band")
    ratio = estimate.sf_estimate[mask] / estimate.sf_analytic[mask]
    return float(abs(np.median(ratio) - 1.0))


@dataclass
class DetectionResult:
    estimate: float
    std_error: float
    snr: float
    detected: bool
    noise_estimates: np.ndarray
    threshold: float


def detect_force(bundle: TimeSeriesBundle, params: SystemParams, strategy, tau: float,
                 t_start: float, psi_f: float = -np.pi / 2, settle: float | None = None) -> DetectionResult:
    """Matched-filter estimate of f_s0 for a force of duration ``tau`` starting at ``t_start``.

    The output is referred to force and correlated with the rectangular
    envelope, weighting each frequency by the inverse analytic force PSD.
    The same estimator applied to non-overlapping force-free windows gives
    the standard error; SNR = estimate / standard error.
    """
    strategy = _spec(strategy)
    series = strategy_series(bundle, params, strategy)
    n = len(series)
    dt = bundle.dt_out
    if t_start < 0 or t_start + tau > n * dt:
        raise ValueError("force window exceeds the record")
    width = int(round(tau / dt))
    omega = _omega_for_fft(n, dt)
    g = signal_gain(params, omega, strategy)
    weight = 1.0 / analytic_sf(params, np.abs(omega), strategy)
    referred = np.fft.rfft(series) / g
    template = np.zeros(n)
    template[:width] = 1.0
    H = np.fft.rfft(template)
    corr = np.fft.irfft(referred * np.conj(H) * weight, n)
    # irfft normalization: sum over the full two-sided spectrum / n
    two_sided = np.full(len(H), 2.0)
    two_sided[0] = 1.0
    if n % 2 == 0:
        two_sided[-1] = 1.0
    norm = float(np.sum(two_sided * np.abs(H) ** 2 * weight)) / n
    estimates = corr / norm  # estimate of the force quadrature for a window starting at each sample

    unit = ForceSignal(1.0, psi_f, tau)
    f_a, f_phi = unit.quadratures
    projection = f_phi if strategy.kind in _AMPLITUDE else f_a
    if abs(projection) < 1e-12:
        raise ValueError("force phase leaves nothing in the measured quadrature")
    i0 = int(round(t_start / dt))
    settle_n = int((settle if settle is not None else 20 / max(params.gamma_m, 1e-300)) / dt)
    noise_starts = [s for s in range(settle_n, n - width + 1, width)
                    if s + width <= i0 - width // 2 or s >= i0 + width + width // 2]
    if len(noise_starts) < 2:
        raise ValueError("record too short for force-free reference windows")
    noise = estimates[noise_starts] / projection
    value = estimates[i0] / projection
    std = float(np.std(noise, ddof=1))
    if std > 0:
        snr = value / std
    else:
        # noise-free record
        snr = math.copysign(math.inf, value) if value else math.nan
    s0 = float(analytic_sf(params, 0.0, strategy))
    threshold = math.sqrt(s0 / tau)
    return DetectionResult(float(value), std, float(snr), bool(snr >= 1.0), noise, threshold)
