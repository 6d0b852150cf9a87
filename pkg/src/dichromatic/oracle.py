"""Brute-force frequency-domain solver used to audit the closed forms.

The linearized Langevin equations are assembled for the complex amplitudes
and their conjugate partners at the same Omega (``x`` and ``x*`` below
denote ``x(Omega)`` and ``[x(-Omega)]^dagger``), solved numerically, and
only then rotated into the quadrature sum/difference basis. No decoupling
or resolved-sideband approximation is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import SystemParams
from .spectra import CHANNELS, MAIN_CHANNELS, TransferRow, channel_psd, SIGNAL_CHANNELS

UNKNOWNS = ("c+", "c+*", "c-", "c-*", "d", "d*", "tc+", "tc+*", "tc-", "tc-*")
LADDER_INPUTS = ("a+", "a+*", "a-", "a-*", "q", "q*", "f", "f*", "ta+", "ta+*", "ta-", "ta-*")
LADDER_OUTPUTS = ("b+", "b+*", "b-", "b-*", "qo", "qo*", "tb+", "tb+*", "tb-", "tb-*")
OUTPUTS = ("beta_a+", "beta_a-", "beta_phi+", "beta_phi-", "qout_a", "qout_phi",
           "tbeta_a+", "tbeta_a-", "tbeta_phi+", "tbeta_phi-")
INTRACAVITY = ("g_a+", "g_a-", "g_phi+", "g_phi-", "d_a", "d_phi",
               "tg_a+", "tg_a-", "tg_phi+", "tg_phi-")

# output ladder index -> (input ladder index it reflects, unknown it leaks from)
_OUTPUT_MAP = {0: (0, 0), 1: (1, 1), 2: (2, 2), 3: (3, 3), 4: (4, 4), 5: (5, 5),
               6: (8, 6), 7: (9, 7), 8: (10, 8), 9: (11, 9)}
_CONDITION_LIMIT = 1e14
_R2 = math.sqrt(2.0)


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass
class LinearSystem:
    omega: float
    matrix: np.ndarray          # unknowns x unknowns
    forcing: np.ndarray         # unknowns x ladder inputs
    unknowns: tuple
    inputs: tuple
    include_sidebands: bool
    condition: float
    params: SystemParams


@dataclass
class ScatteringMatrix:
    omega: float
    matrix: np.ndarray          # quadrature outputs x quadrature channels
    outputs: tuple
    channels: tuple
    ladder: np.ndarray          # ladder outputs x ladder inputs
    ladder_outputs: tuple
    ladder_inputs: tuple
    intracavity: np.ndarray     # intracavity quadratures x channels
    intracavity_labels: tuple
    condition: float

    def row(self, output: str) -> TransferRow:
        i = self.outputs.index(output)
        return TransferRow(self.omega, dict(zip(self.channels, self.matrix[i])), output)

    def intracavity_row(self, label: str) -> TransferRow:
        i = self.intracavity_labels.index(label)
        return TransferRow(self.omega, dict(zip(self.channels, self.intracavity[i])), label)

    def combination(self, weights: dict, label: str = "") -> TransferRow:
        vec = sum(w * self.matrix[self.outputs.index(o)] for o, w in weights.items())
        return TransferRow(self.omega, dict(zip(self.channels, vec)), label)


def assemble(params: SystemParams, Omega: float, include_sidebands: bool = False, *,
             literal_sideband_sign: bool = False) -> LinearSystem:
    """Linear system ``M x = B u`` for the intracavity and mechanical amplitudes.

    ``literal_sideband_sign`` flips the sign with which ``tc+*`` drives the
    mechanics, reproducing a sign that breaks the commutator structure;
    it exists only to demonstrate that failure.
    """
    n = 10 if include_sidebands else 6
    m = 12 if include_sidebands else 8
    k = params.eta_C
    L = params.gamma - 1j * Omega
    Lm = params.gamma_m - 1j * Omega
    sg, sm = math.sqrt(2 * params.gamma), math.sqrt(2 * params.gamma_m)
    M = np.zeros((n, n), dtype=complex)
    B = np.zeros((n, m), dtype=complex)
    # optical modes
    M[0, 0], M[0, 4], B[0, 0] = L, k, sg
    M[1, 1], M[1, 5], B[1, 1] = L, k, sg
    M[2, 2], M[2, 5], B[2, 2] = L, -k, sg
    M[3, 3], M[3, 4], B[3, 3] = L, -k, sg
    # mechanics: driven by c+ and the partner of c-, thermal bath and the force
    M[4, 4], M[4, 0], M[4, 3] = Lm, -k, -k
    M[5, 5], M[5, 1], M[5, 2] = Lm, -k, -k
    B[4, 4], B[4, 6] = sm, 1j
    B[5, 5], B[5, 7] = sm, -1j
    if include_sidebands:
        dp = params.gamma + 2j * params.omega_m - 1j * Omega
        dm = params.gamma - 2j * params.omega_m - 1j * Omega
        s = -1.0 if literal_sideband_sign else 1.0
        M[4, 8], M[4, 7] = k, s * k
        M[5, 9], M[5, 6] = k, s * k
        M[6, 6], M[6, 5], B[6, 8] = dp, k, sg
        M[7, 7], M[7, 4], B[7, 9] = dm, k, sg
        M[8, 8], M[8, 4], B[8, 10] = dm, -k, sg
        M[9, 9], M[9, 5], B[9, 11] = dp, -k, sg
    cond = float(np.linalg.cond(M))
    return LinearSystem(Omega, M, B, UNKNOWNS[:n], LADDER_INPUTS[:m], include_sidebands, cond, params)


def _pair_block(n_pairs):
    """Rows mapping ladder pairs (x, x*) to quadratures (x_a, x_phi)."""
    T = np.zeros((2 * n_pairs, 2 * n_pairs), dtype=complex)
    for p in range(n_pairs):
        T[2 * p, 2 * p] = T[2 * p, 2 * p + 1] = 1 / _R2
        T[2 * p + 1, 2 * p] = -1j / _R2
        T[2 * p + 1, 2 * p + 1] = 1j / _R2
    return T


def _sum_diff(vec_index_plus_a, vec_index_plus_phi, vec_index_minus_a, vec_index_minus_phi, n):
    """Rows (x_a+, x_a-, x_phi+, x_phi-) from per-mode quadratures."""
    S = np.zeros((4, n), dtype=complex)
    S[0, vec_index_plus_a] = S[0, vec_index_minus_a] = 1 / _R2
    S[1, vec_index_plus_a], S[1, vec_index_minus_a] = 1 / _R2, -1 / _R2
    S[2, vec_index_plus_phi] = S[2, vec_index_minus_phi] = 1 / _R2
    S[3, vec_index_plus_phi], S[3, vec_index_minus_phi] = 1 / _R2, -1 / _R2
    return S


def _quadrature_transform(n_pairs: int, layout: tuple) -> np.ndarray:
    """Ladder -> labelled quadrature basis.

    ``layout`` lists, per pair group, either ("opt", pair_plus, pair_minus)
    for two optical modes combined into sum/difference quadratures or
    ("single", pair) for a mode kept as (x_a, x_phi).
    """
    P = _pair_block(n_pairs)  # per-mode quadratures, index 2p = a, 2p+1 = phi
    rows = []
    for entry in layout:
        if entry[0] == "opt":
            _, p, q = entry
            rows.append(_sum_diff(2 * p, 2 * p + 1, 2 * q, 2 * q + 1, 2 * n_pairs) @ P)
        else:
            _, p = entry
            rows.append(P[2 * p:2 * p + 2])
    return np.vstack(rows)


def _input_transform(include_sidebands):
    # pairs: 0 a+, 1 a-, 2 q, 3 f, 4 ta+, 5 ta-
    layout = [("opt", 0, 1), ("single", 2), ("single", 3)]
    if include_sidebands:
        layout.append(("opt", 4, 5))
    return _quadrature_transform(6 if include_sidebands else 4, tuple(layout))


def _output_transform(include_sidebands):
    # pairs: 0 b+, 1 b-, 2 qo, 3 tb+, 4 tb-
    layout = [("opt", 0, 1), ("single", 2)]
    if include_sidebands:
        layout.append(("opt", 3, 4))
    return _quadrature_transform(5 if include_sidebands else 3, tuple(layout))


def _intracavity_transform(include_sidebands):
    # pairs: 0 c+, 1 c-, 2 d, 3 tc+, 4 tc-
    layout = [("opt", 0, 1), ("single", 2)]
    if include_sidebands:
        layout.append(("opt", 3, 4))
    return _quadrature_transform(5 if include_sidebands else 3, tuple(layout))


def solve_scattering(system: LinearSystem) -> ScatteringMatrix:
    """Solve the system and map inputs to outputs through b = -a + sqrt(2 gamma) c."""
    if not np.isfinite(system.condition) or system.condition > _CONDITION_LIMIT:
        raise SingularSystemError(
            f"linear system at Omega={system.omega!r} is singular (condition number {system.condition:.3g})")
    params = system.params
    n, m = system.matrix.shape[0], system.forcing.shape[1]
    X = np.linalg.solve(system.matrix, system.forcing)
    n_out = n
    S = np.zeros((n_out, m), dtype=complex)
    for o in range(n_out):
        i_in, i_unk = _OUTPUT_MAP[o]
        gain = math.sqrt(2 * params.gamma_m) if o in (4, 5) else math.sqrt(2 * params.gamma)
        S[o] = gain * X[i_unk]
        S[o, i_in] -= 1.0
    sb = system.include_sidebands
    Tin = _input_transform(sb)
    Tin_inv = np.linalg.inv(Tin)
    Tout = _output_transform(sb)
    Tint = _intracavity_transform(sb)
    channels = CHANNELS if sb else MAIN_CHANNELS
    outputs = OUTPUTS if sb else OUTPUTS[:6]
    labels = INTRACAVITY if sb else INTRACAVITY[:6]
    # quadrature order of the input transform is alpha_a+, alpha_a-, alpha_phi+, alpha_phi-,
    # q_a, q_phi, f_a, f_phi[, talpha...] which matches CHANNELS
    return ScatteringMatrix(
        omega=system.omega,
        matrix=Tout @ S @ Tin_inv,
        outputs=outputs,
        channels=channels,
        ladder=S,
        ladder_outputs=LADDER_OUTPUTS[:n_out],
        ladder_inputs=system.inputs,
        intracavity=Tint @ X @ Tin_inv,
        intracavity_labels=labels,
        condition=system.condition,
    )


def scattering(params: SystemParams, Omega: float, include_sidebands: bool = False) -> ScatteringMatrix:
    return solve_scattering(assemble(params, Omega, include_sidebands))


def output_psd(scattering: ScatteringMatrix, params: SystemParams, output, noise_model=None):
    """(output PSD, force-referred PSD) for an output label or a TransferRow.

    ``noise_model`` maps channel -> single-sided PSD; the default gives unit
    PSD to vacuum quadratures and 2 n_T + 1 to thermal ones.
    """
    row = scattering.row(output) if isinstance(output, str) else output
    psd = noise_model.get if noise_model is not None else (lambda ch, _d=None: channel_psd(params, ch))
    total = 0.0
    for ch, c in row.coeffs.items():
        if ch in SIGNAL_CHANNELS:
            continue
        total += abs(c) ** 2 * psd(ch, 0.0)
    gain = sum(abs(row[ch]) ** 2 for ch in SIGNAL_CHANNELS)
    if gain == 0:
        raise ValueError(f"output {row.label!r} has zero signal coefficient; cannot refer to force")
    return total, total / gain


def symplectic_check(scattering: ScatteringMatrix) -> float:
    """Max deviation of S J S^dagger from J on the quantum (non-signal) channels.

    J is +1 on annihilation-type amplitudes and -1 on their conjugate partners;
    the mechanical bath output ``qo = -q + sqrt(2 gamma_m) d`` is included so
    the map is lossless.
    """
    keep = [i for i, lab in enumerate(scattering.ladder_inputs) if not lab.startswith("f")]
    S = scattering.ladder[:, keep]
    sign = lambda labels: np.diag([-1.0 if lab.endswith("*") else 1.0 for lab in labels])
    J_in = sign([scattering.ladder_inputs[i] for i in keep])
    J_out = sign(scattering.ladder_outputs)
    return float(np.max(np.abs(S @ J_in @ S.conj().T - J_out)))


def relative_row_error(candidate: TransferRow, reference: TransferRow, channels=CHANNELS) -> float:
    a, b = candidate.vector(channels), reference.vector(channels)
    scale = np.max(np.abs(b))
    if scale == 0:
        return float(np.max(np.abs(a)))
    return float(np.max(np.abs(a - b)) / scale)
