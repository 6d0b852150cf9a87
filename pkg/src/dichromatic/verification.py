"""Invariant suites comparing closed forms with the brute-force solver."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import oracle, sidebands
from .model import SystemParams, normalized_power_K, xi_factor
from .spectra import (
    CHANNELS,
    MAIN_CHANNELS,
    back_action_kernel,
    combined_amplitude_row,
    combined_phase_row,
    transfer_amplitude,
    transfer_phase,
)

ROW_TOL = 1e-10
SYMPLECTIC_TOL = 1e-10
BACK_ACTION_TOL = 1e-12

FAULTS = ("beta_a-", "beta_phi+", "tg_a+", "kernel")


@dataclass
class CheckResult:
    name: str
    deviation: float
    tolerance: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "deviation": self.deviation, "tolerance": self.tolerance,
                "passed": self.passed, **({"detail": self.detail} if self.detail else {})}


def _check(name, deviation, tol, **detail) -> CheckResult:
    deviation = float(deviation)
    return CheckResult(name, deviation, tol, bool(np.isfinite(deviation) and deviation <= tol), detail)


def _closed_rows(params, Omega, fault):
    a_plus, a_minus = transfer_amplitude(params, Omega)
    p_minus, p_plus = transfer_phase(params, Omega)
    rows = {"beta_a+": a_plus, "beta_a-": a_minus, "beta_phi-": p_minus, "beta_phi+": p_plus}
    if fault in ("beta_a-", "beta_phi+"):
        row = rows[fault]
        key = "f_phi" if fault == "beta_a-" else "f_a"
        row.coeffs[key] *= 1 + 1e-6
    return rows


def run_suite(params: SystemParams, grid, *, fault: str | None = None) -> list[CheckResult]:
    """Oracle equivalence, symplecticity, back-action removal and sideband audits on ``grid``."""
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
    grid = np.asarray(grid, dtype=float)
    worst = {k: 0.0 for k in ("rows", "rows_sb", "comb", "comb_sb", "tg", "symp", "symp_sb", "ba")}
    where = {}
    for w in grid:
        w = float(w)
        main = oracle.scattering(params, w, include_sidebands=False)
        full = oracle.scattering(params, w, include_sidebands=True)
        closed = _closed_rows(params, w, fault)
        kern = complex(back_action_kernel(params, w))
        if fault == "kernel":
            kern *= 1 + 1e-6
        for label, row in closed.items():
            for key, scat, chans in (("rows", main, MAIN_CHANNELS), ("rows_sb", full, MAIN_CHANNELS)):
                err = oracle.relative_row_error(row, scat.row(label), chans)
                if err > worst[key]:
                    worst[key], where[key] = err, (w, label)
        if fault is None:
            comb_a, comb_p = combined_amplitude_row(params, w), combined_phase_row(params, w)
        else:
            comb_a = closed["beta_a-"].plus(closed["beta_a+"], kern)
            comb_p = closed["beta_phi+"].plus(closed["beta_phi-"], kern)
        for label, row, ref in (("beta_a-^comb", comb_a, "beta_a-"), ("beta_phi+^comb", comb_p, "beta_phi+")):
            partner = "beta_a+" if ref == "beta_a-" else "beta_phi-"
            oracle_row = main.combination({ref: 1.0, partner: kern}, label)
            err = oracle.relative_row_error(row, oracle_row, MAIN_CHANNELS)
            if err > worst["comb"]:
                worst["comb"], where["comb"] = err, (w, label)
            # eliminated channel, relative to the raw back-action coefficient
            channel = "alpha_a+" if ref == "beta_a-" else "alpha_phi-"
            raw = abs(main.row(ref)[channel])
            ba = abs(oracle_row[channel]) / raw if raw > 0 else abs(oracle_row[channel])
            if ba > worst["ba"]:
                worst["ba"], where["ba"] = ba, (w, label)
        # sideband-corrected combined rows against the full solve
        sb_rows = (
            (sidebands.beta_comb_with_sidebands(params, w, exact=True), "beta_a-", "beta_a+"),
            (sidebands.beta_comb_phase_with_sidebands(params, w, exact=True), "beta_phi+", "beta_phi-"),
        )
        for row, ref, partner in sb_rows:
            if fault == "tg_a+" and ref == "beta_a-":
                row.coeffs["talpha_a+"] *= 1 + 1e-6
            oracle_row = full.combination({ref: 1.0, partner: kern}, row.label)
            err = oracle.relative_row_error(row, oracle_row, CHANNELS)
            if err > worst["comb_sb"]:
                worst["comb_sb"], where["comb_sb"] = err, (w, row.label)
        g_a, g_phi = sidebands.tilde_g_exact(params, w)
        if fault == "tg_a+":
            g_a.coeffs["talpha_a+"] *= 1 + 1e-6
        for row, label in ((g_a, "tg_a+"), (g_phi, "tg_phi-")):
            err = oracle.relative_row_error(row, full.intracavity_row(label), CHANNELS)
            if err > worst["tg"]:
                worst["tg"], where["tg"] = err, (w, label)
        for key, scat in (("symp", main), ("symp_sb", full)):
            dev = oracle.symplectic_check(scat)
            if dev > worst[key]:
                worst[key], where[key] = dev, (w, "")

    def at(key):
        return {"omega": where[key][0], "row": where[key][1]} if key in where else {}

    results = [
        _check("oracle_rows", worst["rows"], ROW_TOL, **at("rows")),
        _check("oracle_rows_with_sideband_dynamics", worst["rows_sb"], ROW_TOL, **at("rows_sb")),
        _check("oracle_combined_rows", worst["comb"], ROW_TOL, **at("comb")),
        _check("oracle_combined_rows_exact_sidebands", worst["comb_sb"], ROW_TOL, **at("comb_sb")),
        _check("oracle_tilde_g_exact", worst["tg"], ROW_TOL, **at("tg")),
        _check("symplectic", worst["symp"], SYMPLECTIC_TOL, **at("symp")),
        _check("symplectic_with_sidebands", worst["symp_sb"], SYMPLECTIC_TOL, **at("symp_sb")),
        _check("back_action_eliminated", worst["ba"], BACK_ACTION_TOL, **at("ba")),
    ]
    results.extend(algebraic_checks(params, grid))
    results.append(sideband_approximation_gap(params, grid))
    return results


def algebraic_checks(params: SystemParams, grid) -> list[CheckResult]:
    grid = np.asarray(grid, dtype=float)
    xi_dev = float(np.max(np.abs(np.abs(xi_factor(params.gamma, grid)) - 1.0)))
    K = normalized_power_K(params, grid)
    even_dev = float(np.max(np.abs(K - normalized_power_K(params, -grid)))) if len(grid) else 0.0
    return [_check("xi_unimodular", xi_dev, 1e-14), _check("K_even", even_dev, 0.0)]


def sideband_approximation_gap(params: SystemParams, grid) -> CheckResult:
    """Relative gap between exact and resolved-sideband parasitic terms vs its leading-order bound."""
    grid = np.asarray(grid, dtype=float)
    exact = sidebands._tilde_noise_factor(params, grid, True)
    approx = sidebands._tilde_noise_factor(params, grid, False)
    gap = np.abs(exact / approx - 1.0)
    bound = 2 * (params.gamma ** 2 + 3 * grid ** 2) / (4 * params.omega_m ** 2)
    ratio = float(np.max(gap / bound))
    return _check("sideband_approximation_gap", ratio, 1.0, max_gap=float(np.max(gap)),
                  max_bound=float(np.max(bound)))


def all_passed(results) -> bool:
    return all(r.passed for r in results)


def canonical_grid(params: SystemParams, n: int = 41) -> np.ndarray:
    """Grid spanning the mechanical line and part of the optical line, including Omega = 0."""
    inner = np.linspace(-20 * params.gamma_m, 20 * params.gamma_m, n)
    outer = np.array([-0.5, -0.1, 0.1, 0.5]) * params.gamma
    return np.unique(np.concatenate([inner, outer, [0.0]]))

