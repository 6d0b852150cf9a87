import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dichromatic import oracle
from dichromatic.model import SystemParams, normalized_power_K
from dichromatic.spectra import (
    CHANNELS,
    MAIN_CHANNELS,
    ForceSpectrum,
    StrategyKind,
    StrategySpec,
    TransferRow,
    back_action_kernel,
    combined_amplitude_row,
    combined_phase_row,
    detection_threshold,
    force_referred_psd,
    frequency_grid,
    generalized_combined_row,
    generalized_pair,
    row_psd,
    sf_combined,
    sf_raw,
    sf_sql,
    strategy_row,
    strategy_sf,
    thermal_floor,
    transfer_amplitude,
    transfer_phase,
)

from .conftest import GAMMA, GAMMA_M

OMEGAS = [0.0, 30.0, GAMMA_M, -7 * GAMMA_M, 0.3 * GAMMA]


def at_power(params, w, K):
    return params.with_K0(K * (params.gamma ** 2 + w ** 2) / params.gamma ** 2)


class TestRowsAgainstSolver:
    @pytest.mark.parametrize("w", OMEGAS)
    @pytest.mark.parametrize("sidebands", [False, True])
    def test_amplitude_and_phase_rows(self, strong, w, sidebands):
        scat = oracle.scattering(strong, w, include_sidebands=sidebands)
        a_plus, a_minus = transfer_amplitude(strong, w)
        p_minus, p_plus = transfer_phase(strong, w)
        for row in (a_plus, a_minus, p_minus, p_plus):
            # sideband dynamics add tilde-channel terms only
            assert oracle.relative_row_error(row, scat.row(row.label), MAIN_CHANNELS) <= 1e-10

    @pytest.mark.parametrize("w", OMEGAS)
    def test_combined_rows_back_action_free(self, strong, w):
        scat = oracle.scattering(strong, w)
        kern = complex(back_action_kernel(strong, w))
        ref_a = scat.combination({"beta_a-": 1, "beta_a+": kern})
        ref_p = scat.combination({"beta_phi+": 1, "beta_phi-": kern})
        assert oracle.relative_row_error(combined_amplitude_row(strong, w), ref_a) <= 1e-10
        assert oracle.relative_row_error(combined_phase_row(strong, w), ref_p) <= 1e-10
        raw = abs(scat.row("beta_a-")["alpha_a+"])
        assert abs(ref_a["alpha_a+"]) <= 1e-12 * raw
        assert combined_amplitude_row(strong, w)["alpha_a+"] == 0


class TestClosedForms:
    @pytest.mark.parametrize("w", OMEGAS)
    @pytest.mark.parametrize("K", [0.1 * GAMMA_M, GAMMA_M, 100 * GAMMA_M])
    def test_raw_and_combined_match_rows(self, canonical, w, K):
        p = at_power(canonical, w, K)
        raw = force_referred_psd(strategy_row(p, w, StrategySpec("raw_minus_amplitude")), p)
        comb = force_referred_psd(strategy_row(p, w, StrategySpec("combined_amplitude")), p)
        assert raw == pytest.approx(float(sf_raw(canonical, w, K)), rel=1e-12)
        assert comb == pytest.approx(float(sf_combined(canonical, w, K)), rel=1e-12)
        ph = force_referred_psd(strategy_row(p, w, StrategySpec("phase_plus")), p)
        assert ph == pytest.approx(raw, rel=1e-12)

    def test_solver_psd_matches_closed_form(self, strong):
        for w in OMEGAS:
            scat = oracle.scattering(strong, w)
            _, sf = oracle.output_psd(scat, strong, "beta_a-")
            assert sf == pytest.approx(float(sf_raw(strong, w)), rel=1e-10)

    def test_thermal_floor(self):
        p = SystemParams.canonical(n_T=3.0, thermal_on=True)
        assert thermal_floor(p) == pytest.approx(2 * GAMMA_M * 7.0, rel=1e-15)
        assert thermal_floor(p.replace(thermal_on=False)) == 0.0
        K = 5 * GAMMA_M
        sf = force_referred_psd(strategy_row(at_power(p, 0.0, K), 0.0, StrategySpec("raw_minus_amplitude")),
                                at_power(p, 0.0, K))
        assert sf == pytest.approx(float(sf_raw(p, 0.0, K)), rel=1e-12)

    def test_combined_over_sql_at_hundredfold_power(self, canonical):
        # gamma_m^2 / (100 gamma_m) divided by 2 gamma_m
        assert sf_combined(canonical, 0.0, 100 * GAMMA_M) / sf_sql(canonical, 0.0) == pytest.approx(0.005, rel=1e-14)

    @settings(max_examples=200)
    @given(st.floats(-1e5, 1e5), st.floats(1e-3, 1e8))
    def test_raw_never_below_sql(self, w, K):
        p = SystemParams.canonical()
        assert sf_raw(p, w, K) >= sf_sql(p, w) * (1 - 1e-14)

    @settings(max_examples=100)
    @given(st.floats(-1e5, 1e5), st.floats(1e-3, 1e8))
    def test_combined_decreases_with_power(self, w, K):
        p = SystemParams.canonical()
        assert sf_combined(p, w, 2 * K) < sf_combined(p, w, K)

    def test_zero_power_rejected(self, canonical):
        with pytest.raises(ValueError):
            sf_raw(canonical, 0.0, 0.0)
        with pytest.raises(ValueError):
            sf_combined(canonical.with_K0(0.0), 0.0)

    def test_vectorized(self, canonical):
        w = np.linspace(-1e3, 1e3, 7)
        out = sf_raw(canonical, w)
        assert out.shape == w.shape
        assert np.allclose(out, [float(sf_raw(canonical, x)) for x in w], rtol=1e-15)


class TestGeneralizedPair:
    @pytest.mark.parametrize("w", OMEGAS)
    def test_zero_angle_is_amplitude_pair(self, strong, w):
        total, diff = generalized_pair(strong, w, 0.0)
        a_plus, a_minus = transfer_amplitude(strong, w)
        assert oracle.relative_row_error(total, a_plus) == 0
        assert oracle.relative_row_error(diff, a_minus) == 0

    @pytest.mark.parametrize("v", [0.3, 1.1, math.pi / 2, 2.5])
    def test_combination_removes_back_action(self, strong, v):
        for w in OMEGAS:
            scat = oracle.scattering(strong, w)
            total, diff = generalized_pair(strong, w, v)
            assert total["f_a"] == 0 and total["f_phi"] == 0
            # solver view of the rotated pair
            c, s = math.cos(v), math.sin(v)
            ref = scat.combination({"beta_a-": c, "beta_phi+": s,
                                    "beta_a+": c * complex(back_action_kernel(strong, w)),
                                    "beta_phi-": s * complex(back_action_kernel(strong, w))})
            row = generalized_combined_row(strong, w, v)
            assert oracle.relative_row_error(row, ref) <= 1e-10
            assert abs(ref["alpha_a+"]) + abs(ref["alpha_phi-"]) <= 1e-12 * abs(scat.row("beta_a-")["alpha_a+"])

    def test_combined_generalized_is_shot_limited(self, strong):
        for w in OMEGAS:
            sf = strategy_sf(strong, w, StrategySpec("generalized_pair", 0.7))
            assert sf == pytest.approx(float(sf_combined(strong, w)), rel=1e-12)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            StrategySpec("generalized_pair")
        with pytest.raises(ValueError):
            StrategySpec("raw_minus_amplitude", 0.2)
        assert StrategySpec("phase_plus").kind is StrategyKind.PHASE_PLUS


class TestMisc:
    def test_threshold(self):
        assert detection_threshold(4.0, 0.25) == pytest.approx(4.0, rel=1e-15)
        with pytest.raises(ValueError):
            detection_threshold(1.0, 0.0)

    def test_grid(self, canonical):
        g = frequency_grid(canonical, 11)
        assert len(g) == 11 and g[0] == -g[-1]
        assert np.all(frequency_grid(canonical, 5, "log") > 0)
        with pytest.raises(ValueError):
            frequency_grid(canonical, 0)
        with pytest.raises(ValueError):
            frequency_grid(canonical, 5, "cubic")

    def test_force_spectrum_validation(self):
        with pytest.raises(ValueError):
            ForceSpectrum(np.array([1.0, 0.5]), {}, np.ones(2))
        with pytest.raises(ValueError):
            ForceSpectrum(np.array([0.0, 1.0]), {"x": [1.0, -1.0]}, np.ones(2))

    def test_row_arithmetic(self):
        a = TransferRow(1.0, {"alpha_a+": 1 + 1j}, "a")
        b = TransferRow(1.0, {"alpha_a-": 2.0}, "b")
        c = a.plus(b, 0.5)
        assert c["alpha_a+"] == 1 + 1j and c["alpha_a-"] == 1.0 and c["q_a"] == 0
        assert c.vector(CHANNELS).shape == (len(CHANNELS),)
        with pytest.raises(ValueError):
            a.plus(TransferRow(2.0, {}, "x"))

    def test_row_without_signal_cannot_be_referred(self, strong):
        with pytest.raises(ValueError):
            force_referred_psd(transfer_amplitude(strong, 0.0)[0], strong)

    def test_row_psd_counts_vacuum(self, strong):
        plus, _ = transfer_amplitude(strong, 123.0)
        assert row_psd(plus, strong) == pytest.approx(1.0, rel=1e-15)
        assert normalized_power_K(strong, 0.0) == pytest.approx(100 * GAMMA_M)
