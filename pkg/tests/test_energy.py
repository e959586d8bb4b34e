"""Power model and tracking-energy accounting tests."""

import dataclasses

import numpy as np
import pytest

from mmwtrack.energy import (
    PowerProfile,
    energy_event,
    front_end_power,
    p_adc,
    p_rf,
    power_abf,
    power_dbf,
    robust_floor_div,
    total_energy,
)
from mmwtrack.scenario import PowerComponents, ScenarioConfig

ZERO = PowerProfile(
    p_lna=0.0, p_ps=0.0, p_c=0.0, p_m=0.0, p_lo=0.0, p_lpf=0.0,
    p_bb_amp=0.0, c=0.0, b=3, n_ant=16, w_tot=1e9,
)


def profile(**kwargs) -> PowerProfile:
    return dataclasses.replace(ZERO, **kwargs)


class TestPowerFormulas:
    def test_abf_lna_term_scales_with_elements(self):
        p = profile(p_lna=1e-3)
        assert power_abf(p) == pytest.approx(16e-3, rel=1e-12)

    def test_abf_adc_term(self):
        p = profile(c=1e-12)  # P_ADC = 1e-12 * 1e9 * 8 = 8 mW
        assert p_adc(p) == pytest.approx(8e-3, rel=1e-12)
        assert power_abf(p) == pytest.approx(16e-3, rel=1e-12)  # 2 * P_ADC

    def test_dbf_adc_replication(self):
        p = profile(c=1e-12)
        assert power_dbf(p) == pytest.approx(16 * 16e-3, rel=1e-12)
        assert power_dbf(p) / power_abf(p) == pytest.approx(16.0, rel=1e-12)

    def test_single_element_structural_identity(self):
        # with one antenna and no phase shifter/combiner both architectures
        # collapse to LNA + RF chain + 2 ADCs
        p = profile(p_lna=0.01, p_m=0.002, p_lo=0.001, p_lpf=0.003,
                    p_bb_amp=0.004, c=1e-13, n_ant=1)
        assert power_abf(p) == pytest.approx(power_dbf(p), rel=1e-12)

    def test_p_rf_is_component_sum(self):
        assert p_rf(ZERO) == 0.0
        p = profile(p_m=0.0168, p_lo=0.005, p_lpf=0.014, p_bb_amp=0.005)
        assert p_rf(p) == pytest.approx(0.0408, rel=1e-12)

    def test_p_adc_default_value(self):
        p = profile(c=494e-15)
        assert p_adc(p) == pytest.approx(3.952e-3, rel=1e-12)

    def test_p_adc_linear_in_bandwidth(self):
        p1 = profile(c=494e-15, w_tot=1e9)
        p2 = profile(c=494e-15, w_tot=2e9)
        assert p_adc(p2) == pytest.approx(2 * p_adc(p1), rel=1e-12)

    def test_b_bits_multiplier(self):
        p = profile(c=1e-12, b=3)
        assert p_adc(p) / (1e-12 * 1e9) == pytest.approx(8.0, rel=1e-12)

    def test_default_profile_hand_computed(self):
        cfg = ScenarioConfig()
        p = PowerProfile.from_config(cfg)
        # 16*(39m + 19.5m) + 40.8m + 19.5m + 2*3.952m
        assert power_abf(p) == pytest.approx(1.004204, rel=1e-12)
        # 16*(39m + 40.8m + 2*3.952m)
        assert power_dbf(p) == pytest.approx(1.403264, rel=1e-12)

    def test_dbf_power_exceeds_abf_for_default_profile(self):
        for n_ant in (4, 16, 64):
            p = dataclasses.replace(PowerProfile.from_config(ScenarioConfig()), n_ant=n_ant)
            assert power_dbf(p) > power_abf(p)

    def test_front_end_dispatch(self):
        p = PowerProfile.from_config(ScenarioConfig())
        assert front_end_power("ABF", p) == power_abf(p)
        assert front_end_power("DBF", p) == power_dbf(p)
        with pytest.raises(ValueError):
            front_end_power("XYZ", p)


def unit_power_cfg(arch: str, **cfg_kwargs) -> ScenarioConfig:
    """Config whose front-end power is exactly 1 W for the given arch."""
    if arch == "ABF":
        comp = PowerComponents(p_lna=0, p_ps=0, p_c=1.0, p_m=0, p_lo=0,
                               p_lpf=0, p_bb_amp=0, c=0.0, b=3)
    else:
        comp = PowerComponents(p_lna=1.0 / 16, p_ps=0, p_c=0, p_m=0, p_lo=0,
                               p_lpf=0, p_bb_amp=0, c=0.0, b=3)
    return ScenarioConfig(bf_arch=arch, power=comp, **cfg_kwargs)


class TestEnergyEvent:
    def test_abf_refresh_at_unit_power(self):
        cfg = unit_power_cfg("ABF")
        assert energy_event("refresh", cfg) == pytest.approx(0.0256, rel=1e-12)

    def test_abf_refinement_k2_at_unit_power(self):
        cfg = unit_power_cfg("ABF", k_ref=2)
        assert energy_event("refinement", cfg) == pytest.approx(0.0096, rel=1e-12)

    def test_dbf_refresh_divided_by_parallelism(self):
        cfg = unit_power_cfg("DBF")
        assert energy_event("refresh", cfg) == pytest.approx(0.0032, rel=1e-12)

    def test_dbf_refinement_divisor_bounded_by_window(self):
        cfg = unit_power_cfg("DBF", k_ref=2)
        # 0.0096 s of scanning split over min(8, 3) = 3 simultaneous beams
        assert energy_event("refinement", cfg) == pytest.approx(0.0032, rel=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            energy_event("scan", ScenarioConfig())


class TestRobustFloor:
    @pytest.mark.parametrize("x,y,want", [
        (1.0, 0.1, 10), (10.0, 0.05, 200), (0.3, 0.01, 30), (0.05, 0.01, 5),
        (10.0, 0.15, 66), (10.0, 0.9, 11), (10.0, 0.3, 33), (0.6, 0.01, 60),
    ])
    def test_grid_values(self, x, y, want):
        assert robust_floor_div(x, y) == want


class TestTotalEnergy:
    def test_scheme_a_counts(self):
        cfg = unit_power_cfg("ABF", scheme="A", t_pr=1.0)
        ledger = total_energy("A", cfg, t_sim=10.0)
        assert ledger.refresh_count == 10
        assert ledger.refinement_count == 0
        assert ledger.total == pytest.approx(10 * 0.0256, rel=1e-12)

    def test_scheme_b_counts(self):
        cfg = unit_power_cfg("ABF", scheme="B", t_pr=1.0, t_ref=0.1, k_ref=2)
        ledger = total_energy("B", cfg, t_sim=10.0)
        assert ledger.refresh_count == 10
        assert ledger.refinement_count == 100  # 10 per interval
        assert ledger.refinement_energy == pytest.approx(100 * 0.0096, rel=1e-12)

    def test_b_exceeds_a_with_refinements(self):
        for tpr in (0.05, 0.1, 0.3, 0.6, 0.9):
            cfg = ScenarioConfig(scheme="B", t_pr=tpr, t_ref=0.01)
            assert total_energy("B", cfg).total > total_energy("A", cfg).total

    def test_ledger_totals_multiply_out(self):
        cfg = ScenarioConfig(scheme="B", t_pr=0.45, t_ref=0.017, k_ref=4)
        ledger = total_energy("B", cfg)
        e_refresh = energy_event("refresh", cfg)
        e_refinement = energy_event("refinement", cfg)
        assert ledger.refresh_energy == pytest.approx(
            ledger.refresh_count * e_refresh, rel=1e-12)
        assert ledger.refinement_energy == pytest.approx(
            ledger.refinement_count * e_refinement, rel=1e-12)

    def test_closed_form_fuzz_against_direct_expressions(self):
        # independent re-evaluation: N_refresh = floor(T_sim/T_PR) refreshes
        # of P_C * minT_PR / L plus N_ref = floor(T_PR/t_ref) refinements of
        # P_C * minT_ref / L per refresh interval
        rng = np.random.default_rng(123)
        for _ in range(1000):
            arch = "ABF" if rng.uniform() < 0.5 else "DBF"
            k_ref = 2 * int(rng.integers(0, 6))
            n_enb_dir = int(rng.integers(4, 24))
            n_ue_dir = int(rng.integers(2, 12))
            t_per = float(rng.uniform(5e-5, 5e-4))
            l_refresh = n_ue_dir if arch == "DBF" else 1
            l_ref = min(n_ue_dir, k_ref + 1) if arch == "DBF" else 1
            min_tpr = t_per * n_enb_dir * n_ue_dir / l_refresh
            min_tref = t_per * n_enb_dir * (k_ref + 1) / l_ref
            t_pr = min_tpr * float(rng.uniform(1.0, 40.0))
            t_ref = min_tref * float(rng.uniform(1.0, max(1.001, 0.9 * t_pr / min_tref)))
            t_sim = float(rng.uniform(1.0, 30.0))
            comp = PowerComponents(
                p_lna=float(rng.uniform(0, 0.1)), p_ps=float(rng.uniform(0, 0.1)),
                p_c=float(rng.uniform(0, 0.1)), p_m=float(rng.uniform(0, 0.1)),
                p_lo=float(rng.uniform(0, 0.1)), p_lpf=float(rng.uniform(0, 0.1)),
                p_bb_amp=float(rng.uniform(0, 0.1)), c=float(rng.uniform(0, 2e-12)),
                b=int(rng.integers(1, 8)),
            )
            cfg = ScenarioConfig(
                bf_arch=arch, k_ref=k_ref, n_enb_dir=n_enb_dir, n_ue_dir=n_ue_dir,
                t_per=t_per, t_sig=t_per * 0.05, t_pr=t_pr, t_ref=t_ref,
                t_sim=t_sim, power=comp,
            )
            p_c = front_end_power(arch, PowerProfile.from_config(cfg))
            n_refresh = robust_floor_div(t_sim, t_pr)
            n_ref = robust_floor_div(t_pr, t_ref)
            expect_a = p_c * (min_tpr / 1.0) * n_refresh
            expect_b = expect_a + p_c * min_tref * n_ref * n_refresh
            got_a = total_energy("A", cfg, t_sim=t_sim).total
            got_b = total_energy("B", cfg, t_sim=t_sim).total
            if expect_a > 0:
                assert abs(got_a - expect_a) <= 1e-12 * expect_a
                assert abs(got_b - expect_b) <= 1e-12 * expect_b

    def test_scheme_a_strictly_decreasing_in_t_pr(self):
        cfg = ScenarioConfig()
        totals = [
            total_energy("A", cfg.replace(t_pr=tpr)).total
            for tpr in (0.05, 0.1, 0.15, 0.3, 0.6, 0.9)
        ]
        assert all(b < a for a, b in zip(totals, totals[1:]))
