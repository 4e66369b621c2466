import dataclasses

import numpy as np
import pytest

from oracles import brute_force_prefix
from pilotsim import (NetworkConfig, NetworkRealization, PathLossParams,
                      PilotAssignment, associate_aps, compute_lsfc,
                      generate_drop, group_strong_ues, noise_power_dbm,
                      normalize_powers)

# hand-computed three-slope values (defaults: 140.7 dB, d0=10 m, d1=50 m,
# exponents 0 / 2 / 3.5), shadow 0
FROZEN_LSFC = {
    1.0: 7.612810046625335e-09,
    5.0: 7.612810046625335e-09,   # clamped region is flat
    10.0: 7.612810046625335e-09,
    30.0: 8.458677829583698e-10,
    50.0: 3.045124018650135e-10,
    100.0: 2.6915348039269248e-11,
    500.0: 9.62952765661948e-14,
    1414.0: 2.531786424786943e-15,
}


class TestPathLoss:
    def test_frozen_values(self):
        for d, beta in FROZEN_LSFC.items():
            assert compute_lsfc(d) == pytest.approx(beta, rel=1e-12)

    def test_continuity_at_breakpoints(self):
        for bp in (10.0, 50.0):
            below = compute_lsfc(bp * (1 - 1e-12))
            above = compute_lsfc(bp * (1 + 1e-12))
            assert below == pytest.approx(above, rel=1e-9)

    def test_minimum_distance_clamp(self):
        assert compute_lsfc(0.0) == compute_lsfc(1.0) == compute_lsfc(0.5)

    def test_far_slope_doubling(self):
        # beyond d1 a doubled distance costs 10 * 3.5 * log10(2) dB
        assert compute_lsfc(200.0) / compute_lsfc(400.0) == pytest.approx(
            2.0 ** 3.5, rel=1e-12)

    def test_shadow_db_offset(self):
        assert compute_lsfc(100.0, 8.0) / compute_lsfc(100.0, 0.0) == pytest.approx(
            10.0 ** 0.8, rel=1e-12)

    def test_shadow_only_beyond_d1(self):
        assert compute_lsfc(30.0, 8.0) == compute_lsfc(30.0, 0.0)
        assert compute_lsfc(51.0, 8.0) > compute_lsfc(51.0, 0.0)

    def test_array_input(self):
        d = np.array([1.0, 30.0, 500.0])
        out = compute_lsfc(d)
        assert out.shape == (3,)
        assert out[2] == pytest.approx(FROZEN_LSFC[500.0], rel=1e-12)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            PathLossParams(d0_m=60.0, d1_m=50.0)


class TestPowers:
    def test_frozen_normalization(self):
        # B = 20 MHz, NF = 9 dB -> noise -91.99 dBm; 100 mW -> ~10^11.199
        assert noise_power_dbm(20e6, 9.0) == pytest.approx(-91.98970004336019,
                                                           abs=1e-12)
        cfg = NetworkConfig()
        p = normalize_powers(cfg)
        assert np.all(p.p_pilot == p.p_pilot[0])
        assert np.array_equal(p.p_pilot, p.p_uplink)
        assert p.p_pilot[0] == pytest.approx(158113883008.41895, rel=1e-12)

    def test_tx_power_linearity(self):
        base = normalize_powers(NetworkConfig()).p_pilot[0]
        doubled = normalize_powers(NetworkConfig(tx_power_mw=200.0)).p_pilot[0]
        assert doubled == pytest.approx(2.0 * base, rel=1e-12)

    def test_bandwidth_scaling(self):
        base = normalize_powers(NetworkConfig()).p_pilot[0]
        quad = normalize_powers(NetworkConfig(bandwidth_hz=80e6)).p_pilot[0]
        assert quad == pytest.approx(base / 4.0, rel=1e-12)


class TestGenerateDrop:
    def test_minimal_instance(self):
        cfg = NetworkConfig(num_aps=1, num_ues=1)
        real = generate_drop(cfg, 3)
        assert real.beta.shape == (1, 1)
        assert real.beta[0, 0] > 0

    def test_determinism(self):
        cfg = NetworkConfig(num_aps=10, num_ues=8)
        a, b = generate_drop(cfg, 99), generate_drop(cfg, 99)
        assert np.array_equal(a.beta, b.beta)
        assert np.array_equal(a.ap_positions, b.ap_positions)
        assert np.array_equal(a.ue_positions, b.ue_positions)
        c = generate_drop(cfg, 100)
        assert not np.array_equal(a.beta, c.beta)

    def test_ue_append_prefix_stability(self):
        # appending UEs must not disturb the existing columns of beta
        small = generate_drop(NetworkConfig(num_aps=12, num_ues=20), 5)
        big = generate_drop(NetworkConfig(num_aps=12, num_ues=27), 5)
        assert np.array_equal(small.beta, big.beta[:, :20])
        assert np.array_equal(small.ue_positions, big.ue_positions[:20])

    def test_beta_positive_finite_many_drops(self):
        cfg = NetworkConfig(num_aps=3, num_ues=2)
        for seed in range(10_000):
            beta = generate_drop(cfg, seed).beta
            assert np.all(beta > 0) and np.all(np.isfinite(beta))

    def test_wrap_around_shortens_paths(self):
        plain = generate_drop(NetworkConfig(num_aps=8, num_ues=6), 1)
        wrapped = generate_drop(NetworkConfig(num_aps=8, num_ues=6,
                                              wrap_around=True), 1)
        assert np.all(wrapped.beta >= plain.beta)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            NetworkConfig(antennas_per_ap=7, pilot_length=7)  # needs A > Lp
        with pytest.raises(ValueError):
            NetworkConfig(pilot_length=300, coherence_block=200)
        with pytest.raises(ValueError):
            NetworkConfig(assoc_threshold=0.0)
        with pytest.raises(ValueError):
            NetworkConfig(area_side_m=float("nan"))

    def test_realization_validation(self):
        with pytest.raises(ValueError):
            NetworkRealization(np.zeros((2, 2)), np.zeros((3, 2)),
                               np.ones((2, 2)), 0)  # beta must be 2x3
        with pytest.raises(ValueError):
            NetworkRealization(np.zeros((1, 2)), np.zeros((1, 2)),
                               np.array([[-1.0]]), 0)


def _column_real(column):
    column = np.asarray(column, dtype=float)
    m = column.size
    return NetworkRealization(np.zeros((m, 2)), np.zeros((1, 2)),
                              column[:, None], 0)


class TestAssociation:
    def test_simple_prefix(self):
        assoc = associate_aps(_column_real([0.5, 0.3, 0.2]), 0.7)
        assert assoc.serving_aps[0].tolist() == [0, 1]

    def test_full_threshold_takes_all(self):
        assoc = associate_aps(_column_real([0.5, 0.3, 0.2]), 1.0)
        assert sorted(assoc.serving_aps[0].tolist()) == [0, 1, 2]

    def test_matches_brute_force(self, rng):
        for _ in range(200):
            column = 10.0 ** rng.uniform(-14.0, -8.0, size=10)
            assoc = associate_aps(_column_real(column), 0.95)
            assert set(assoc.serving_aps[0].tolist()) == brute_force_prefix(
                column, 0.95)

    def test_threshold_monotonicity(self, rng):
        for _ in range(50):
            column = 10.0 ** rng.uniform(-14.0, -8.0, size=12)
            real = _column_real(column)
            lo = set(associate_aps(real, 0.8).serving_aps[0].tolist())
            hi = set(associate_aps(real, 0.97).serving_aps[0].tolist())
            assert lo <= hi

    def test_prefix_property_and_order(self, desk_drop):
        _, real, _, assoc = desk_drop()
        for t in range(real.num_ues):
            chosen = assoc.serving_aps[t]
            inside = real.beta[chosen, t]
            assert np.all(np.diff(inside) <= 0)  # descending
            outside = np.delete(real.beta[:, t], chosen)
            if outside.size:
                assert inside.min() >= outside.max()

    def test_serves_biconditional(self, desk_drop):
        _, real, _, assoc = desk_drop()
        rebuilt = np.zeros_like(assoc.serves)
        for t, aps in enumerate(assoc.serving_aps):
            rebuilt[aps, t] = True
        assert np.array_equal(rebuilt, assoc.serves)
        for m, ues in enumerate(assoc.served_ues):
            assert np.array_equal(np.flatnonzero(assoc.serves[m]), ues)


class TestStrongGrouping:
    def _instance(self, beta_row, pilots, nu, lp=None):
        m = 1
        beta = np.asarray(beta_row, dtype=float)[None, :]
        real = NetworkRealization(np.zeros((m, 2)),
                                  np.zeros((beta.shape[1], 2)), beta, 0)
        assoc = associate_aps(real, 1.0)
        lp = lp if lp is not None else max(pilots) + 1
        return real, assoc, PilotAssignment(np.asarray(pilots), lp)

    def test_full_threshold_takes_everyone(self):
        real, assoc, asg = self._instance([0.4, 0.3, 0.2], [0, 1, 0], 1.0)
        grouped = group_strong_ues(real, assoc, 1.0, asg)
        assert grouped.strong_ues[0].tolist() == [0, 1, 2]

    def test_singleton_served_set(self):
        real, assoc, asg = self._instance([0.4], [0], 0.5)
        grouped = group_strong_ues(real, assoc, 0.5, asg)
        assert grouped.strong_ues[0].tolist() == [0]
        assert grouped.strong_pilot_count[0] == 1

    def test_distinct_pilot_count(self):
        # five served UEs on three distinct pilots, all strong
        real, assoc, asg = self._instance([0.5, 0.4, 0.3, 0.2, 0.1],
                                          [0, 1, 2, 0, 1], 1.0)
        grouped = group_strong_ues(real, assoc, 1.0, asg)
        assert grouped.strong_pilot_count[0] == 3
        assert grouped.strong_flag[0].all()

    def test_bounds_on_random_drops(self, desk_drop, rng):
        cfg, real, _, assoc = desk_drop()
        asg = PilotAssignment(rng.integers(0, cfg.pilot_length, cfg.num_ues),
                              cfg.pilot_length)
        grouped = group_strong_ues(real, assoc, cfg.strong_threshold, asg,
                                   cfg.antennas_per_ap)
        for m in range(cfg.num_aps):
            ls = grouped.strong_pilot_count[m]
            assert ls <= min(len(grouped.strong_ues[m]), cfg.pilot_length)
            assert ls < cfg.antennas_per_ap
            assert set(grouped.strong_ues[m]) <= set(grouped.served_ues[m])

    def test_rejects_unassigned(self):
        real, assoc, _ = self._instance([0.4, 0.3], [0, 1], 1.0)
        partial = PilotAssignment(np.array([0, -1]), 2)
        with pytest.raises(ValueError):
            group_strong_ues(real, assoc, 0.9, partial)


def test_config_is_frozen():
    cfg = NetworkConfig()
    with pytest.raises(dataclasses.FrozenInstanceError):
        cfg.num_aps = 5
