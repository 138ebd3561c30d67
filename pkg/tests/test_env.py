"""System-model unit tests: task generation, channel, delay/energy/QoS,
switching cost, state bookkeeping, feasibility checks."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mecsim import env
from mecsim.config import GB, KB, SystemConfig, dbm_to_watt
from mecsim.env import (LOCAL, OffRaDecision, SmallState, check_feasibility,
                        channel_gain, evaluate, evaluate_slot, local_qos,
                        sample_task_batch, switching_cost, update_small_state,
                        uplink_rate, zipf_pmf)
from mecsim.rng import stream

from conftest import batch_of, make_catalog, make_topology, snr_gain, single_td_topology


class TestUnits:
    def test_kb_gb_convention(self):
        assert KB == 8000.0
        assert GB == 8e9

    def test_noise_power(self):
        assert dbm_to_watt(-114.0) == pytest.approx(3.98e-15, rel=1e-2)

    def test_transmit_power(self):
        assert dbm_to_watt(20.0) == pytest.approx(0.1, rel=1e-12)


class TestTaskGeneration:
    def test_zipf_rank_one_probability(self):
        pmf = zipf_pmf(10, 0.8)
        expected = 1.0 / sum(r ** -0.8 for r in range(1, 11))
        assert pmf[0] == pytest.approx(expected, rel=1e-9)
        assert expected == pytest.approx(0.2805, abs=5e-4)
        assert pmf.sum() == pytest.approx(1.0, abs=1e-12)

    def test_single_type_catalog(self):
        cfg = SystemConfig().replace(F=1, N=50)
        batch = sample_task_batch(make_catalog(cfg), cfg, stream(0, "t"))
        assert np.all(batch.types == 0)

    def test_compute_cycles_from_density(self):
        # 1000 KB at 500 cycles/bit
        batch = batch_of([0], [1000 * KB], [500.0])
        assert batch.comp_cycles[0] == pytest.approx(4e9, rel=1e-12)

    def test_zipf_empirical_frequencies(self):
        cfg = SystemConfig()
        pmf = zipf_pmf(cfg.F, cfg.zipf_s)
        rng = stream(0, "zipf")
        draws = rng.choice(cfg.F, size=1_000_000, p=pmf)
        emp = np.bincount(draws, minlength=cfg.F) / len(draws)
        assert np.max(np.abs(emp - pmf)) < 0.005


class TestChannel:
    def test_unit_distance_unit_fade(self):
        class Stub:
            def exponential(self, scale, size=None):
                return np.ones(size) if size else 1.0

        assert channel_gain(1.0, 2.0, Stub()) == pytest.approx(1.0)

    def test_inverse_square(self):
        class Stub:
            def exponential(self, scale, size=None):
                return np.ones(size) if size else 1.0

        assert channel_gain(10.0, 2.0, Stub()) == pytest.approx(0.01)

    def test_mean_gain_monte_carlo(self):
        rng = stream(0, "mc")
        h = channel_gain(np.full(200_000, 10.0), 2.0, rng)
        assert h.mean() == pytest.approx(0.01, rel=0.01)

    def test_zero_distance_rejected(self):
        with pytest.raises(ValueError):
            channel_gain(0.0, 2.0, stream(0))

    def test_uplink_rate_examples(self):
        assert uplink_rate(1.0, 20e6, 1.0, 1.0, 1.0) == pytest.approx(2e7)
        assert uplink_rate(0.5, 20e6, 3.0, 1.0, 1.0) == pytest.approx(2e7)
        assert uplink_rate(0.0, 20e6, 1.0, 1.0, 1.0) == 0.0


def _one_td_cfg(**over):
    base = dict(N=1, M=2, F=2)
    base.update(over)
    return SystemConfig().replace(**base)


class TestDelayEnergyQos:
    def test_local_case(self):
        cfg = _one_td_cfg()
        topo = single_td_topology(cfg)
        batch = batch_of([0], [8e6], [500.0])  # 4e9 cycles
        dec = OffRaDecision(np.array([LOCAL]), np.zeros(1), np.zeros(1))
        out = evaluate_slot(batch, np.zeros((2, 2)), dec, np.ones(1), topo, cfg)
        assert out.delay[0] == pytest.approx(4.0, rel=1e-9)
        assert out.energy[0] == pytest.approx(20.0, rel=1e-9)

    def test_qos_zero_at_thresholds(self):
        cfg = _one_td_cfg()
        # local task tuned to land exactly on both thresholds
        cycles = cfg.T_th * cfg.F_l
        e = cfg.epsilon * cfg.F_l ** 2 * cycles
        cfg = cfg.replace(E_th=e)
        batch = batch_of([0], [cycles / 500.0], [500.0])
        q = local_qos(batch, cfg)
        assert q[0] == pytest.approx(0.0, abs=1e-9)

    def test_qos_half_at_half_thresholds(self):
        cfg = _one_td_cfg()
        T = np.array([0.5 * cfg.T_th])
        E = np.array([0.5 * cfg.E_th])
        q = (cfg.alpha_w * (cfg.T_th - T) / cfg.T_th
             + cfg.beta_w * (cfg.E_th - E) / cfg.E_th)
        assert q[0] == pytest.approx(0.5, rel=1e-9)

    def test_cloud_case(self):
        cfg = _one_td_cfg(R_back=2e8, F_c=5e9)
        topo = single_td_topology(cfg)
        batch = batch_of([0], [8e6], [500.0])  # 4e9 cycles
        # b=0.5 at SNR 3 gives an uplink of 2e7 bps
        gains = np.array([snr_gain(cfg, 3.0)])
        dec = OffRaDecision(np.array([cfg.M + 1]), np.zeros(1), np.array([0.5]))
        out = evaluate_slot(batch, np.zeros((2, 2)), dec, gains, topo, cfg)
        assert out.delay[0] == pytest.approx(0.4 + 0.04 + 0.8, rel=1e-9)
        assert out.energy[0] == pytest.approx(cfg.p_n * 0.4, rel=1e-9)

    def test_associated_es_case(self):
        cfg = _one_td_cfg()
        topo = single_td_topology(cfg)
        batch = batch_of([0], [8e6], [500.0])
        gains = np.array([snr_gain(cfg, 3.0)])
        cache = np.ones((2, 2))
        dec = OffRaDecision(np.array([1]), np.array([0.5]), np.array([0.5]))
        out = evaluate_slot(batch, cache, dec, gains, topo, cfg)
        t_up = 8e6 / 2e7
        t_comp = 4e9 / (0.5 * cfg.F_m)
        assert out.delay[0] == pytest.approx(t_up + t_comp, rel=1e-9)

    def test_cooperative_es_adds_wired_hop(self):
        cfg = _one_td_cfg()
        topo = single_td_topology(cfg)  # associated with ES 0
        batch = batch_of([0], [8e6], [500.0])
        gains = np.array([snr_gain(cfg, 3.0)])
        cache = np.ones((2, 2))
        assoc = OffRaDecision(np.array([1]), np.array([0.5]), np.array([0.5]))
        coop = OffRaDecision(np.array([2]), np.array([0.5]), np.array([0.5]))
        t_a = evaluate_slot(batch, cache, assoc, gains, topo, cfg).delay[0]
        t_c = evaluate_slot(batch, cache, coop, gains, topo, cfg).delay[0]
        assert t_c == pytest.approx(t_a + 8e6 / cfg.R_co, rel=1e-9)

    def test_offload_energy_is_transmit_only(self):
        cfg = _one_td_cfg()
        topo = single_td_topology(cfg)
        batch = batch_of([0], [8e6], [500.0])
        gains = np.array([snr_gain(cfg, 3.0)])
        dec = OffRaDecision(np.array([1]), np.array([0.5]), np.array([0.5]))
        out = evaluate_slot(batch, np.ones((2, 2)), dec, gains, topo, cfg)
        assert out.energy[0] == pytest.approx(cfg.p_n * (8e6 / 2e7), rel=1e-9)

    @given(f=st.floats(0.1, 1.0), b=st.floats(0.1, 1.0),
           f2=st.floats(0.0, 0.5), b2=st.floats(0.0, 0.5))
    @settings(max_examples=60, deadline=None)
    def test_delay_monotone_in_fractions(self, f, b, f2, b2):
        cfg = _one_td_cfg()
        topo = single_td_topology(cfg)
        batch = batch_of([0], [8e6], [500.0])
        gains = np.array([snr_gain(cfg, 3.0)])
        t_lo, _, _ = evaluate(batch, np.array([1]), np.array([max(f - f2, 1e-6)]),
                              np.array([max(b - b2, 1e-6)]), gains, topo, cfg)
        t_hi, _, _ = evaluate(batch, np.array([1]), np.array([f]),
                              np.array([b]), gains, topo, cfg)
        assert t_hi[0] <= t_lo[0] + 1e-12

    @given(st.integers(0, 3), st.floats(0.05, 1.0), st.floats(0.05, 1.0),
           st.floats(1e5, 5e7), st.integers(0, 10_000))
    @settings(max_examples=80, deadline=None)
    def test_qos_bound_and_sign(self, target, f, b, bits, seed):
        cfg = _one_td_cfg()
        topo = single_td_topology(cfg)
        batch = batch_of([0], [bits], [500.0])
        gains = np.array([snr_gain(cfg, 1.0 + (seed % 50))])
        T, E, Q = evaluate(batch, np.array([target]), np.array([f]),
                           np.array([b]), gains, topo, cfg)
        assert Q[0] <= 1.0 + 1e-12
        exceeded = (T[0] > cfg.T_th) or (E[0] > cfg.E_th)
        if Q[0] < -1e-12:
            assert exceeded

    def test_determinism(self):
        cfg = SystemConfig()
        catalog = make_catalog(cfg)
        topo = make_topology(cfg)
        b1 = sample_task_batch(catalog, cfg, stream(5, "t"))
        b2 = sample_task_batch(catalog, cfg, stream(5, "t"))
        assert np.array_equal(b1.types, b2.types)
        assert np.array_equal(b1.input_bits, b2.input_bits)


class TestSwitchingCost:
    def test_no_change_is_free(self, cfg):
        catalog = make_catalog(cfg)
        c = np.ones((cfg.M, cfg.F))
        assert switching_cost(c, c, catalog, cfg.R_back) == 0.0

    def test_one_added_two_gb(self, cfg):
        catalog = make_catalog(cfg)
        sizes = catalog.cache_sizes.copy()
        sizes[0] = 2 * GB
        catalog = env.ServiceCatalog(sizes, catalog.densities,
                                     catalog.input_min, catalog.input_max)
        c_prev = np.zeros((cfg.M, cfg.F))
        c_new = np.zeros((cfg.M, cfg.F))
        c_new[0, 0] = 1.0
        assert switching_cost(c_prev, c_new, catalog, 2e8) == pytest.approx(80.0)

    def test_evictions_free(self, cfg):
        catalog = make_catalog(cfg)
        c_prev = np.zeros((cfg.M, cfg.F))
        c_prev[0, 1] = 1.0
        c_new = np.zeros((cfg.M, cfg.F))
        c_new[0, 0] = 1.0  # one added, one evicted
        expected = catalog.cache_sizes[0] / cfg.R_back
        assert switching_cost(c_prev, c_new, catalog, cfg.R_back) == pytest.approx(expected)

    @given(st.integers(0, 1000), st.integers(0, 1000))
    @settings(max_examples=40, deadline=None)
    def test_additive_over_added_services(self, s1, s2):
        cfg = SystemConfig()
        catalog = make_catalog(cfg)
        rng1, rng2 = stream(s1, "a"), stream(s2, "b")
        c_prev = (rng1.random((cfg.M, cfg.F)) < 0.5).astype(float)
        c_new = (rng2.random((cfg.M, cfg.F)) < 0.5).astype(float)
        added = (c_new > 0) & (c_prev <= 0)
        expected = (added * catalog.cache_sizes).sum() / cfg.R_back
        assert switching_cost(c_prev, c_new, catalog, cfg.R_back) == pytest.approx(expected)


class TestSmallState:
    def test_offload_accumulation(self):
        cfg = SystemConfig().replace(N=1)
        topo = single_td_topology(cfg)
        batch = batch_of([3], [8e6], np.full(cfg.F, 500.0))
        prev = SmallState.zeros(cfg)
        dec = OffRaDecision(np.array([1]), np.array([0.5]), np.array([0.5]))
        q_local = float(local_qos(batch, cfg)[0])
        out = env.SlotOutcome(np.array([1.0]), np.array([1.0]),
                              np.array([q_local + 0.4]),
                              np.array([True]), np.array([True]))
        cache = np.ones((cfg.M, cfg.F))
        new = update_small_state(prev, batch, dec, out, cache, cfg)
        assert new.g[3] == pytest.approx(0.4, rel=1e-9)
        assert new.p[0, 3] == 1.0
        assert new.p.sum() == 1.0

    def test_all_local_leaves_g_unchanged(self):
        cfg = SystemConfig().replace(N=4)
        topo = single_td_topology(cfg)
        batch = batch_of([0, 1, 2, 3], [8e6] * 4, np.full(cfg.F, 500.0))
        dec = OffRaDecision(np.zeros(4, dtype=int), np.zeros(4), np.zeros(4))
        gains = np.ones(4)
        out = evaluate_slot(batch, np.zeros((cfg.M, cfg.F)), dec, gains, topo, cfg)
        new = update_small_state(SmallState.zeros(cfg), batch, dec, out,
                                 np.zeros((cfg.M, cfg.F)), cfg)
        assert np.allclose(new.g, 0.0)
        assert np.all(new.p == 0.0)

    def test_no_offload_leaves_p_unchanged(self):
        cfg = SystemConfig().replace(N=2)
        batch = batch_of([0, 1], [8e6] * 2, np.full(cfg.F, 500.0))
        dec = OffRaDecision(np.array([0, cfg.M + 1]), np.zeros(2), np.array([0.0, 0.5]))
        out = env.SlotOutcome(np.ones(2), np.ones(2), np.zeros(2),
                              np.ones(2, bool), np.ones(2, bool))
        new = update_small_state(SmallState.zeros(cfg), batch, dec, out,
                                 np.zeros((cfg.M, cfg.F)), cfg)
        assert np.all(new.p == 0.0)


class TestFeasibility:
    def _setup(self):
        cfg = SystemConfig().replace(N=2, M=2, F=2)
        topo = single_td_topology(cfg)
        batch = batch_of([0, 1], [8e6, 8e6], [500.0, 500.0])
        catalog = make_catalog(cfg)
        return cfg, topo, batch, catalog

    def test_all_local_empty_cache_feasible(self):
        cfg, topo, batch, catalog = self._setup()
        dec = OffRaDecision(np.zeros(2, int), np.zeros(2), np.zeros(2))
        assert check_feasibility(np.zeros((2, 2)), dec, batch, topo, catalog, cfg) == []

    def test_uncached_es_target(self):
        cfg, topo, batch, catalog = self._setup()
        dec = OffRaDecision(np.array([1, 0]), np.array([0.5, 0.0]),
                            np.array([0.5, 0.0]))
        got = check_feasibility(np.zeros((2, 2)), dec, batch, topo, catalog, cfg)
        assert "17a" in got

    def test_compute_fraction_overflow(self):
        cfg, topo, batch, catalog = self._setup()
        dec = OffRaDecision(np.array([1, 1]), np.array([0.7, 0.7]),
                            np.array([0.4, 0.4]))
        got = check_feasibility(np.ones((2, 2)), dec, batch, topo, catalog, cfg)
        assert got == ["17e"]

    def test_bandwidth_on_local(self):
        cfg, topo, batch, catalog = self._setup()
        dec = OffRaDecision(np.zeros(2, int), np.zeros(2), np.array([0.1, 0.0]))
        got = check_feasibility(np.zeros((2, 2)), dec, batch, topo, catalog, cfg)
        assert got == ["17b"]

    def test_cache_capacity_violation(self):
        cfg, topo, batch, catalog = self._setup()
        cfg2 = cfg.replace(C_m=1.0)
        dec = OffRaDecision(np.zeros(2, int), np.zeros(2), np.zeros(2))
        got = check_feasibility(np.ones((2, 2)), dec, batch, topo, catalog, cfg2)
        assert got == ["17d"]

    def test_structural_error_raised_with_catalog(self):
        cfg, topo, batch, catalog = self._setup()
        dec = OffRaDecision(np.array([1, 0]), np.array([0.5, 0.0]),
                            np.array([0.5, 0.0]))
        with pytest.raises(env.StructuralInfeasibility) as exc:
            evaluate_slot(batch, np.zeros((2, 2)), dec, np.ones(2), topo, cfg,
                          catalog=catalog)
        assert exc.value.constraint == "17a"
