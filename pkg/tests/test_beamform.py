import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st
from numpy.random import default_rng
from scipy.optimize import minimize

from dyncache.beamform import (aggregate_rate, draw_channels, dual_fixed_point, maxmin_solve, nocc_rate,
                               nocc_schedule, sinr, symmetric_rate, trial_rate, visibility, zf_precoders)
from dyncache.errors import RankDeficiency
from dyncache.experiments import example_network, rate_curve
from dyncache.scheduler import Stream, Transmission, TxKind, full_schedule

TOL = 1e-4
RATE_SEED = 0


def unicast(users):
    """Every stream interferes with every other user."""
    users = tuple(users)
    streams = tuple(Stream(k, (), 1, frozenset(users) - {k}, 0) for k in users)
    return Transmission(TxKind.UC, (1,), 1, streams)


def min_sinr_rate(H, W, N0):
    G = np.abs(H.conj() @ W.T) ** 2
    signal = np.diag(G)
    interference = G.sum(axis=1) - signal
    return float(np.log2(1.0 + signal / (interference + N0)).min())


@pytest.fixture(scope="module")
def first_cc():
    cfg, assoc = example_network(1)
    tx = full_schedule(cfg, assoc).transmissions[0]
    return cfg, tx


class TestChannels:

    def test_seeded_draws_repeat(self):
        a = draw_channels([3, 1, 2], 4, seed=7)
        b = draw_channels([1, 2, 3], 4, seed=7)
        for k in (1, 2, 3):
            np.testing.assert_array_equal(a.h[k], b.h[k])

    def test_unit_variance(self):
        channels = draw_channels(range(4000), 2, seed=1)
        power = np.mean([np.sum(np.abs(h) ** 2) for h in channels.h.values()])
        assert power == pytest.approx(2.0, rel=0.05)


class TestVisibility:

    def test_cached_minifile_is_invisible(self, first_cc):
        _, tx = first_cc
        vis = visibility(tx)
        index = {s.user: i for i, s in enumerate(tx.streams)}
        # user 1 carries lam (2,), cached by profile 2 (users 6..9)
        assert not vis[index[6], index[1]]
        assert vis[index[2], index[1]]
        assert not vis.diagonal().any()

    def test_unicast_sees_everything(self):
        vis = visibility(unicast([1, 2, 3]))
        assert vis.sum() == 6


class TestMaxMin:

    def test_single_user_closed_form(self):
        tx = unicast([5])
        channels = draw_channels([5], 4, seed=3)
        solution = maxmin_solve(tx, channels, P_T=10.0, N0=0.5)
        expected = math.log2(1.0 + 10.0 * np.linalg.norm(channels.h[5]) ** 2 / 0.5)
        assert solution.min_rate == pytest.approx(expected, abs=1e-6)
        assert solution.total_power == pytest.approx(10.0)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4), st.sampled_from([1.0, 10.0, 100.0]))
    def test_equal_rates_and_full_power(self, seed, n, P_T):
        tx = unicast(range(1, n + 1))
        channels = draw_channels(range(1, n + 1), 4, seed=seed)
        solution = maxmin_solve(tx, channels, P_T=P_T, N0=1.0, tol=TOL)
        assert np.ptp(solution.rates) <= 10 * TOL
        assert solution.min_rate == pytest.approx(solution.target_rate, abs=10 * TOL)
        assert solution.total_power <= P_T * (1 + 1e-9)
        assert solution.total_power >= P_T * (1 - 10 * TOL)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4))
    def test_beats_zero_forcing(self, seed, n):
        tx = unicast(range(1, n + 1))
        channels = draw_channels(range(1, n + 1), 4, seed=seed)
        optimised = maxmin_solve(tx, channels, P_T=10.0, N0=1.0, tol=TOL)
        zf = zf_precoders(tx, channels, P_T=10.0, N0=1.0)
        assert optimised.min_rate >= zf.min_rate - 1e-3

    def test_cache_aided_transmission(self, first_cc):
        cfg, tx = first_cc
        channels = draw_channels(tx.served_users, cfg.num_antennas, seed=11)
        solution = maxmin_solve(tx, channels, cfg.tx_power, cfg.noise_power, tol=TOL)
        zf = zf_precoders(tx, channels, cfg.tx_power, cfg.noise_power)
        assert solution.min_rate >= zf.min_rate - 1e-3
        assert np.ptp(solution.rates) <= 10 * TOL
        k = tx.streams[0].user
        assert sinr(k, solution, channels, tx, cfg.noise_power) == pytest.approx(solution.sinrs[0])

    def test_weights_scale_rates(self):
        tx = unicast([1, 2])
        channels = draw_channels([1, 2], 4, seed=5)
        solution = maxmin_solve(tx, channels, P_T=10.0, N0=1.0, mu=[1.0, 2.0])
        assert solution.rates[0] == pytest.approx(2 * solution.rates[1], abs=10 * TOL)
        assert solution.min_weighted_rate == pytest.approx(solution.target_rate, abs=10 * TOL)

    def test_rate_grows_with_power(self):
        tx = unicast([1, 2, 3])
        channels = draw_channels([1, 2, 3], 3, seed=2)
        rates = [maxmin_solve(tx, channels, P_T=p, N0=1.0).min_rate for p in (1.0, 10.0, 100.0, 1000.0)]
        assert rates == sorted(rates)
        assert rates[0] < rates[-1]

    @pytest.mark.parametrize("seed", range(5))
    def test_two_user_search(self, seed):
        P_T, N0 = 4.0, 1.0
        tx = unicast([1, 2])
        channels = draw_channels([1, 2], 2, seed=seed)
        H = channels.matrix([1, 2])

        def beams(x):
            share = 1.0 / (1.0 + math.exp(-x[4]))
            W = np.empty((2, 2), dtype=complex)
            for i, (theta, phase, p) in enumerate(((x[0], x[1], share), (x[2], x[3], 1.0 - share))):
                W[i] = math.sqrt(P_T * p) * np.array([math.cos(theta), np.exp(1j * phase) * math.sin(theta)])
            return W

        rng = default_rng(seed)
        starts = [rng.uniform(-math.pi, math.pi, 5) for _ in range(30)]
        best = max(-minimize(lambda x: -min_sinr_rate(H, beams(x), N0), x0, method="Nelder-Mead",
                             options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 4000}).fun
                   for x0 in starts)
        solved = maxmin_solve(tx, channels, P_T=P_T, N0=N0, tol=TOL).min_rate
        assert solved == pytest.approx(best, abs=1e-2)


class TestFixedPoint:

    def test_steps_shrink(self):
        rng = default_rng(4)
        G = (rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))) / math.sqrt(2)
        couple = np.ones((3, 3), dtype=bool)
        fp = dual_fixed_point(G, couple, np.full(3, 1.0), np.full(3, 0.01), tol=1e-8)
        assert fp.converged
        assert fp.trace[-1] < fp.trace[0]
        assert np.all(fp.lam > 0)

    def test_unreachable_target_diverges(self):
        G = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]], dtype=complex)
        couple = np.ones((3, 3), dtype=bool)
        fp = dual_fixed_point(G, couple, np.full(3, 50.0), np.full(3, 1.0), ceiling=1e8)
        assert not fp.converged


class TestZeroForcing:

    def test_nulls_every_listed_user(self, first_cc):
        cfg, tx = first_cc
        channels = draw_channels(tx.served_users, cfg.num_antennas, seed=9)
        solution = zf_precoders(tx, channels, cfg.tx_power, cfg.noise_power)
        for s, w in zip(tx.streams, solution.w):
            assert s.nulling_set
            leak = channels.matrix(sorted(s.nulling_set)).conj() @ w
            np.testing.assert_allclose(np.abs(leak), 0.0, atol=1e-10)
        assert solution.total_power == pytest.approx(cfg.tx_power)

    def test_too_many_users_to_null(self):
        with pytest.raises(RankDeficiency):
            zf_precoders(unicast([1, 2, 3]), draw_channels([1, 2, 3], 2, seed=0), P_T=1.0)


class TestSymmetricRate:

    def test_aggregate_rate(self):
        assert aggregate_rate([1.0, 1.0], 2) == pytest.approx(1.0)
        assert aggregate_rate([2.0, 0.0], 2) == 0.0
        assert aggregate_rate([], 2) == 0.0

    @given(st.lists(st.floats(0.1, 10.0), min_size=1, max_size=8), st.floats(0.1, 10.0), st.integers(1, 50))
    def test_aggregate_is_homogeneous(self, rates, c, mu):
        scaled = aggregate_rate([c * r for r in rates], mu)
        assert scaled == pytest.approx(c * aggregate_rate(rates, mu), rel=1e-9)

    def test_trial_is_reproducible(self):
        cfg, assoc = example_network(1)
        schedule = full_schedule(cfg, assoc)
        assert trial_rate(schedule, cfg, 3, 0) == trial_rate(schedule, cfg, 3, 0)
        assert trial_rate(schedule, cfg, 3, 0) != trial_rate(schedule, cfg, 3, 1)

    def test_thread_count_does_not_change_results(self, monkeypatch):
        cfg, assoc = example_network(1)
        schedule = full_schedule(cfg, assoc)
        monkeypatch.setenv("DYNCACHE_THREADS", "1")
        serial = symmetric_rate(schedule, cfg, trials=4, seed=2)
        monkeypatch.setenv("DYNCACHE_THREADS", "4")
        threaded = symmetric_rate(schedule, cfg, trials=4, seed=2)
        assert serial.per_trial == threaded.per_trial
        assert serial.trials == 4 and serial.stderr > 0

    def test_unicast_baseline_rate(self):
        cfg, assoc = example_network(1)
        plain = nocc_rate(cfg, assoc, trials=3, seed=0)
        assert plain.scheme == "nocc" and plain.trials == 3
        assert plain.mean_rate > 0 and plain.degenerate == 0
        assert plain.row()["snr_db"] == pytest.approx(20.0)

    def test_unicast_schedule_covers_every_user(self):
        cfg, assoc = example_network(1)
        schedule = nocc_schedule(cfg, assoc)
        assert schedule.T_M == 0
        assert {s.user for tx in schedule.transmissions for s in tx.streams} == set(range(1, 13))
        assert Fraction(schedule.J_U, schedule.T_U) == cfg.alpha


@pytest.mark.slow
class TestRateCurves:
    """
    Mean symmetric rate of K=30 users over 5 profiles with gamma=1/5, L=10 and
    alpha=8, averaged over 60 association and channel draws from RATE_SEED.
    Reference means are 2.52 (A) and 1.64 (no-CC) at 20 dB and 4.91 (no-CC)
    at 50 dB. Each draw solves one max-min problem per transmission, so a
    curve costs 60 times the transmissions of its sampled associations.
    """

    def test_twenty_db(self):
        rows = rate_curve(30, 5, Fraction(1, 5), 10, 8, [20.0], trials=60, seed=RATE_SEED)
        means = {row["scheme"]: row["mean_rate"] for row in rows}
        assert means["A"] == pytest.approx(2.52, rel=0.1)
        assert means["nocc"] == pytest.approx(1.64, rel=0.1)

    def test_unicast_at_fifty_db(self):
        rows = rate_curve(30, 5, Fraction(1, 5), 10, 8, [50.0], trials=60, seed=RATE_SEED)
        means = {row["scheme"]: row["mean_rate"] for row in rows}
        assert means["nocc"] == pytest.approx(4.91, rel=0.1)
