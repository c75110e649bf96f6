import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import assume, example, given, settings
import hypothesis.strategies as st

from dyncache.analytics import (arrangements, dof_closed_form, dof_m_average, dof_m_average_at, dof_max_search,
                                dof_terms, eta_hat_sweep, lemma1, nocc_dof, partitions, search_all,
                                sigma_buckets)
from dyncache.errors import ConstraintViolation
from dyncache.model import (Association, NetworkConfig, Strategy, association_from_lengths, design_for,
                            validate_config)
from dyncache.placement import Placement
from dyncache.scheduler import full_schedule
from dyncache.verifier import count_dof, coverage_check, decode_check

from netgen import networks


def uniform_dof(eta_hat, P, Q, strategy, alpha=8, per_profile=6):
    cfg = NetworkConfig.build("1/5", P, alpha, eta_hat, Q=Q, strategy=strategy)
    return dof_closed_form(cfg, Association.uniform(per_profile * P, P, eta_hat, cfg.beta))


class TestLemma1:

    def test_small_cases(self):
        assert lemma1(5, 3) == (10, 10)
        assert lemma1(10, 4) == (210, 210)
        assert lemma1(7, 7) == (1, 1)

    def test_all_up_to_twenty(self):
        for P in range(1, 21):
            for Q in range(1, P + 1):
                lhs, rhs = lemma1(P, Q)
                assert lhs == rhs == math.comb(P, Q)


class TestClosedForm:

    @pytest.mark.parametrize("eta_hat, Q, strategy, dof", [
        (2, 5, "A", 8.5714),
        (3, 3, "A", 8.4375),
        (3, 4, "B", 9.2632),
        (4, 3, "A", 10.2857),
        (5, 2, "A", 8.5714),
        (5, 3, "B", 10.2632),
        (6, 2, "A", 12.0),
        (6, 3, "B", 14.0),
    ])
    def test_uniform_design_curve(self, eta_hat, Q, strategy, dof):
        assert float(uniform_dof(eta_hat, 5, Q, strategy)) == pytest.approx(dof, abs=1e-3)

    def test_uneven_association(self):
        cfg = NetworkConfig.build("1/5", 5, 8, 9, Q=2, strategy="A")
        assoc = association_from_lengths([9, 7, 7, 4, 3], cfg.eta_hat, cfg.beta)
        assert float(dof_closed_form(cfg, assoc)) == pytest.approx(11.4286, abs=1e-3)

    def test_terms_of_strategy_a_example(self):
        cfg = NetworkConfig.build("1/3", 3, 6, 4, beta=3, Q=3, strategy="A")
        terms = dof_terms(cfg, association_from_lengths([5, 4, 3], 4, 3))
        assert (terms.T_M, terms.J_M, terms.T_U, terms.J_U) == (8, 66, 6, 6)
        assert terms.D == (4, 4, 3)
        assert terms.dof == Fraction(36, 7)

    def test_uniform_optimum_grid(self):
        # K_U = 0: alpha <= eta_hat gives alpha(t + 1), otherwise K*gamma + alpha
        checked = 0
        for P in range(2, 7):
            for t in range(1, P):
                for eta_hat in range(1, 6):
                    for alpha in range(1, 9):
                        try:
                            cfg = NetworkConfig.build(Fraction(t, P), P, alpha, eta_hat)
                        except ConstraintViolation:
                            continue
                        assoc = Association.uniform(eta_hat * P, P, eta_hat, cfg.beta)
                        gamma = Fraction(t, P)
                        if alpha <= eta_hat:
                            expected = alpha * (t + 1)
                        else:
                            expected = assoc.K * gamma + alpha
                        assert dof_closed_form(cfg, assoc) == expected, (P, t, eta_hat, alpha)
                        checked += 1
        assert checked >= 50

    @settings(max_examples=100, deadline=None)
    @given(st.integers(2, 6).flatmap(lambda P: st.tuples(
        st.just(P), st.integers(1, P - 1), st.lists(st.integers(1, 6), min_size=P, max_size=P))),
        st.integers(1, 12))
    def test_all_profiles_served(self, params, alpha):
        P, t, lengths = params
        eta_hat = max(lengths)
        assume(alpha >= eta_hat)
        gamma = Fraction(t, P)
        K = sum(lengths)
        for strategy in (Strategy.A, Strategy.B):
            design = design_for(strategy, gamma, alpha, eta_hat, P)
            if design.strategy is not strategy:
                continue
            cfg = validate_config(NetworkConfig(num_antennas=alpha, library_size=gamma.denominator,
                                                cache_files=gamma.numerator, num_profiles=P, alpha=alpha,
                                                eta_hat=eta_hat, beta=design.beta, Q=design.Q,
                                                strategy=strategy))
            dof = dof_closed_form(cfg, association_from_lengths(lengths, eta_hat, cfg.beta))
            if strategy is Strategy.A:
                assert dof == Fraction(K * cfg.Q, P)
            else:
                assert dof == Fraction(K * (eta_hat * t + alpha), P * eta_hat)


class TestOracle:

    @settings(max_examples=200, deadline=None)
    @given(networks("A"))
    def test_strategy_a_counted_equals_closed(self, network):
        self.check(*network)

    @settings(max_examples=200, deadline=None)
    @given(networks("B"))
    def test_strategy_b_counted_equals_closed(self, network):
        self.check(*network)

    @staticmethod
    def check(cfg, assoc):
        schedule = full_schedule(cfg, assoc)
        assert schedule.residual_log == ()
        placement = Placement(cfg, assoc)
        assert decode_check(schedule, placement, assoc).ok
        assert coverage_check(schedule, placement).ok
        assert count_dof(schedule) == dof_closed_form(cfg, assoc)


@pytest.mark.slow
class TestOracleSweep:
    """Longer draws over the full P <= 6, K <= 40 range."""

    @settings(max_examples=750, deadline=None)
    @given(networks("A"))
    def test_strategy_a(self, network):
        TestOracle.check(*network)

    @settings(max_examples=750, deadline=None)
    @given(networks("B"))
    def test_strategy_b(self, network):
        TestOracle.check(*network)


class TestSearch:

    def test_nocc(self):
        assert nocc_dof(30, 8) == 8
        assert nocc_dof(3, 8) == 3

    def test_single_profile_falls_back_to_unicast(self):
        best = dof_max_search(association_from_lengths([30, 0, 0, 0, 0], 30, 1), 8, Fraction(1, 5))
        assert best.dof == 8

    def test_uniform_best_design(self):
        best = dof_max_search(Association.uniform(30, 5), 8, Fraction(1, 5))
        assert best.dof == 14
        assert (best.eta_hat, best.Q, best.strategy) == (6, 3, Strategy.B)
        assert not best.fallback

    def test_sweep_lists_every_feasible_design(self):
        rows = eta_hat_sweep(Association.uniform(30, 5), 8, Fraction(1, 5))
        assert {(r.eta_hat, r.Q, r.strategy) for r in rows} >= {(4, 3, Strategy.A), (6, 3, Strategy.B)}
        assert all(r.eta_hat <= 6 for r in rows)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(2, 5).flatmap(lambda P: st.tuples(
        st.just(P), st.integers(1, P - 1), st.lists(st.integers(0, 8), min_size=P, max_size=P))),
        st.integers(1, 10))
    @example((5, 1, [9, 7, 7, 4, 3]), 9)
    def test_largest_profile_is_best_for_one_extra_profile(self, params, alpha):
        P, t, lengths = params
        assume(sum(lengths) > 0)
        eta_1 = max(lengths)
        assume(eta_1 <= alpha)
        gamma = Fraction(t, P)
        assoc = association_from_lengths(lengths, eta_1, eta_1)
        dofs = {}
        for eta_hat in range(1, eta_1 + 1):
            cfg = validate_config(NetworkConfig(num_antennas=alpha, library_size=gamma.denominator,
                                                cache_files=gamma.numerator, num_profiles=P, alpha=alpha,
                                                eta_hat=eta_hat, beta=eta_hat, Q=t + 1))
            dofs[eta_hat] = dof_closed_form(cfg, assoc.with_delivery(eta_hat, eta_hat))
        assert max(dofs.values()) == dofs[eta_1]


class TestAssociations:

    def test_partitions(self):
        assert list(partitions(4, 2)) == [(4, 0), (3, 1), (2, 2)]

    @given(st.integers(0, 9), st.integers(1, 4))
    def test_partitions_match_brute_force(self, K, P):
        brute = {tuple(sorted(x, reverse=True)) for x in itertools.product(range(K + 1), repeat=P) if sum(x) == K}
        found = list(partitions(K, P))
        assert len(found) == len(set(found))
        assert set(found) == brute

    def test_arrangements(self):
        assert arrangements((6, 6, 6, 6, 6)) == 1
        assert arrangements((9, 8, 6, 5, 2)) == 120
        assert arrangements((2, 2, 1, 0)) == 12

    def test_labeled_weights_count_compositions(self):
        results = search_all(6, 3, Fraction(1, 3), 2)
        labeled = sigma_buckets(results, 3, "labeled")
        assert sum(b.weight for b in labeled) == math.comb(6 + 2, 2)
        ordered = sigma_buckets(results, 3, "sorted")
        assert sum(b.weight for b in ordered) == len(list(partitions(6, 3)))
        assert ordered[0].sigma == 0.0
        with pytest.raises(ValueError):
            sigma_buckets(results, 3, "shuffled")

    def test_average_starts_at_uniform(self):
        buckets = dof_m_average(6, 3, Fraction(1, 3), 2)
        uniform = dof_max_search(Association.uniform(6, 3), 2, Fraction(1, 3)).dof
        assert buckets[0].mean_dof == pytest.approx(float(uniform))
        assert [b.sigma for b in buckets] == sorted(b.sigma for b in buckets)

    def test_average_at_one_sigma(self):
        value = dof_m_average_at([(9, 8, 6, 5, 2), (2, 5, 6, 8, 9)], Fraction(1, 5), 8)
        assert value == pytest.approx(11.43, abs=1e-2)
        with pytest.raises(ValueError):
            dof_m_average_at([(9, 8, 6, 5, 2), (6, 6, 6, 6, 6)], Fraction(1, 5), 8)
