import math

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from dyncache.experiments import example_network
from dyncache.model import Association, NetworkConfig
from dyncache.placement import MiniFileIndex, Placement, SubpacketId, subpacketization


class TestMiniFileIndex:

    def test_lexicographic_order(self):
        index = MiniFileIndex(4, 2)
        assert list(index) == [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]
        assert index.rank((2, 3)) == 4
        assert index.unrank(6) == (3, 4)
        assert len(index) == index.count == 6

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 12).flatmap(lambda P: st.tuples(st.just(P), st.integers(0, P))))
    def test_rank_follows_enumeration(self, params):
        P, t = params
        index = MiniFileIndex(P, t)
        assert len(index) == math.comb(P, t)
        for i, subset in enumerate(index, start=1):
            assert index.rank(subset) == i
        assert index.unrank(len(index)) == index.subsets[-1]

    def test_rank_without_subset_table(self):
        index = MiniFileIndex(60, 30)
        subset = tuple(range(31, 61))
        assert index.rank(subset) == index.count == math.comb(60, 30)
        assert index.unrank(index.count) == subset
        assert index.unrank(1) == tuple(range(1, 31))
        assert "subsets" not in vars(index)

    def test_unrank_out_of_range(self):
        with pytest.raises(IndexError):
            MiniFileIndex(5, 2).unrank(11)

    def test_cache_contents(self):
        index = MiniFileIndex(5, 2)
        assert len(index.containing(3)) == math.comb(4, 1)
        assert len(index.excluding(3)) == math.comb(4, 2)
        assert all(3 in s for s in index.containing(3))


class TestSubpacketization:

    def test_strategy_a_example(self):
        cfg, assoc = example_network(1)
        placement = Placement(cfg, assoc)
        assert placement.S == 3
        assert placement.per_file == 9
        assert placement.cache_contents(1) == [(1,)]

    def test_strategy_b_example(self):
        cfg, assoc = example_network(2)
        assert subpacketization(cfg, assoc) == 10
        assert Placement(cfg, assoc).per_file == 30

    @pytest.mark.parametrize("P, strategy, Q, per_file", [
        (5, "A", 2, 30),
        (5, "B", 3, 225),
        (10, "A", 5, 2835),
    ])
    def test_large_antenna_table(self, P, strategy, Q, per_file):
        cfg = NetworkConfig.build("1/5", P, 9, 30 // P, L=10, Q=Q, strategy=strategy)
        assert Placement(cfg, Association.uniform(30, P, 30 // P, cfg.beta)).per_file == per_file


class TestDemand:

    def test_missing_subpackets(self):
        cfg, assoc = example_network(1)
        placement = Placement(cfg, assoc)
        missing = placement.missing_subpackets(1)
        assert len(missing) == 2 * placement.S
        assert missing[0] == SubpacketId(1, (2,), 1)
        assert all(1 not in sp.lam for sp in missing)

    def test_every_user_demands_uncached_share(self):
        cfg, assoc = example_network(2)
        placement = Placement(cfg, assoc)
        demanded = placement.demanded()
        assert sorted(demanded) == list(range(1, 13))
        # (1 - gamma) * C(P, t) * S subpackets each
        assert {len(v) for v in demanded.values()} == {2 * 10}
