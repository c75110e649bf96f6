import json

import pytest

from dyncache.config import load_config, merge_overrides, network_from_values, normalise, parse_int_list
from dyncache.errors import ConstraintViolation
from dyncache.model import Strategy

EXAMPLE_1 = {"P": 3, "gamma": "1/3", "alpha": 6, "eta_hat": 4, "beta": 3, "Q": 3, "strategy": "A",
             "lengths": [5, 4, 3]}


class TestLoad:

    def test_json(self, tmp_path):
        path = tmp_path / "net.json"
        path.write_text(json.dumps(EXAMPLE_1))
        values = load_config(path)
        assert values["num_profiles"] == 3
        assert (values["cache_files"], values["library_size"]) == (1, 3)
        assert values["lengths"] == [5, 4, 3]

    def test_toml(self, tmp_path):
        path = tmp_path / "net.toml"
        path.write_text('L = 10\nP = 5\ncache_ratio = 0.2\nalpha = 8\nK = 30\nP_T = 100.0\n')
        values = load_config(path)
        assert values["num_antennas"] == 10
        assert (values["cache_files"], values["library_size"]) == (1, 5)
        assert values["tx_power"] == 100.0

    def test_unsupported_suffix(self, tmp_path):
        path = tmp_path / "net.yaml"
        path.write_text("P: 3\n")
        with pytest.raises(ConstraintViolation):
            load_config(path)

    def test_unknown_keys(self):
        with pytest.raises(ConstraintViolation, match="antennas"):
            normalise({"P": 3, "antennas": 4})


class TestMerge:

    def test_flags_win_and_none_is_ignored(self):
        merged = merge_overrides(normalise(EXAMPLE_1), {"alpha": 4, "beta": None, "L": 6})
        assert merged["alpha"] == 4
        assert merged["beta"] == 3
        assert merged["num_antennas"] == 6

    def test_int_list(self):
        assert parse_int_list("9, 8,6,5,2") == [9, 8, 6, 5, 2]
        assert parse_int_list("") == []


class TestNetworkFromValues:

    def test_example(self):
        cfg, assoc = network_from_values(normalise(EXAMPLE_1))
        assert (cfg.alpha, cfg.eta_hat, cfg.beta, cfg.Q, cfg.strategy) == (6, 4, 3, 3, Strategy.A)
        assert assoc.eta == (5, 4, 3) and assoc.excluded == (5,)

    def test_uniform_split_and_defaults(self):
        cfg, assoc = network_from_values(normalise({"K": 30, "P": 5, "gamma": 0.2, "alpha": 8, "L": 10}))
        assert assoc.eta == (6,) * 5
        assert (cfg.eta_hat, cfg.Q, cfg.strategy, cfg.num_antennas) == (6, 3, Strategy.B, 10)

    def test_short_lengths_are_padded(self):
        _, assoc = network_from_values(normalise({"P": 4, "gamma": "1/4", "alpha": 2, "lengths": "3,1"}))
        assert assoc.eta == (3, 1, 0, 0)

    def test_snr_sets_power(self):
        cfg, _ = network_from_values(normalise({**EXAMPLE_1, "snr_db": 30.0, "N0": 2.0}))
        assert cfg.tx_power == pytest.approx(2000.0)

    @pytest.mark.parametrize("values", [
        {"P": 3, "gamma": "1/3", "alpha": 6},
        {"P": 3, "gamma": "1/3", "alpha": 6, "K": 10},
        {"P": 3, "gamma": "1/3", "K": 12},
        {"P": 2, "gamma": "1/2", "alpha": 2, "lengths": [1, 1, 1]},
    ])
    def test_rejected(self, values):
        with pytest.raises(ConstraintViolation):
            network_from_values(normalise(values))
