import json
import logging
import tomllib
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

from .errors import ConstraintViolation
from .model import Association, NetworkConfig, association_from_lengths

logger = logging.getLogger(__name__)

# NetworkConfig field names plus run-level keys. Short aliases match the CLI flags.
NETWORK_KEYS = (
    "num_antennas", "library_size", "cache_files", "num_profiles", "alpha", "eta_hat",
    "beta", "Q", "strategy", "noise_power", "tx_power",
)
RUN_KEYS = ("lengths", "seed", "trials", "snr_db", "K")
ALIASES = {
    "L": "num_antennas",
    "N": "library_size",
    "M": "cache_files",
    "P": "num_profiles",
    "N0": "noise_power",
    "P_T": "tx_power",
}
KNOWN_KEYS = frozenset(NETWORK_KEYS) | frozenset(RUN_KEYS) | frozenset(ALIASES) | {"gamma", "cache_ratio"}


def load_config(path: str | Path) -> dict[str, Any]:
    """Reads a .json or .toml config file into a flat dict of canonical keys."""
    path = Path(path)
    if path.suffix == ".toml":
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    elif path.suffix == ".json":
        with path.open() as fh:
            raw = json.load(fh)
    else:
        raise ConstraintViolation("config must be .json or .toml: {}".format(path))
    values = normalise(raw)
    logger.debug("loaded %s: %s", path, values)
    return values


def normalise(raw: Mapping[str, Any]) -> dict[str, Any]:
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConstraintViolation("unknown config keys: {}".format(", ".join(unknown)))
    values = {}
    for key, value in raw.items():
        key = ALIASES.get(key, key)
        if key in ("gamma", "cache_ratio"):
            gamma = Fraction(str(value))
            values["cache_files"], values["library_size"] = gamma.numerator, gamma.denominator
        else:
            values[key] = value
    return values


def merge_overrides(file_values: Mapping[str, Any], cli_values: Mapping[str, Any]) -> dict[str, Any]:
    """CLI values that are not None replace the file values."""
    merged = dict(file_values)
    merged.update(normalise({k: v for k, v in cli_values.items() if v is not None}))
    return merged


def parse_int_list(text: str) -> list[int]:
    return [int(x) for x in text.replace(" ", "").split(",") if x]


def parse_float_list(text: str) -> list[float]:
    return [float(x) for x in text.replace(" ", "").split(",") if x]


def network_from_values(values: Mapping[str, Any]) -> tuple[NetworkConfig, Association]:
    """
    Builds the validated config and association from merged values. Missing
    design parameters come from choose_design, eta_hat defaults to the
    largest profile and lengths default to a uniform split of K.
    """
    try:
        gamma = Fraction(values["cache_files"], values["library_size"])
        P = int(values["num_profiles"])
        alpha = int(values["alpha"])
    except KeyError as exc:
        raise ConstraintViolation("missing required parameter {}".format(exc.args[0])) from exc

    lengths = values.get("lengths")
    if lengths is None:
        K = values.get("K")
        if K is None:
            raise ConstraintViolation("either lengths or K must be given")
        if int(K) % P:
            raise ConstraintViolation("K={} is not divisible by P={}; give lengths".format(K, P))
        lengths = [int(K) // P] * P
    if isinstance(lengths, str):
        lengths = parse_int_list(lengths)
    lengths = list(lengths) + [0] * (P - len(lengths))
    if len(lengths) > P:
        raise ConstraintViolation("{} profile lengths for P={}".format(len(lengths), P))

    eta_hat = int(values.get("eta_hat") or max(lengths))
    tx_power = values.get("tx_power")
    noise_power = float(values.get("noise_power", 1.0))
    if values.get("snr_db") is not None:
        tx_power = noise_power * 10.0 ** (float(values["snr_db"]) / 10.0)
    cfg = NetworkConfig.build(
        gamma, P, alpha, eta_hat,
        L=values.get("num_antennas"),
        beta=values.get("beta"),
        Q=values.get("Q"),
        strategy=values.get("strategy"),
        noise_power=noise_power,
        tx_power=float(tx_power) if tx_power is not None else 100.0,
    )
    return cfg, association_from_lengths(lengths, cfg.eta_hat, cfg.beta)
