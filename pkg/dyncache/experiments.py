import logging
from dataclasses import replace
from fractions import Fraction
from functools import lru_cache
from typing import Any, NamedTuple, Sequence

import numpy as np
from numpy.random import default_rng

from .analytics import (dof_closed_form, dof_max_search, dof_terms, eta_hat_sweep, nocc_dof,
                        partitions, search_all, sigma_buckets)
from .beamform import RateReport, map_trials, nocc_schedule, symmetric_rate, trial_rate
from .model import (Association, NetworkConfig, Strategy, association_from_lengths, choose_design,
                    design_for, sigma, validate_config)
from .placement import Placement
from .scheduler import Schedule, ScheduleOptions, full_schedule
from .verifier import count_dof

logger = logging.getLogger(__name__)

SAMPLERS = ("composition", "partition", "multinomial")


class Example(NamedTuple):
    lengths: tuple[int, ...]
    gamma: Fraction
    alpha: int
    eta_hat: int
    beta: int
    Q: int
    strategy: Strategy


# Worked examples: 12 users over 3 profiles, one shared cache per profile.
EXAMPLES = {
    1: Example((5, 4, 3), Fraction(1, 3), alpha=6, eta_hat=4, beta=3, Q=3, strategy=Strategy.A),
    2: Example((5, 4, 3), Fraction(1, 3), alpha=6, eta_hat=4, beta=4, Q=3, strategy=Strategy.B),
}

# (P, strategy, Q) columns of the fixed-parameter tables, K=30 and gamma=1/5.
LARGE_ANTENNA = ((5, Strategy.A, 2), (5, Strategy.B, 3), (10, Strategy.A, 5))
SMALL_ANTENNA = ((5, Strategy.A, 2), (10, Strategy.A, 3), (15, Strategy.A, 4))

# (association, alpha) pairs compared against earlier shared-cache schemes.
EXISTING = (((6, 6, 6, 6, 6), 8), ((9, 8, 6, 5, 2), 8), ((6, 6, 6, 6, 6), 4), ((9, 8, 6, 5, 2), 4))


def example_network(number: int, noise_power: float = 1.0, tx_power: float = 100.0) -> tuple[NetworkConfig, Association]:
    try:
        ex = EXAMPLES[number]
    except KeyError:
        raise ValueError("no worked example {}; choose from {}".format(number, sorted(EXAMPLES))) from None
    cfg = NetworkConfig.build(ex.gamma, len(ex.lengths), ex.alpha, ex.eta_hat,
                              beta=ex.beta, Q=ex.Q, strategy=ex.strategy,
                              noise_power=noise_power, tx_power=tx_power)
    return cfg, association_from_lengths(ex.lengths, cfg.eta_hat, cfg.beta)


#
# Tables
#

def _table(columns: Sequence[tuple[int, Strategy, int]],
           K: int,
           gamma: Fraction,
           alpha: int,
           L: int,
           snr_db: float,
           trials: int,
           seed: int) -> list[dict[str, Any]]:
    names = []
    values: dict[str, dict[str, Any]] = {metric: {} for metric in (
        "dof", "dof_counted", "subpacketization", "transmissions", "transmissions_counted", "residual", "rate")}
    for P, strategy, Q in columns:
        name = "P={}/{}/Q={}".format(P, strategy.value, Q)
        names.append(name)
        eta_hat = K // P
        cfg = NetworkConfig.build(gamma, P, alpha, eta_hat, L=L, Q=Q, strategy=strategy).with_snr_db(snr_db)
        assoc = Association.uniform(K, P, eta_hat, cfg.beta)
        terms = dof_terms(cfg, assoc)
        schedule = full_schedule(cfg, assoc)
        values["dof"][name] = terms.dof
        values["dof_counted"][name] = count_dof(schedule)
        values["subpacketization"][name] = Placement(cfg, assoc).per_file
        values["transmissions"][name] = terms.T_M
        values["transmissions_counted"][name] = schedule.T_M
        values["residual"][name] = len(schedule.residual_log)
        if schedule.residual_log or schedule.T_M != terms.T_M:
            logger.warning("%s: built schedule has T_M=%d and %d residual subpackets, closed form T_M=%d",
                           name, schedule.T_M, len(schedule.residual_log), terms.T_M)
        if trials > 0:
            report = symmetric_rate(schedule, cfg, trials, seed, scheme=name)
            values["rate"][name] = report.mean_rate
        else:
            values["rate"][name] = None
    return [{"metric": metric, **{n: row[n] for n in names}} for metric, row in values.items()]


def table_large_antenna(snr_db: float = 20.0, trials: int = 0, seed: int = 0) -> list[dict[str, Any]]:
    """
    DoF, subpackets per file and T_M for K=30, gamma=1/5, alpha=9, L=10 and
    uniform profiles. Each column reports the closed form next to the values
    counted on the built schedule.
    """
    return _table(LARGE_ANTENNA, 30, Fraction(1, 5), 9, 10, snr_db, trials, seed)


def table_small_antenna(snr_db: float = 20.0, trials: int = 0, seed: int = 0) -> list[dict[str, Any]]:
    """Same metrics with alpha=2 and L=2."""
    return _table(SMALL_ANTENNA, 30, Fraction(1, 5), 2, 2, snr_db, trials, seed)


def compare_existing(gamma: Fraction = Fraction(1, 5)) -> list[dict[str, Any]]:
    rows = []
    for lengths, alpha in EXISTING:
        assoc = association_from_lengths(lengths, max(lengths), 1)
        best = dof_max_search(assoc, alpha, gamma)
        rows.append({
            "association": "-".join(str(x) for x in lengths),
            "alpha": alpha,
            "sigma": sigma(lengths, len(lengths)),
            "dof_max": best.dof,
            "eta_hat": best.eta_hat,
            "Q": best.Q,
            "strategy": best.strategy.value,
        })
    return rows


#
# Scheme comparison at one association
#

def _scheme_row(name: str, schedule: Schedule, closed: Fraction = None) -> dict[str, Any]:
    return {
        "scheme": name,
        "dof_counted": count_dof(schedule),
        "dof_closed_form": closed,
        "T_M": schedule.T_M,
        "T_U": schedule.T_U,
        "subpacketization": schedule.per_file,
        "rerouted": len(schedule.rerouted),
        "residual": len(schedule.residual_log),
    }


def compare_schemes(cfg: NetworkConfig,
                    assoc: Association,
                    trials: int = 0,
                    seed: int = 0) -> list[dict[str, Any]]:
    """
    Both strategies (where applicable) with and without efficient
    multicast, followed by the no-CC baseline. With trials > 0 every row
    also gets the mean symmetric rate at cfg's SNR.
    """
    designs = {cfg.strategy: (cfg.beta, cfg.Q)}
    other = Strategy.B if cfg.strategy is Strategy.A else Strategy.A
    design = design_for(other, cfg.cache_ratio, cfg.alpha, cfg.eta_hat, cfg.num_profiles)
    if design.strategy is other:
        designs[other] = (design.beta, design.Q)

    rows = []
    schedules = []
    for strategy in sorted(designs, key=lambda s: s.value):
        beta, Q = designs[strategy]
        variant = validate_config(replace(cfg, beta=beta, Q=Q, strategy=strategy))
        plain = full_schedule(variant, assoc)
        closed = dof_closed_form(variant, assoc) if not plain.residual_log else None
        rows.append(_scheme_row(strategy.value, plain, closed))
        schedules.append((variant, plain))
        em = full_schedule(variant, assoc, ScheduleOptions(efficient_multicast=True))
        rows.append(_scheme_row(strategy.value + "+em", em))
        schedules.append((variant, em))

    base = nocc_schedule(cfg, assoc)
    rows.append(_scheme_row("nocc", base, Fraction(nocc_dof(assoc.K, cfg.alpha))))
    schedules.append((cfg, base))

    for row, (variant, schedule) in zip(rows, schedules):
        row["mean_rate"] = (symmetric_rate(schedule, variant, trials, seed, scheme=row["scheme"]).mean_rate
                            if trials > 0 else None)
    return rows


#
# DoF sweeps
#

def dof_sweep(K: int, P: int, gamma: Fraction, alpha: int, mode: str = "sorted") -> tuple[list[dict], list[dict]]:
    """
    Per-association maximum DoF and its sigma-bucketed average next to the
    unicast DoF min(alpha, K).
    """
    results = search_all(K, P, Fraction(gamma), alpha)
    per_assoc = [{
        "association": "-".join(str(x) for x in lengths),
        "sigma": sigma(lengths, P),
        "dof_max": choice.dof,
        "eta_hat": choice.eta_hat,
        "Q": choice.Q,
        "strategy": choice.strategy.value,
        "fallback": choice.fallback,
    } for lengths, choice in results]
    floor = nocc_dof(K, alpha)
    aggregate = [{"sigma": b.sigma, "optimal": b.mean_dof, "nocc": floor, "weight": b.weight}
                 for b in sigma_buckets(results, P, mode)]
    return per_assoc, aggregate


def design_sweep(lengths: Sequence[int], gamma: Fraction, alpha: int) -> list[dict[str, Any]]:
    """Closed-form DoF of every feasible (eta_hat, Q, strategy) at one association."""
    assoc = association_from_lengths(lengths, max(lengths), 1)
    return [{"eta_hat": c.eta_hat, "Q": c.Q, "strategy": c.strategy.value, "dof": c.dof}
            for c in eta_hat_sweep(assoc, alpha, Fraction(gamma))]


#
# Association samplers
#

@lru_cache(maxsize=32)
def _partition_table(K: int, P: int) -> tuple[tuple[int, ...], ...]:
    return tuple(partitions(K, P))


def sample_lengths(rng: np.random.Generator, K: int, P: int, sampler: str = "composition") -> tuple[int, ...]:
    """
    Random profile lengths summing to K:

        composition  uniform over the C(K+P-1, P-1) ordered splits (stars and bars)
        partition    uniform over the unordered splits
        multinomial  each user picks a profile uniformly at random
    """
    if sampler == "composition":
        bars = np.sort(rng.choice(K + P - 1, size=P - 1, replace=False))
        edges = np.concatenate(([-1], bars, [K + P - 1]))
        return tuple(int(x) for x in np.diff(edges) - 1)
    if sampler == "partition":
        table = _partition_table(K, P)
        return table[int(rng.integers(len(table)))]
    if sampler == "multinomial":
        return tuple(int(x) for x in np.bincount(rng.integers(0, P, size=K), minlength=P))
    raise ValueError("unknown sampler {!r}; choose from {}".format(sampler, ", ".join(SAMPLERS)))


#
# Rate curves
#

def _trial_network(lengths: Sequence[int],
                   gamma: Fraction,
                   P: int,
                   L: int,
                   alpha: int,
                   strategy: Strategy,
                   eta_hat: int = None,
                   Q: int = None) -> tuple[NetworkConfig, Association]:
    assoc = association_from_lengths(lengths, 1, 1)
    eta_hat = eta_hat or assoc.eta[0]
    if Q is None:
        design = design_for(strategy, gamma, alpha, eta_hat, P)
    else:
        design = choose_design(gamma, alpha, eta_hat, P, Q=Q, strategy=strategy)
    cfg = validate_config(NetworkConfig(num_antennas=L, library_size=gamma.denominator,
                                        cache_files=gamma.numerator, num_profiles=P, alpha=alpha,
                                        eta_hat=eta_hat, beta=design.beta, Q=design.Q,
                                        strategy=design.strategy))
    return cfg, assoc.with_delivery(cfg.eta_hat, cfg.beta)


def rate_curve(K: int,
               P: int,
               gamma: Fraction,
               L: int,
               alpha: int,
               snr_list: Sequence[float],
               trials: int,
               seed: int,
               strategy: Strategy = Strategy.A,
               eta_hat: int = None,
               Q: int = None,
               baseline: str = "nocc",
               sampler: str = "composition",
               lengths: Sequence[int] = None,
               suffix: str = "",
               tol: float = 1e-4) -> list[dict[str, Any]]:
    """
    Mean symmetric rate per SNR point. Each trial draws its own association
    (unless `lengths` is fixed) from rng(seed, trial, 1) and its channels
    from rng(seed, trial); the channels of a trial are reused at every SNR.

    eta_hat defaults to the largest profile of each trial. Strategy B falls
    back to A on associations where it is not applicable.
    """
    gamma = Fraction(gamma)
    strategy = Strategy(strategy)
    if baseline not in ("nocc", "zf", "none"):
        raise ValueError("unknown baseline {!r}".format(baseline))
    label = strategy.value + suffix

    def one(i: int) -> dict[str, list[tuple[float, int]]]:
        lens = lengths if lengths is not None else sample_lengths(default_rng([seed, i, 1]), K, P, sampler)
        cfg, assoc = _trial_network(lens, gamma, P, L, alpha, strategy, eta_hat, Q)
        if cfg.strategy is not strategy:
            logger.debug("trial %d: eta=%s runs strategy %s", i, assoc.eta, cfg.strategy.value)
        schedule = full_schedule(cfg, assoc)
        runs = {label: (schedule, "maxmin")}
        if baseline == "nocc":
            runs["nocc" + suffix] = (nocc_schedule(cfg, assoc), "maxmin")
        elif baseline == "zf":
            runs[label + "-zf"] = (schedule, "zf")
        return {name: [trial_rate(sched, cfg.with_snr_db(snr), seed, i, precoder, tol) for snr in snr_list]
                for name, (sched, precoder) in runs.items()}

    per_trial = map_trials(one, trials)
    rows = []
    for j, snr in enumerate(snr_list):
        for name in per_trial[0] if per_trial else ():
            results = [trial[name][j] for trial in per_trial]
            report = RateReport(scheme=name, snr_db=float(snr), per_trial=[r for r, _ in results],
                                degenerate=sum(d for _, d in results))
            if report.degenerate:
                logger.warning("%s at %.1f dB: %d zero-rate transmissions", name, snr, report.degenerate)
            logger.info("%s at %.1f dB: mean %.4f (stderr %.4f)", name, snr, report.mean_rate, report.stderr)
            rows.append(report.row())
    return rows


#
# Plot scripts
#

PLOT_TEMPLATE = '''import csv
from collections import defaultdict

import matplotlib.pyplot as plt

COLUMNS = {ys!r}

series = defaultdict(list)
with open({csv_name!r}, newline="") as fh:
    for row in csv.DictReader(fh):
        for y in COLUMNS:
            if row[y] == "":
                continue
            name = " ".join(part for part in (row.get({group!r}, ""), y if len(COLUMNS) > 1 else "") if part)
            series[name].append((float(row[{x!r}]), float(row[y])))

for name, points in sorted(series.items()):
    points.sort()
    plt.plot([p[0] for p in points], [p[1] for p in points], marker="o", label=name or None)
plt.xlabel({xlabel!r})
plt.ylabel({ylabel!r})
if len(series) > 1:
    plt.legend()
plt.grid(True)
plt.savefig({png_name!r}, bbox_inches="tight")
'''


def plot_script(csv_name: str,
                x: str,
                ys: Sequence[str],
                group: str = "",
                xlabel: str = None,
                ylabel: str = None) -> str:
    """Source of a stand-alone matplotlib script plotting the columns `ys` of csv_name against x."""
    ys = tuple(ys)
    png_name = csv_name.rsplit(".", 1)[0] + ".png"
    return PLOT_TEMPLATE.format(csv_name=csv_name, group=group, x=x, ys=ys,
                                xlabel=xlabel or x, ylabel=ylabel or ", ".join(ys), png_name=png_name)
