import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, NamedTuple, Sequence

from .errors import ConstraintViolation
from .model import (Association, NetworkConfig, Strategy, association_from_lengths, exact_t_bar,
                    nu1, nu2, squared_deviation, validate_config)
from .scheduler import e_set, iplus, other_profiles

logger = logging.getLogger(__name__)


def lemma1(P: int, Q: int) -> tuple[int, int]:
    """
    sum_{r=1}^{P-Q+1} C(P-r, Q-1) == C(P, Q)
    """
    lhs = sum(math.comb(P - r, Q - 1) for r in range(1, P - Q + 2))
    rhs = math.comb(P, Q)
    assert lhs == rhs, (P, Q, lhs, rhs)
    return lhs, rhs


@dataclass(frozen=True)
class DofTerms:
    """
    Counting terms behind the closed-form DoF. J_* count streams, T_* count
    transmissions; D holds D(delta_r) = phi_r if delta_r else 0.
    """

    beta_prime: int
    alpha_prime: int
    D: tuple[int, ...]
    N_M: int
    N_U: int
    J_M: Fraction
    T_M: int
    J_U: Fraction
    T_U: int

    @property
    def dof(self) -> Fraction:
        return Fraction(self.J_M + self.J_U) / (self.T_M + self.T_U)


def _unicast(K_U: int, gamma: Fraction, P: int, t: int, per_user_s: int, alpha: int) -> tuple[Fraction, int]:
    if K_U == 0:
        return Fraction(0), 0
    J_U = K_U * (1 - gamma) * math.comb(P, t) * per_user_s
    return J_U, math.ceil(J_U / min(K_U, alpha))


def dof_terms(cfg: NetworkConfig, assoc: Association) -> DofTerms:
    if (assoc.eta_hat, assoc.beta) != (cfg.eta_hat, cfg.beta):
        assoc = assoc.with_delivery(cfg.eta_hat, cfg.beta)
    P, Q, t = cfg.num_profiles, cfg.Q, cfg.t_bar
    gamma, alpha, beta, eta_hat = cfg.cache_ratio, cfg.alpha, cfg.beta, cfg.eta_hat
    v1, v2 = nu1(Q, t), nu2(Q, t)
    tail = math.comb(P - t - 1, Q - t - 1)
    D = tuple(phi if d else 0 for phi, d in zip(assoc.phi, assoc.delta))

    beta_prime = beta * tail
    alpha_prime = (eta_hat * t + alpha) * v1 * tail

    if cfg.strategy is Strategy.A:
        T_M = v2 * sum(D[r - 1] * math.comb(P - r, Q - 1) for r in range(1, P - Q + 2))
        J_M = Fraction(assoc.K_M * math.comb(P - 1, Q - 1) * beta * v2)
        J_U, T_U = _unicast(assoc.K_U, gamma, P, t, beta_prime, alpha)
        N_M = 0
    else:
        theta = cfg.theta
        N_M = 0
        for r in range(1, P + 1):
            Pbar = other_profiles(assoc, r)
            for c in range(1, P - Q + 2):
                width = math.comb(P - c - 1, Q - 2)
                lead = Pbar[c - 1]
                for m in range(1, eta_hat + 1):
                    if iplus(assoc, lead, e_set(assoc, r, m, theta)):
                        N_M += width * v2
        T_M = v1 * N_M
        J_M = Fraction(assoc.K_M * math.comb(P - 1, Q - 1) * (eta_hat * t + alpha) * v2 * v1)
        J_U, T_U = _unicast(assoc.K_U, gamma, P, t, alpha_prime, alpha)

    return DofTerms(beta_prime=beta_prime, alpha_prime=alpha_prime, D=D,
                    N_M=N_M, N_U=T_U,
                    J_M=J_M, T_M=T_M, J_U=J_U, T_U=T_U)


def dof_closed_form(cfg: NetworkConfig, assoc: Association) -> Fraction:
    """
    Closed-form DoF of the scheme for either strategy, with or without
    excluded users. With no excluded users and strategy A this is

        K * C(P-1, Q-1) * beta / sum_r D(delta_r) * C(P-r, Q-1)
    """
    return dof_terms(cfg, assoc).dof


def nocc_dof(K: int, alpha: int) -> int:
    return min(alpha, K)


class DofChoice(NamedTuple):
    dof: Fraction
    eta_hat: int
    Q: int
    strategy: Strategy
    fallback: bool = False


def candidate_designs(alpha: int, eta_hat: int, t: int, P: int) -> Iterator[tuple[int, int, Strategy]]:
    """(beta, Q, strategy) combinations that are feasible for one eta_hat."""
    beta = min(alpha, eta_hat)
    for Q in range(t + 1, min(t + alpha // beta, P) + 1):
        yield beta, Q, Strategy.A
    if alpha > eta_hat and alpha % eta_hat:
        Q = t + -(-alpha // eta_hat)
        if Q <= P:
            yield eta_hat, Q, Strategy.B


def eta_hat_sweep(assoc: Association, alpha: int, gamma: Fraction) -> list[DofChoice]:
    """Closed-form DoF of every feasible (eta_hat, Q, strategy) for one association."""
    P = assoc.P
    gamma = Fraction(gamma)
    t = exact_t_bar(P, gamma)
    rows = []
    for eta_hat in range(1, max(assoc.eta) + 1):
        for beta, Q, strategy in candidate_designs(alpha, eta_hat, t, P):
            cfg = NetworkConfig(num_antennas=alpha, library_size=gamma.denominator,
                                cache_files=gamma.numerator, num_profiles=P, alpha=alpha,
                                eta_hat=eta_hat, beta=beta, Q=Q, strategy=strategy)
            try:
                validate_config(cfg)
            except ConstraintViolation as exc:
                logger.debug("skipping eta_hat=%d Q=%d %s: %s", eta_hat, Q, strategy.value, exc)
                continue
            rows.append(DofChoice(dof_closed_form(cfg, assoc.with_delivery(eta_hat, beta)),
                                  eta_hat, Q, strategy))
    return rows


def dof_max_search(assoc: Association, alpha: int, gamma: Fraction) -> DofChoice:
    """
    Exhaustive search over eta_hat in [1, eta_1] and every feasible Q and
    strategy. Ties keep the smaller (eta_hat, Q). A maximum below the
    unicast DoF min(alpha, K) is replaced by it with fallback=True.
    """
    best = None
    for row in eta_hat_sweep(assoc, alpha, gamma):
        if best is None or row.dof > best.dof:
            best = row
    floor = nocc_dof(assoc.K, alpha)
    if best is None or best.dof < floor:
        logger.debug("eta=%s alpha=%d falls back to unicast DoF %d", assoc.eta, alpha, floor)
        if best is None:
            return DofChoice(Fraction(floor), 0, 0, Strategy.A, True)
        return best._replace(dof=Fraction(floor), fallback=True)
    return best


def partitions(K: int, P: int, largest: int = None) -> Iterator[tuple[int, ...]]:
    """Nonincreasing P-tuples of nonnegative integers summing to K."""
    largest = K if largest is None else largest
    if P == 1:
        if K <= largest:
            yield (K,)
        return
    for first in range(min(K, largest), -1, -1):
        if first * P < K:
            break
        for rest in partitions(K - first, P - 1, first):
            yield (first,) + rest


def arrangements(lengths: Sequence[int]) -> int:
    """Number of distinct orderings of a length tuple (profiles are labeled)."""
    count = math.factorial(len(lengths))
    for n in _multiplicities(lengths):
        count //= math.factorial(n)
    return count


def _multiplicities(lengths: Sequence[int]) -> list[int]:
    seen: dict[int, int] = defaultdict(int)
    for x in lengths:
        seen[x] += 1
    return list(seen.values())


class SigmaBucket(NamedTuple):
    squared_deviation: Fraction
    sigma: float
    mean_dof: float
    weight: int


def search_all(K: int, P: int, gamma: Fraction, alpha: int) -> list[tuple[tuple[int, ...], DofChoice]]:
    """dof_max_search for every sorted association of K users to P profiles."""
    out = []
    for lengths in partitions(K, P):
        assoc = association_from_lengths(lengths, max(lengths), 1)
        out.append((lengths, dof_max_search(assoc, alpha, gamma)))
    return out


def sigma_buckets(results: Iterable[tuple[Sequence[int], DofChoice]], P: int, mode: str = "sorted") -> list[SigmaBucket]:
    """
    Groups search results by exact sigma. In "sorted" mode each partition
    of K counts once. In "labeled" mode it counts once per distinct
    ordering over the P profiles.
    """
    if mode not in ("sorted", "labeled"):
        raise ValueError("unknown enumeration mode {!r}".format(mode))
    totals: dict[Fraction, Fraction] = defaultdict(Fraction)
    weights: dict[Fraction, int] = defaultdict(int)
    for lengths, choice in results:
        padded = tuple(lengths) + (0,) * (P - len(lengths))
        weight = 1 if mode == "sorted" else arrangements(padded)
        key = squared_deviation(padded, P)
        totals[key] += choice.dof * weight
        weights[key] += weight
    return [SigmaBucket(key, math.sqrt(key / P), float(totals[key] / weights[key]), weights[key])
            for key in sorted(totals)]


def dof_m_average(K: int, P: int, gamma: Fraction, alpha: int, mode: str = "sorted") -> list[SigmaBucket]:
    """Mean of dof_max_search over every association of K users to P profiles, per sigma."""
    buckets = sigma_buckets(search_all(K, P, gamma, alpha), P, mode)
    logger.info("averaged %d sigma buckets for K=%d P=%d alpha=%d (%s)", len(buckets), K, P, alpha, mode)
    return buckets


def dof_m_average_at(associations: Sequence[Sequence[int]], gamma: Fraction, alpha: int) -> float:
    """Mean maximum DoF over an explicit list of associations sharing one sigma."""
    values = []
    keys = set()
    for lengths in associations:
        keys.add(squared_deviation(lengths, len(lengths)))
        values.append(dof_max_search(association_from_lengths(lengths, max(lengths), 1), alpha, gamma).dof)
    if len(keys) > 1:
        raise ValueError("associations do not share one sigma: {}".format(sorted(keys)))
    return float(sum(values, Fraction(0)) / len(values))
