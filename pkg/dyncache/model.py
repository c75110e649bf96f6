import enum
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import NamedTuple, Sequence, Union

from .errors import ConstraintViolation, EmptyNetwork, NonIntegerTBar

logger = logging.getLogger(__name__)


class Strategy(str, enum.Enum):
    A = "A"
    B = "B"


def mod1(x: int, c: int) -> int:
    """
    1-based circular index: mod1(c, c) == c and mod1(d + c, c) == mod1(d, c).
    """
    return (x - 1) % c + 1


def exact_t_bar(P: int, gamma: Fraction) -> int:
    t = P * Fraction(gamma)
    if t.denominator != 1:
        raise NonIntegerTBar("P*gamma = {} is not an integer (P={}, gamma={})".format(t, P, gamma))
    return int(t)


def nu1(Q: int, t_bar: int) -> int:
    """Sub-transmissions per Strategy B quintuple, C(Q-2, Q-t-2)."""
    if Q - t_bar - 2 < 0 or Q < 2:
        return 0
    return math.comb(Q - 2, Q - t_bar - 2)


def nu2(Q: int, t_bar: int) -> int:
    """Sub-transmissions per Strategy A triple, C(Q-1, Q-t-1)."""
    return math.comb(Q - 1, Q - t_bar - 1)


@dataclass(frozen=True)
class NetworkConfig:
    """
    System parameters (L, N, M, P, N0, P_T) and design parameters
    (alpha, eta_hat, beta, Q, strategy) of one delivery round.

    The cache ratio gamma = M/N is kept exact so that t_bar = P*gamma and
    every DoF expression stays rational.
    """

    num_antennas: int
    library_size: int
    cache_files: int
    num_profiles: int
    alpha: int
    eta_hat: int
    beta: int
    Q: int
    strategy: Strategy = Strategy.A
    noise_power: float = 1.0
    tx_power: float = 100.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", Strategy(self.strategy))

    @property
    def cache_ratio(self) -> Fraction:
        return Fraction(self.cache_files, self.library_size)

    @property
    def t_bar(self) -> int:
        return exact_t_bar(self.num_profiles, self.cache_ratio)

    @property
    def P(self) -> int:
        return self.num_profiles

    @property
    def L(self) -> int:
        return self.num_antennas

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.tx_power / self.noise_power)

    @property
    def nu1(self) -> int:
        return nu1(self.Q, self.t_bar)

    @property
    def nu2(self) -> int:
        return nu2(self.Q, self.t_bar)

    @property
    def theta(self) -> int:
        return self.alpha - self.eta_hat * (self.alpha // self.eta_hat)

    def with_snr_db(self, snr_db: float) -> "NetworkConfig":
        return replace(self, tx_power=self.noise_power * 10.0 ** (snr_db / 10.0))

    def as_dict(self) -> dict:
        return {
            "num_antennas": self.num_antennas,
            "library_size": self.library_size,
            "cache_files": self.cache_files,
            "num_profiles": self.num_profiles,
            "alpha": self.alpha,
            "eta_hat": self.eta_hat,
            "beta": self.beta,
            "Q": self.Q,
            "strategy": self.strategy.value,
            "noise_power": self.noise_power,
            "tx_power": self.tx_power,
        }

    @classmethod
    def build(cls,
              gamma: Union[Fraction, str, float],
              P: int,
              alpha: int,
              eta_hat: int,
              L: int = None,
              beta: int = None,
              Q: int = None,
              strategy: Union[Strategy, str] = None,
              noise_power: float = 1.0,
              tx_power: float = 100.0) -> "NetworkConfig":
        """
        Convenience constructor: fills beta/Q/strategy via choose_design when
        they are not given and validates the result. L defaults to alpha.
        """
        gamma = Fraction(gamma).limit_denominator(10 ** 6) if isinstance(gamma, float) else Fraction(gamma)
        design = choose_design(gamma, alpha, eta_hat, P, Q=Q, strategy=strategy)
        cfg = cls(
            num_antennas=L if L is not None else alpha,
            library_size=gamma.denominator,
            cache_files=gamma.numerator,
            num_profiles=P,
            alpha=alpha,
            eta_hat=eta_hat,
            beta=beta if beta is not None else design.beta,
            Q=design.Q,
            strategy=design.strategy,
            noise_power=noise_power,
            tx_power=tx_power,
        )
        return validate_config(cfg)


ValidatedConfig = NetworkConfig


class Design(NamedTuple):
    beta: int
    Q: int
    strategy: Strategy


def _violation(inequality: str, **values) -> ConstraintViolation:
    detail = ", ".join("{}={}".format(k, v) for k, v in values.items())
    return ConstraintViolation("violated {} ({})".format(inequality, detail))


def validate_config(cfg: NetworkConfig) -> ValidatedConfig:
    """
    Checks the feasibility constraints on (P, Q, beta, eta_hat, alpha, t_bar)
    and returns the config unchanged.

    Strategy A additionally needs Q <= t_bar + floor(alpha/beta) so that no
    stream has to null more than alpha - 1 users.
    """
    for name in ("num_antennas", "library_size", "cache_files", "num_profiles",
                 "alpha", "eta_hat", "beta", "Q"):
        value = getattr(cfg, name)
        if not isinstance(value, int) or value < 1:
            raise _violation("{} >= 1".format(name), **{name: value})
    if cfg.cache_files >= cfg.library_size:
        raise _violation("0 < gamma < 1", M=cfg.cache_files, N=cfg.library_size)
    if not cfg.noise_power > 0 or not cfg.tx_power > 0:
        raise _violation("N0 > 0 and P_T > 0", N0=cfg.noise_power, P_T=cfg.tx_power)

    t = cfg.t_bar
    alpha, beta, eta_hat, Q, P = cfg.alpha, cfg.beta, cfg.eta_hat, cfg.Q, cfg.num_profiles
    if t < 1:
        raise _violation("t_bar >= 1", t_bar=t)
    if alpha > cfg.num_antennas:
        raise _violation("alpha <= L", alpha=alpha, L=cfg.num_antennas)
    if beta > min(alpha, eta_hat):
        raise _violation("beta <= min(alpha, eta_hat)", beta=beta, alpha=alpha, eta_hat=eta_hat)
    if Q < t + 1:
        raise _violation("Q >= t_bar + 1", Q=Q, t_bar=t)
    if Q > t + -(-alpha // beta):
        raise _violation("Q <= t_bar + ceil(alpha/beta)", Q=Q, t_bar=t, alpha=alpha, beta=beta)
    if Q > P:
        raise _violation("Q <= P", Q=Q, P=P)

    strategy = Strategy(cfg.strategy)
    if strategy is Strategy.A:
        if Q > t + alpha // beta:
            raise _violation("Q <= t_bar + floor(alpha/beta) for strategy A",
                             Q=Q, t_bar=t, alpha=alpha, beta=beta)
    else:
        if alpha <= eta_hat:
            raise _violation("alpha > eta_hat for strategy B", alpha=alpha, eta_hat=eta_hat)
        if alpha % eta_hat == 0:
            raise _violation("alpha/eta_hat not an integer for strategy B",
                             alpha=alpha, eta_hat=eta_hat)
        if beta != eta_hat:
            raise _violation("beta == eta_hat for strategy B", beta=beta, eta_hat=eta_hat)
        if Q != t + -(-alpha // eta_hat):
            raise _violation("Q == t_bar + ceil(alpha/eta_hat) for strategy B",
                             Q=Q, t_bar=t, alpha=alpha, eta_hat=eta_hat)
    return cfg


def choose_design(gamma: Fraction,
                  alpha: int,
                  eta_hat: int,
                  P: int,
                  Q: int = None,
                  strategy: Union[Strategy, str] = None) -> Design:
    """
    Picks (beta, Q, strategy) from (gamma, alpha, eta_hat, P):

        alpha <= eta_hat                  ->  beta = alpha,   Q = t + 1,                   A
        alpha >  eta_hat, integer ratio   ->  beta = eta_hat, Q = t + alpha/eta_hat,       A
        alpha >  eta_hat, fractional      ->  beta = eta_hat, Q = t + ceil(alpha/eta_hat), B

    Forcing strategy A on a fractional ratio uses Q = t + floor(alpha/eta_hat).
    A caller supplied Q replaces the default and is checked by validate_config.
    """
    t = exact_t_bar(P, gamma)
    beta = min(alpha, eta_hat)
    if strategy is None:
        if alpha <= eta_hat or alpha % eta_hat == 0:
            strategy = Strategy.A
        else:
            strategy = Strategy.B
    strategy = Strategy(strategy)

    if strategy is Strategy.A:
        default_Q = t + alpha // beta
    else:
        default_Q = t + -(-alpha // eta_hat)
    return Design(beta=beta, Q=default_Q if Q is None else Q, strategy=strategy)


def design_for(strategy: Union[Strategy, str], gamma: Fraction, alpha: int, eta_hat: int, P: int) -> Design:
    """
    The requested strategy where it applies, otherwise strategy A. B needs
    alpha > eta_hat with a fractional ratio and t + ceil(alpha/eta_hat) <= P.
    """
    strategy = Strategy(strategy)
    if strategy is Strategy.B:
        t = exact_t_bar(P, gamma)
        if alpha <= eta_hat or alpha % eta_hat == 0 or t + -(-alpha // eta_hat) > P:
            logger.debug("strategy B not applicable for alpha=%d eta_hat=%d, using A", alpha, eta_hat)
            strategy = Strategy.A
    design = choose_design(gamma, alpha, eta_hat, P, strategy=strategy)
    if design.strategy is Strategy.A and design.Q > P:
        design = design._replace(Q=P)
    return design


@dataclass(frozen=True)
class Association:
    """
    User-to-profile association, normalised so that eta_1 >= eta_2 >= ... >= eta_P.

    Users get consecutive 1-based ids in profile order, e.g. lengths (5, 4, 3)
    give U_1 = {1..5}, U_2 = {6..9}, U_3 = {10, 11, 12}. The first
    delta_p = min(eta_hat, eta_p) users of each profile form V_p; the rest
    are left for the unicast step.

    `permutation[i]` is the caller's (0-based) index of sorted profile i + 1.
    """

    eta: tuple[int, ...]
    eta_hat: int
    beta: int
    permutation: tuple[int, ...]
    users: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def P(self) -> int:
        return len(self.eta)

    @property
    def K(self) -> int:
        return sum(self.eta)

    @cached_property
    def delta(self) -> tuple[int, ...]:
        return tuple(min(self.eta_hat, e) for e in self.eta)

    @cached_property
    def phi(self) -> tuple[int, ...]:
        return tuple(max(self.beta, d) for d in self.delta)

    @cached_property
    def served(self) -> tuple[tuple[int, ...], ...]:
        return tuple(u[:d] for u, d in zip(self.users, self.delta))

    @cached_property
    def excluded(self) -> tuple[int, ...]:
        return tuple(k for u, d in zip(self.users, self.delta) for k in u[d:])

    @property
    def K_M(self) -> int:
        return sum(self.delta)

    @property
    def K_U(self) -> int:
        return sum(max(0, e - self.eta_hat) for e in self.eta)

    @cached_property
    def profile_of(self) -> dict[int, int]:
        return {k: p for p, u in enumerate(self.users, start=1) for k in u}

    def user_of_profile(self, p: int) -> tuple[int, ...]:
        return self.users[p - 1]

    def V(self, p: int) -> tuple[int, ...]:
        return self.served[p - 1]

    def theta(self, alpha: int) -> int:
        return alpha - self.eta_hat * (alpha // self.eta_hat)

    def with_delivery(self, eta_hat: int, beta: int) -> "Association":
        return replace(self, eta_hat=eta_hat, beta=beta)

    @staticmethod
    def uniform(K: int, P: int, eta_hat: int = None, beta: int = None) -> "Association":
        if K % P:
            raise ConstraintViolation("K={} is not divisible by P={}".format(K, P))
        eta_hat = eta_hat if eta_hat is not None else K // P
        return association_from_lengths([K // P] * P, eta_hat, beta if beta is not None else eta_hat)


def association_from_lengths(lengths: Sequence[int], eta_hat: int, beta: int) -> Association:
    """
    Builds an Association from per-profile user counts in any order.
    Equal lengths keep their original relative order.
    """
    lengths = [int(x) for x in lengths]
    if any(x < 0 for x in lengths):
        raise ConstraintViolation("profile lengths must be nonnegative: {}".format(lengths))
    if sum(lengths) == 0:
        raise EmptyNetwork("all {} profiles are empty".format(len(lengths)))

    order = sorted(range(len(lengths)), key=lambda i: (-lengths[i], i))
    eta = tuple(lengths[i] for i in order)

    users = []
    next_id = 1
    for e in eta:
        users.append(tuple(range(next_id, next_id + e)))
        next_id += e

    assoc = Association(eta=eta, eta_hat=eta_hat, beta=beta,
                        permutation=tuple(order), users=tuple(users))
    logger.debug("association eta=%s eta_hat=%d K_M=%d K_U=%d", eta, eta_hat, assoc.K_M, assoc.K_U)
    return assoc


def squared_deviation(lengths: Sequence[int], P: int) -> Fraction:
    """Exact sum of (eta_p - K/P)^2 over P profiles, missing profiles count as empty."""
    padded = list(lengths) + [0] * (P - len(lengths))
    mean = Fraction(sum(padded), P)
    return sum(((e - mean) ** 2 for e in padded), Fraction(0))


def sigma(lengths: Sequence[int], P: int) -> float:
    """
    Standard deviation of the profile lengths around K/P:

        sigma = sqrt( (1/P) * sum_p (eta_p - K/P)^2 )
    """
    return math.sqrt(squared_deviation(lengths, P) / P)
