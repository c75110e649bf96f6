import csv
import enum
import logging
import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Mapping, NamedTuple, Optional, TextIO

from .errors import ConstraintViolation, CounterExhausted
from .model import Association, NetworkConfig, Strategy, mod1
from .placement import Placement, SubpacketId

logger = logging.getLogger(__name__)

PHANTOM = None


class TxKind(str, enum.Enum):
    CC_A = "CC_A"
    CC_B = "CC_B"
    UC = "UC"


@dataclass(frozen=True)
class Stream:
    """One precoded subpacket W^k_{lam,q} and the users its beam must null."""

    user: int
    lam: tuple[int, ...]
    q: int
    nulling_set: frozenset[int]
    profile: int

    @property
    def subpacket(self) -> SubpacketId:
        return SubpacketId(self.user, self.lam, self.q)


@dataclass(frozen=True)
class Transmission:
    kind: TxKind
    origin: tuple[int, ...]
    sub_index: int
    streams: tuple[Stream, ...]

    @property
    def served_users(self) -> frozenset[int]:
        return frozenset(s.user for s in self.streams)

    @property
    def is_cc(self) -> bool:
        return self.kind is not TxKind.UC


@dataclass(frozen=True)
class Schedule:
    """
    Ordered CC sub-transmissions followed by UC transmissions.

    `residual_log` holds subpackets of CC-served users that the CC step left
    undelivered and `rerouted` those dropped by the efficient-multicast
    filter. Both are delivered in the UC step.
    """

    transmissions: tuple[Transmission, ...]
    residual_log: tuple[SubpacketId, ...] = ()
    rerouted: tuple[SubpacketId, ...] = ()
    S: int = 0
    per_file: int = 0

    @property
    def cc(self) -> tuple[Transmission, ...]:
        return tuple(tx for tx in self.transmissions if tx.is_cc)

    @property
    def uc(self) -> tuple[Transmission, ...]:
        return tuple(tx for tx in self.transmissions if not tx.is_cc)

    @property
    def T_M(self) -> int:
        return len(self.cc)

    @property
    def T_U(self) -> int:
        return len(self.uc)

    @property
    def J_M(self) -> int:
        return sum(len(tx.streams) for tx in self.cc)

    @property
    def J_U(self) -> int:
        return sum(len(tx.streams) for tx in self.uc)

    def summary(self) -> dict:
        kinds: dict[str, int] = {}
        for tx in self.transmissions:
            kinds[tx.kind.value] = kinds.get(tx.kind.value, 0) + 1
        return {
            "T_M": self.T_M,
            "T_U": self.T_U,
            "J_M": self.J_M,
            "J_U": self.J_U,
            "kinds": kinds,
            "residual": len(self.residual_log),
            "rerouted": len(self.rerouted),
            "S": self.S,
            "per_file": self.per_file,
        }

    CSV_COLUMNS = ("tx_index", "kind", "origin", "sub_index", "user", "lambda", "q", "nulling_set")

    def write_csv(self, fh: TextIO) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(Schedule.CSV_COLUMNS)
        for i, tx in enumerate(self.transmissions, start=1):
            origin = "-".join(str(x) for x in tx.origin)
            for s in tx.streams:
                writer.writerow([
                    i, tx.kind.value, origin, tx.sub_index, s.user,
                    "-".join(str(p) for p in s.lam), s.q,
                    ";".join(str(u) for u in sorted(s.nulling_set)),
                ])


@dataclass(frozen=True)
class ScheduleOptions:
    efficient_multicast: bool = False


class Triple(NamedTuple):
    r: int
    c: int
    l: int
    silent: bool = False


class Quintuple(NamedTuple):
    r: int
    c: int
    l: int
    m: int
    s: int


class SubpacketCounter:
    """
    Sequential q counters per (user, lam). Every take() hands out the next
    unused index so that no subpacket is scheduled twice.
    """

    def __init__(self, S: int) -> None:
        self.S = S
        self._next: dict[tuple[int, tuple[int, ...]], int] = {}

    def take(self, user: int, lam: tuple[int, ...]) -> int:
        q = self._next.get((user, lam), 0) + 1
        if q > self.S:
            raise CounterExhausted("user {} lambda {} asked for subpacket {} > S={}".format(user, lam, q, self.S))
        self._next[(user, lam)] = q
        return q

    def used(self, user: int, lam: tuple[int, ...]) -> int:
        return self._next.get((user, lam), 0)


#
# Strategy A
#

def elevate_A(assoc: Association) -> dict[int, list[tuple[int, ...]]]:
    """
    Window lists S_p for every profile, each of length eta_hat:

        delta_p <= beta :  beta copies of V_p
        delta_p >  beta :  delta_p circular windows of size beta,
                           window j = (v_j, v_{j+1}, ..., v_{j+beta-1})  (1-based, wrapping)

    followed by empty windows up to eta_hat.
    """
    beta, eta_hat = assoc.beta, assoc.eta_hat
    windows = {}
    for p in range(1, assoc.P + 1):
        V = assoc.V(p)
        delta = len(V)
        if delta <= beta:
            rows = [V] * beta
        else:
            rows = [tuple(V[mod1(i + j - 1, delta) - 1] for i in range(1, beta + 1))
                    for j in range(1, delta + 1)]
        rows += [()] * (eta_hat - len(rows))
        windows[p] = rows
    return windows


def enumerate_triples(assoc: Association, Q: int) -> list[Triple]:
    """
    (r, c, l) with r in [P-Q+1], c in [phi_r] and l indexing the
    lexicographic (Q-1)-subsets of {r+1, ..., P}. Triples with delta_r = 0
    carry silent=True.
    """
    P = assoc.P
    triples = []
    for r in range(1, P - Q + 2):
        silent = assoc.delta[r - 1] == 0
        for c in range(1, assoc.phi[r - 1] + 1):
            for l in range(1, math.comb(P - r, Q - 1) + 1):
                triples.append(Triple(r, c, l, silent))
    return triples


@lru_cache(maxsize=None)
def _subsets(pool: tuple[int, ...], size: int) -> tuple[tuple[int, ...], ...]:
    return tuple(combinations(pool, size))


def triple_profiles(triple: Triple, P: int, Q: int) -> tuple[int, ...]:
    """N = {r} union M_r(l)."""
    M = _subsets(tuple(range(triple.r + 1, P + 1)), Q - 1)[triple.l - 1]
    return (triple.r,) + M


def build_tx_A(triple: Triple,
               counters: SubpacketCounter,
               cfg: NetworkConfig,
               assoc: Association,
               windows: Mapping[int, list[tuple[int, ...]]] = None) -> list[Transmission]:
    """
    Serves the c-th windows of the profiles in N. A user k of profile p
    receives one stream per t-subset lam of N - {p}; the j-th such subset
    (lexicographic) goes to sub-transmission j, so every sub-transmission
    carries exactly one stream per served user.

    The beam of (k, lam) nulls every other user in the windows of N - lam.
    """
    if triple.silent:
        return []
    windows = windows if windows is not None else elevate_A(assoc)
    t = cfg.t_bar
    N = triple_profiles(triple, assoc.P, cfg.Q)
    rows = {p: windows[p][triple.c - 1] for p in N}
    served = [(k, p) for p in N for k in rows[p]]

    subs: list[list[Stream]] = [[] for _ in range(cfg.nu2)]
    for k, p in served:
        others = tuple(x for x in N if x != p)
        for j, lam in enumerate(combinations(others, t)):
            interferers = {u for x in N if x not in lam for u in rows[x]}
            interferers.discard(k)
            q = counters.take(k, lam)
            subs[j].append(Stream(k, lam, q, frozenset(interferers), p))

    return [Transmission(TxKind.CC_A, tuple(triple[:3]), j, tuple(streams))
            for j, streams in enumerate(subs, start=1) if streams]


#
# Strategy B
#

def padded_profile(assoc: Association, r: int) -> list[Optional[int]]:
    """Y_r: V_r followed by phantom users up to eta_hat."""
    V = list(assoc.V(r))
    return V + [PHANTOM] * (assoc.eta_hat - len(V))


def e_set(assoc: Association, r: int, m: int, theta: int) -> list[Optional[int]]:
    """E_r^m = { Y_r((i + m) mod1 eta_hat) : i = 0 .. theta-1 }."""
    Y = padded_profile(assoc, r)
    return [Y[mod1(i + m, assoc.eta_hat) - 1] for i in range(theta)]


def other_profiles(assoc: Association, r: int) -> list[int]:
    """P_bar_r: profiles other than r by descending delta, ties by index."""
    return sorted((p for p in range(1, assoc.P + 1) if p != r),
                  key=lambda p: (-assoc.delta[p - 1], p))


def quintuple_groups(assoc: Association, r: int, c: int, l: int, Q: int) -> tuple[int, tuple[int, ...]]:
    """
    Returns (delta_bar_c, I_c^r(l)): the leading profile and the l-th
    lexicographic (Q-2)-subset of the profiles after it in P_bar_r.
    """
    Pbar = other_profiles(assoc, r)
    return Pbar[c - 1], _subsets(tuple(Pbar[c:]), Q - 2)[l - 1]


def iplus(assoc: Association, lead: int, E: Iterable[Optional[int]]) -> bool:
    """False only when E is all phantoms and the leading profile is empty."""
    return any(u is not PHANTOM for u in E) or assoc.delta[lead - 1] > 0


def enumerate_quintuples(assoc: Association, cfg: NetworkConfig) -> list[Quintuple]:
    P, Q = assoc.P, cfg.Q
    out = []
    for r in range(1, P + 1):
        for c in range(1, P - Q + 2):
            for l in range(1, math.comb(P - c - 1, Q - 2) + 1):
                for m in range(1, assoc.eta_hat + 1):
                    for s in range(1, cfg.nu2 + 1):
                        out.append(Quintuple(r, c, l, m, s))
    return out


def build_tx_B(quintuple: Quintuple,
               counters: SubpacketCounter,
               cfg: NetworkConfig,
               assoc: Association) -> list[Transmission]:
    """
    Merges theta users of profile r (E_r^m, padded with phantoms) with
    floor(alpha/eta_hat) whole profiles B(n) of G = {lead} + I, n in [nu2].

    The member sequence of u in E is u repeated nu1 times and then phantoms,
    read with shift s:  K_s(n) = K((n + s - 1) mod1 nu2).  Group n serves

        C(n) = {u in E : K_s(n) = u}  +  users of the profiles in B(n)

    with lam(n) = G - B(n). Each user sits in nu1 groups; its j-th group
    (by n) goes to sub-transmission j. Beams null the real users of E and
    of B(n) except the target.
    """
    r, c, l, m, s = quintuple
    theta, nu1, nu2 = cfg.theta, cfg.nu1, cfg.nu2
    E = e_set(assoc, r, m, theta)
    lead, I = quintuple_groups(assoc, r, c, l, cfg.Q)
    if not iplus(assoc, lead, E):
        return []

    G = tuple(sorted((lead,) + I))
    width = cfg.alpha // cfg.eta_hat
    blocks = list(combinations(G, width))

    real_E = [u for u in E if u is not PHANTOM]
    per_user: dict[int, list[Stream]] = {}
    order: list[tuple[int, int]] = []
    for n, block in enumerate(blocks, start=1):
        lam = tuple(p for p in G if p not in block)
        members = []
        idx = mod1(n + s - 1, nu2)
        if idx <= nu1:
            members += [(u, r) for u in real_E]
        members += [(k, b) for b in block for k in assoc.V(b)]
        nulled = set(real_E) | {k for b in block for k in assoc.V(b)}
        for k, p in members:
            q = counters.take(k, lam)
            if k not in per_user:
                per_user[k] = []
            per_user[k].append(Stream(k, lam, q, frozenset(nulled - {k}), p))
            order.append((n, k))

    subs: list[list[Stream]] = [[] for _ in range(nu1)]
    seen: dict[int, int] = {}
    for n, k in order:
        j = seen.get(k, 0)
        seen[k] = j + 1
        subs[j].append(per_user[k][j])

    return [Transmission(TxKind.CC_B, tuple(quintuple), j, tuple(streams))
            for j, streams in enumerate(subs, start=1) if streams]


#
# Unicast step
#

def uc_schedule(missing: Mapping[int, list[SubpacketId]],
                alpha: int,
                profile_of: Mapping[int, int] = None) -> list[Transmission]:
    """
    Greedy unicast: each round sorts users by remaining subpackets
    (descending, ties by id) and sends one subpacket to each of the first
    min(alpha, #users) users. Beams null all other users of the round.
    """
    profile_of = profile_of or {}
    queues = {k: deque(v) for k, v in missing.items() if v}
    out = []
    rnd = 0
    while queues:
        rnd += 1
        chosen = sorted(queues, key=lambda k: (-len(queues[k]), k))[:alpha]
        group = frozenset(chosen)
        streams = []
        for k in chosen:
            sp = queues[k].popleft()
            streams.append(Stream(k, sp.lam, sp.q, group - {k}, profile_of.get(k, 0)))
            if not queues[k]:
                del queues[k]
        out.append(Transmission(TxKind.UC, (rnd,), 1, tuple(streams)))
    return out


def _cc_transmissions(cfg: NetworkConfig, assoc: Association, counters: SubpacketCounter) -> Iterable[Transmission]:
    if cfg.strategy is Strategy.A:
        windows = elevate_A(assoc)
        for triple in enumerate_triples(assoc, cfg.Q):
            yield from build_tx_A(triple, counters, cfg, assoc, windows)
    else:
        for quintuple in enumerate_quintuples(assoc, cfg):
            yield from build_tx_B(quintuple, counters, cfg, assoc)


def full_schedule(cfg: NetworkConfig,
                  assoc: Association,
                  opts: ScheduleOptions = ScheduleOptions()) -> Schedule:
    """
    CC step with the configured strategy, then the unicast step for the
    excluded users plus anything the CC step did not deliver.
    """
    if assoc.P != cfg.num_profiles:
        raise ConstraintViolation("association has {} profiles, config has P={}".format(assoc.P, cfg.num_profiles))
    if (assoc.eta_hat, assoc.beta) != (cfg.eta_hat, cfg.beta):
        assoc = assoc.with_delivery(cfg.eta_hat, cfg.beta)

    placement = Placement(cfg, assoc)
    counters = SubpacketCounter(placement.S)
    kept: list[Transmission] = []
    rerouted: list[SubpacketId] = []
    for tx in _cc_transmissions(cfg, assoc, counters):
        if opts.efficient_multicast and len(tx.served_users) < cfg.alpha:
            rerouted.extend(s.subpacket for s in tx.streams)
            continue
        kept.append(tx)
    if rerouted:
        logger.warning("efficient multicast rerouted %d subpackets to unicast", len(rerouted))

    residual: list[SubpacketId] = []
    for p in range(1, assoc.P + 1):
        for k in assoc.V(p):
            for lam in placement.index.excluding(p):
                for q in range(counters.used(k, lam) + 1, placement.S + 1):
                    residual.append(SubpacketId(k, lam, q))
    if residual:
        logger.warning("CC step left %d subpackets undelivered, moved to unicast", len(residual))

    missing: dict[int, list[SubpacketId]] = {k: placement.missing_subpackets(k) for k in assoc.excluded}
    for sp in sorted(rerouted + residual):
        missing.setdefault(sp.user, []).append(sp)

    uc = uc_schedule(missing, cfg.alpha, assoc.profile_of)
    schedule = Schedule(
        transmissions=tuple(kept) + tuple(uc),
        residual_log=tuple(residual),
        rerouted=tuple(rerouted),
        S=placement.S,
        per_file=placement.per_file,
    )
    logger.info("schedule strategy=%s T_M=%d J_M=%d T_U=%d J_U=%d",
                cfg.strategy.value, schedule.T_M, schedule.J_M, schedule.T_U, schedule.J_U)
    return schedule
