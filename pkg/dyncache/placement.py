import math
from functools import cached_property
from itertools import combinations
from typing import NamedTuple

from .model import Association, NetworkConfig, Strategy


class SubpacketId(NamedTuple):
    user: int
    lam: tuple[int, ...]
    q: int


class MiniFileIndex:
    """
    All t-subsets of the profiles [P] in lexicographic order. Each file is
    split into one mini-file per subset and profile p caches every
    mini-file whose subset contains p.

    Ranks are 1-based:

        P=4, t=2:   1:(1,2) 2:(1,3) 3:(1,4) 4:(2,3) 5:(2,4) 6:(3,4)
    """

    def __init__(self, P: int, t_bar: int) -> None:
        self.P = P
        self.t_bar = t_bar

    @cached_property
    def subsets(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self)

    @property
    def count(self) -> int:
        return math.comb(self.P, self.t_bar)

    def __len__(self) -> int:
        return self.count

    def __iter__(self):
        return combinations(range(1, self.P + 1), self.t_bar)

    def rank(self, subset: tuple[int, ...]) -> int:
        r = 1
        prev = 0
        k = len(subset)
        for i, c in enumerate(subset):
            for skipped in range(prev + 1, c):
                r += math.comb(self.P - skipped, k - i - 1)
            prev = c
        return r

    def unrank(self, r: int) -> tuple[int, ...]:
        if not 1 <= r <= self.count:
            raise IndexError("rank {} outside [1, {}]".format(r, self.count))
        out = []
        n, k, offset = self.P, self.t_bar, 1
        while k > 0:
            first = math.comb(n - 1, k - 1)
            if r <= first:
                out.append(offset)
                k -= 1
            else:
                r -= first
            n -= 1
            offset += 1
        return tuple(out)

    def containing(self, p: int) -> list[tuple[int, ...]]:
        return [s for s in self.subsets if p in s]

    def excluding(self, p: int) -> list[tuple[int, ...]]:
        return [s for s in self.subsets if p not in s]


def subpacketization(cfg: NetworkConfig, assoc: Association = None) -> int:
    """
    Subpackets per mini-file:

        S_A = beta * C(P-t-1, Q-t-1)
        S_B = (eta_hat*t + alpha) * C(P-t-1, Q-t-1) * C(Q-2, Q-t-2)
    """
    P, t, Q = cfg.num_profiles, cfg.t_bar, cfg.Q
    base = math.comb(P - t - 1, Q - t - 1)
    if cfg.strategy is Strategy.A:
        return cfg.beta * base
    return (cfg.eta_hat * t + cfg.alpha) * base * cfg.nu1


class Placement:

    def __init__(self, cfg: NetworkConfig, assoc: Association) -> None:
        self.cfg = cfg
        self.assoc = assoc
        self.index = MiniFileIndex(cfg.num_profiles, cfg.t_bar)
        self.S = subpacketization(cfg, assoc)

    @property
    def per_file(self) -> int:
        """Total subpackets per file, C(P, t) * S. This is mu in the rate aggregate."""
        return self.index.count * self.S

    def cache_contents(self, p: int) -> list[tuple[int, ...]]:
        return self.index.containing(p)

    def missing_subpackets(self, k: int) -> list[SubpacketId]:
        return Placement.missing_for_profile(self.index, k, self.assoc.profile_of[k], self.S)

    def demanded(self) -> dict[int, list[SubpacketId]]:
        return {k: self.missing_subpackets(k) for k in sorted(self.assoc.profile_of)}

    @staticmethod
    def missing_for_profile(index: MiniFileIndex, k: int, p: int, S: int) -> list[SubpacketId]:
        return [SubpacketId(k, lam, q) for lam in index.excluding(p) for q in range(1, S + 1)]
