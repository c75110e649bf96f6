import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

from .errors import EmptySchedule
from .model import Association
from .placement import Placement, SubpacketId
from .scheduler import Schedule

logger = logging.getLogger(__name__)


class Violation(NamedTuple):
    tx_index: int
    user: int
    kind: str
    detail: str


@dataclass
class DecodeReport:
    checked: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "checked": self.checked,
            "ok": self.ok,
            "violations": [v._asdict() for v in self.violations],
        }


@dataclass
class CoverageReport:
    delivered: int = 0
    demanded: int = 0
    gaps: list[SubpacketId] = field(default_factory=list)
    duplicates: list[SubpacketId] = field(default_factory=list)
    unexpected: list[SubpacketId] = field(default_factory=list)
    per_user: dict[int, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not (self.gaps or self.duplicates or self.unexpected)

    def as_dict(self) -> dict:
        return {
            "delivered": self.delivered,
            "demanded": self.demanded,
            "ok": self.ok,
            "gaps": [list(x) for x in self.gaps],
            "duplicates": [list(x) for x in self.duplicates],
            "unexpected": [list(x) for x in self.unexpected],
        }


def decode_check(schedule: Schedule, placement: Placement, assoc: Association) -> DecodeReport:
    """
    Symbolic decodability: in every transmission each served user must be
    the target of exactly one stream, and every other stream must either
    null that user or carry a mini-file the user's profile caches.
    """
    profile_of = assoc.profile_of
    report = DecodeReport()
    for i, tx in enumerate(schedule.transmissions, start=1):
        targets = Counter(s.user for s in tx.streams)
        for k in sorted(targets):
            report.checked += 1
            if targets[k] != 1:
                report.violations.append(Violation(i, k, "multiple", "{} streams target user {}".format(targets[k], k)))
            p = profile_of[k]
            for s in tx.streams:
                if s.user == k:
                    if p in s.lam:
                        report.violations.append(Violation(i, k, "cached", "user already caches {}".format(s.lam)))
                    continue
                if k not in s.nulling_set and p not in s.lam:
                    report.violations.append(
                        Violation(i, k, "visible", "stream of user {} lam {} leaks".format(s.user, s.lam)))
    if report.violations:
        logger.warning("decode check found %d violations", len(report.violations))
    return report


def coverage_check(schedule: Schedule, placement: Placement) -> CoverageReport:
    """Delivered (user, lam, q) multiset against the demanded one."""
    demanded = {sp for subs in placement.demanded().values() for sp in subs}
    delivered = Counter(s.subpacket for tx in schedule.transmissions for s in tx.streams)

    report = CoverageReport(delivered=sum(delivered.values()), demanded=len(demanded))
    report.gaps = sorted(demanded - delivered.keys())
    report.duplicates = sorted(sp for sp, n in delivered.items() if n > 1)
    report.unexpected = sorted(sp for sp in delivered if sp not in demanded)
    per_user: Counter = Counter()
    for sp, n in delivered.items():
        per_user[sp.user] += n
    report.per_user = dict(per_user)
    if not report.ok:
        logger.warning("coverage check: %d gaps, %d duplicates, %d unexpected",
                       len(report.gaps), len(report.duplicates), len(report.unexpected))
    return report


def count_dof(schedule: Schedule) -> Fraction:
    """(J_M + J_U) / (T_M + T_U) as an exact rational."""
    total = len(schedule.transmissions)
    if total == 0:
        raise EmptySchedule("schedule has no transmissions")
    return Fraction(sum(len(tx.streams) for tx in schedule.transmissions), total)
