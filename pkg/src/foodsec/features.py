"""Per-user features from call and top-up streams.

Three measures per user: a home tower (the tower with the most night-time
originating calls, 18:00-08:00 local by default), top-up statistics over the
observation period (sum, mean, min, max, count as exact decimals), and social
diversity (normalized Shannon entropy of how the user's call volume spreads
over their contacts).

Everything here is order-independent: processing the same records in any
order, or in any partitioning merged afterwards, yields identical output.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, time, timedelta
from decimal import Decimal
from typing import Iterable, Mapping

from .ingest import CallRecord, FormatError, TopUpRecord, TowerSectorMap

log = logging.getLogger(__name__)

DEFAULT_NIGHT_WINDOW = (time(18, 0), time(8, 0))

USER_FEATURE_HEADER = [
    "user_id",
    "home_sector",
    "topup_sum",
    "topup_mean",
    "topup_min",
    "topup_max",
    "topup_count",
    "social_diversity",
]


class NoHomeError(ValueError):
    """User has no calls, so no home tower can be assigned."""


@dataclass(frozen=True)
class FeatureConfig:
    night_window: tuple[time, time] = DEFAULT_NIGHT_WINDOW
    home_hours: str = "night"  # "night" (day calls ignored, all-hours fallback) or "all"
    diversity_direction: str = "both"  # count "both" call directions or "out" only
    utc_offset_minutes: int = 0  # local wall clock = UTC + offset

    def __post_init__(self):
        if self.home_hours not in ("night", "all"):
            raise ValueError(f"home_hours must be 'night' or 'all', not {self.home_hours!r}")
        if self.diversity_direction not in ("both", "out"):
            raise ValueError("diversity_direction must be 'both' or 'out'")


@dataclass(frozen=True)
class UserFeatureVector:
    user_id: str
    home_sector: str
    topup_sum: Decimal
    topup_mean: Decimal
    topup_min: Decimal
    topup_max: Decimal
    topup_count: int
    social_diversity: float | None


def in_night_window(t: time, window: tuple[time, time] = DEFAULT_NIGHT_WINDOW) -> bool:
    """Half-open [start, end) check; a window with start > end wraps midnight."""
    start, end = window
    if start <= end:
        return start <= t < end
    return t >= start or t < end


def assign_home_tower(
    calls: Iterable[CallRecord],
    night_window: tuple[time, time] = DEFAULT_NIGHT_WINDOW,
    utc_offset_minutes: int = 0,
    home_hours: str = "night",
) -> str:
    """Home tower for one user's originating calls.

    The tower with the most calls whose local time-of-day falls in the night
    window wins; a user with zero night calls falls back to the all-hours
    maximum. Ties break to the lexicographically smallest tower_id so the
    result never depends on input order.
    """
    night: Counter[str] = Counter()
    all_hours: Counter[str] = Counter()
    offset = timedelta(minutes=utc_offset_minutes)
    for rec in calls:
        all_hours[rec.tower_id] += 1
        if in_night_window((rec.timestamp + offset).time(), night_window):
            night[rec.tower_id] += 1
    if not all_hours:
        raise NoHomeError("no calls: cannot assign a home tower")
    counts = night if (home_hours == "night" and night) else all_hours
    return min(counts, key=lambda tower: (-counts[tower], tower))


def topup_features(
    topups: Iterable[TopUpRecord],
    period: tuple[datetime, datetime] | None = None,
) -> tuple[Decimal, Decimal, Decimal, Decimal, int]:
    """(sum, mean, min, max, count) of one user's top-up amounts.

    The sum is exact decimal arithmetic; mean = sum / count. Raises
    ``ValueError`` on an empty stream (the user is excluded upstream) or on
    a record outside ``period`` when one is given.
    """
    total = Decimal(0)
    count = 0
    lo = hi = None
    for rec in topups:
        if period is not None and not (period[0] <= rec.timestamp < period[1]):
            raise ValueError(f"top-up at {rec.timestamp} outside observation period")
        total += rec.amount
        count += 1
        if lo is None or rec.amount < lo:
            lo = rec.amount
        if hi is None or rec.amount > hi:
            hi = rec.amount
    if count == 0:
        raise ValueError("no top-ups")
    return total, total / count, lo, hi, count


def social_diversity(volumes: Mapping[str, int]) -> float:
    """Shannon entropy of the contact-volume distribution, normalized to [0, 1].

    With k contacts and volume shares p_j, this is -sum(p_j * log p_j) / log k.
    A single contact has no diversity and is defined as 0 (the normalizer is
    0 there). The log base cancels; base 2 is used internally.
    """
    k = len(volumes)
    if k == 0:
        raise ValueError("no contacts")
    total = 0
    for v in volumes.values():
        if v <= 0:
            raise ValueError("contact volumes must be >= 1")
        total += v
    if k == 1:
        return 0.0
    entropy = 0.0
    for v in volumes.values():
        p = v / total
        entropy -= p * math.log2(p)
    d = entropy / math.log2(k)
    return min(max(d, 0.0), 1.0)


@dataclass
class FeatureAccumulator:
    """Order- and partition-independent accumulator for user features.

    Feed any number of record batches via :meth:`update_calls` /
    :meth:`update_topups`; independent accumulators over a partition of the
    input can be combined with :meth:`merge`. :meth:`finalize` emits one
    vector per user with at least one originating call and one top-up.
    """

    config: FeatureConfig = field(default_factory=FeatureConfig)
    night_counts: dict[str, Counter] = field(default_factory=dict)
    all_counts: dict[str, Counter] = field(default_factory=dict)
    volumes: dict[str, Counter] = field(default_factory=dict)
    topup_sums: dict[str, Decimal] = field(default_factory=dict)
    topup_mins: dict[str, Decimal] = field(default_factory=dict)
    topup_maxs: dict[str, Decimal] = field(default_factory=dict)
    topup_counts: dict[str, int] = field(default_factory=dict)

    def update_calls(self, records: Iterable[CallRecord]) -> None:
        cfg = self.config
        window = cfg.night_window
        offset = timedelta(minutes=cfg.utc_offset_minutes)
        zero_offset = cfg.utc_offset_minutes == 0
        both = cfg.diversity_direction == "both"
        night_counts = self.night_counts
        all_counts = self.all_counts
        volumes = self.volumes
        start, end = window
        wraps = start > end
        for rec in records:
            caller = rec.caller_id
            tower = rec.tower_id
            towers = all_counts.get(caller)
            if towers is None:
                towers = all_counts[caller] = Counter()
            towers[tower] += 1
            t = rec.timestamp.time() if zero_offset else (rec.timestamp + offset).time()
            if (t >= start or t < end) if wraps else (start <= t < end):
                towers = night_counts.get(caller)
                if towers is None:
                    towers = night_counts[caller] = Counter()
                towers[tower] += 1
            contacts = volumes.get(caller)
            if contacts is None:
                contacts = volumes[caller] = Counter()
            contacts[rec.callee_id] += 1
            if both:
                contacts = volumes.get(rec.callee_id)
                if contacts is None:
                    contacts = volumes[rec.callee_id] = Counter()
                contacts[caller] += 1

    def update_topups(self, records: Iterable[TopUpRecord]) -> None:
        sums = self.topup_sums
        mins = self.topup_mins
        maxs = self.topup_maxs
        counts = self.topup_counts
        for rec in records:
            user = rec.user_id
            amount = rec.amount
            if user in sums:
                sums[user] += amount
                counts[user] += 1
                if amount < mins[user]:
                    mins[user] = amount
                if amount > maxs[user]:
                    maxs[user] = amount
            else:
                sums[user] = amount
                mins[user] = amount
                maxs[user] = amount
                counts[user] = 1

    def merge(self, other: "FeatureAccumulator") -> None:
        if other.config != self.config:
            raise ValueError("cannot merge accumulators with different configs")
        for target, source in (
            (self.night_counts, other.night_counts),
            (self.all_counts, other.all_counts),
            (self.volumes, other.volumes),
        ):
            for key, counter in source.items():
                if key in target:
                    target[key].update(counter)
                else:
                    target[key] = Counter(counter)
        for user, amount in other.topup_sums.items():
            if user in self.topup_sums:
                self.topup_sums[user] += amount
                self.topup_counts[user] += other.topup_counts[user]
                self.topup_mins[user] = min(self.topup_mins[user], other.topup_mins[user])
                self.topup_maxs[user] = max(self.topup_maxs[user], other.topup_maxs[user])
            else:
                self.topup_sums[user] = amount
                self.topup_counts[user] = other.topup_counts[user]
                self.topup_mins[user] = other.topup_mins[user]
                self.topup_maxs[user] = other.topup_maxs[user]

    def finalize(
        self, tower_map: TowerSectorMap
    ) -> tuple[list[UserFeatureVector], Counter]:
        """One vector per user with calls and top-ups, sorted by user_id.

        Exclusion counts: ``no_topups`` (calls only), ``no_calls`` (top-ups
        only), ``unmapped_home_tower`` (home tower absent from the map).
        """
        exclusions: Counter = Counter()
        out: list[UserFeatureVector] = []
        callers = self.all_counts
        for user in sorted(set(callers) | set(self.topup_sums)):
            towers = callers.get(user)
            if towers is None:
                exclusions["no_calls"] += 1
                continue
            if user not in self.topup_sums:
                exclusions["no_topups"] += 1
                continue
            night = self.night_counts.get(user)
            counts = night if (self.config.home_hours == "night" and night) else towers
            home_tower = min(counts, key=lambda t: (-counts[t], t))
            sector = tower_map.get(home_tower)
            if sector is None:
                exclusions["unmapped_home_tower"] += 1
                continue
            total = self.topup_sums[user]
            count = self.topup_counts[user]
            contacts = self.volumes.get(user)
            diversity = social_diversity(contacts) if contacts else None
            out.append(
                UserFeatureVector(
                    user_id=user,
                    home_sector=sector,
                    topup_sum=total,
                    topup_mean=total / count,
                    topup_min=self.topup_mins[user],
                    topup_max=self.topup_maxs[user],
                    topup_count=count,
                    social_diversity=diversity,
                )
            )
        return out, exclusions


def build_user_features(
    cdr: Iterable[CallRecord],
    topups: Iterable[TopUpRecord],
    tower_map: TowerSectorMap,
    config: FeatureConfig | None = None,
) -> tuple[list[UserFeatureVector], Counter]:
    acc = FeatureAccumulator(config or FeatureConfig())
    acc.update_calls(cdr)
    acc.update_topups(topups)
    return acc.finalize(tower_map)


def write_user_features(features: Iterable[UserFeatureVector], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(USER_FEATURE_HEADER) + "\n")
        for v in features:
            diversity = "" if v.social_diversity is None else repr(v.social_diversity)
            f.write(
                f"{v.user_id},{v.home_sector},{v.topup_sum},{v.topup_mean},"
                f"{v.topup_min},{v.topup_max},{v.topup_count},{diversity}\n"
            )


def read_user_features(path) -> list[UserFeatureVector]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != USER_FEATURE_HEADER:
            raise FormatError(f"user_features: unexpected header {header}")
        out = []
        for row in reader:
            if not row:
                continue
            out.append(
                UserFeatureVector(
                    user_id=row[0],
                    home_sector=row[1],
                    topup_sum=Decimal(row[2]),
                    topup_mean=Decimal(row[3]),
                    topup_min=Decimal(row[4]),
                    topup_max=Decimal(row[5]),
                    topup_count=int(row[6]),
                    social_diversity=None if row[7] == "" else float(row[7]),
                )
            )
        return out
