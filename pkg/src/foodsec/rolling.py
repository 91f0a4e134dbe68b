"""Rolling-window top-up expenditure series per sector.

For every day-aligned window of ``window_days`` days that fits inside the
observation period, the series value is the sum of top-ups made by the
sector's users inside the window, divided by the number of the sector's
users with at least one top-up anywhere in the period (so the denominator
does not jump between windows; a config switch changes it to per-window
active users). The point is labeled with the window's middle day: a 30-day
window starting 1 Dec is labeled 15 Dec.

Sums are exact decimal arithmetic over daily buckets, so the incremental
slide (add the entering day, subtract the leaving day) equals a naive
per-window recomputation bit for bit.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import date, timedelta
from decimal import Decimal
from typing import Iterable, Mapping

from .ingest import FormatError, TopUpRecord, _open_text, format_number

log = logging.getLogger(__name__)

ROLLING_HEADER = ["sector_id", "label_date", "value", "n_users"]
OVERLAY_HEADER = ["date", "source", "label", "value"]
DEFAULT_WINDOW_DAYS = 30


@dataclass(frozen=True)
class SectorSeries:
    sector_id: str
    window_days: int
    n_users: int
    points: tuple[tuple[date, Decimal], ...]  # (label_date, value), daily step


def window_label(start: date, window_days: int) -> date:
    """Middle-of-window label: day ceil(w/2) of the window, so a 30-day
    window over the 1st..30th is labeled the 15th."""
    return start + timedelta(days=(window_days + 1) // 2 - 1)


def rolling_sector_series(
    topups: Iterable[TopUpRecord],
    home: Mapping[str, str],
    period: tuple[date, date] | None = None,
    window_days: int = DEFAULT_WINDOW_DAYS,
    denominator: str = "period",
) -> list[SectorSeries]:
    """Per-sector rolling expenditure series.

    ``home`` maps user_id to home sector; top-ups from users without a home
    are skipped (and counted in a warning). ``period`` is [start, end) in
    whole days and must cover at least one window; when omitted it is
    inferred as the day span of the observed top-ups. ``denominator`` is
    ``"period"`` (users with >= 1 top-up anywhere, the default) or
    ``"window"`` (users active inside each window).
    """
    if window_days < 1:
        raise ValueError("window_days must be >= 1")
    if denominator not in ("period", "window"):
        raise ValueError("denominator must be 'period' or 'window'")

    zero = Decimal(0)
    daily: dict[str, dict[date, Decimal]] = {}
    active: dict[str, set[str]] = {}
    daily_users: dict[str, dict[date, set[str]]] = {}
    seen_min: date | None = None
    seen_max: date | None = None
    skipped = 0
    for rec in topups:
        sector = home.get(rec.user_id)
        if sector is None:
            skipped += 1
            continue
        day = rec.timestamp.date()
        if period is not None and not (period[0] <= day < period[1]):
            raise ValueError(f"top-up at {rec.timestamp} outside the observation period")
        if seen_min is None or day < seen_min:
            seen_min = day
        if seen_max is None or day > seen_max:
            seen_max = day
        buckets = daily.get(sector)
        if buckets is None:
            buckets = daily[sector] = {}
            active[sector] = set()
            daily_users[sector] = {}
        buckets[day] = buckets.get(day, zero) + rec.amount
        active[sector].add(rec.user_id)
        if denominator == "window":
            daily_users[sector].setdefault(day, set()).add(rec.user_id)
    if skipped:
        log.warning("rolling: %d top-up(s) from users without a home sector skipped", skipped)

    if period is None:
        if seen_min is None:
            return []
        period = (seen_min, seen_max + timedelta(days=1))
    start, end = period
    n_days = (end - start).days
    if n_days < window_days:
        raise ValueError(f"period of {n_days} day(s) shorter than the {window_days}-day window")

    n_windows = n_days - window_days + 1
    series: list[SectorSeries] = []
    for sector in sorted(daily):
        n_users = len(active[sector])
        if n_users == 0:
            continue
        by_day = daily[sector]
        buckets = [by_day.get(start + timedelta(days=d), zero) for d in range(n_days)]
        user_sets = None
        if denominator == "window":
            by_day_users = daily_users[sector]
            user_sets = [
                by_day_users.get(start + timedelta(days=d), frozenset()) for d in range(n_days)
            ]
        points: list[tuple[date, Decimal]] = []
        window_sum = sum(buckets[:window_days], zero)
        for w in range(n_windows):
            if w > 0:
                window_sum += buckets[w + window_days - 1] - buckets[w - 1]
            if user_sets is not None:
                count = len(set().union(*user_sets[w : w + window_days]))
                value = window_sum / count if count else zero
            else:
                value = window_sum / n_users
            points.append((window_label(start + timedelta(days=w), window_days), value))
        series.append(
            SectorSeries(
                sector_id=sector,
                window_days=window_days,
                n_users=n_users,
                points=tuple(points),
            )
        )
    return series


def write_rolling(series: Iterable[SectorSeries], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(ROLLING_HEADER) + "\n")
        for s in series:
            for label, value in s.points:
                f.write(f"{s.sector_id},{label.isoformat()},{value},{s.n_users}\n")


def load_stock_series(source) -> list[tuple[date, str, float]]:
    """External food-stock overlay input: ``date,label,percentage`` rows.
    Any unparsable content is fatal (the overlay is optional but never
    silently wrong)."""
    handle, owned = _open_text(source)
    try:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["date", "label", "percentage"]:
            raise FormatError(f"stock series: unexpected header {header}")
        out: list[tuple[date, str, float]] = []
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(f"stock series: malformed row at line {reader.line_num}")
            try:
                out.append((date.fromisoformat(row[0]), row[1], float(row[2])))
            except ValueError as exc:
                raise FormatError(f"stock series: line {reader.line_num}: {exc}")
        return out
    finally:
        if owned:
            handle.close()


def emit_overlay(
    series: Iterable[SectorSeries],
    path,
    stock_rows: Iterable[tuple[date, str, float]] | None = None,
) -> None:
    """Merged long-format file for side-by-side external plotting. No
    statistics are computed across the two sources."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(OVERLAY_HEADER) + "\n")
        for s in series:
            for label_date, value in s.points:
                f.write(f"{label_date.isoformat()},topup_rolling,{s.sector_id},{value}\n")
        if stock_rows is not None:
            for d, label, value in stock_rows:
                f.write(f"{d.isoformat()},food_stock,{label},{format_number(value)}\n")
