"""Sector-level aggregation of user feature vectors.

Groups users by home sector and reduces each feature column with mean,
median, sample standard deviation, and coefficient of variation. The result
is a :class:`SectorMatrix`, the row-per-sector / column-per-variable shape
shared with the survey side; NaN cells mark undefined values (never zero)
so downstream correlation can exclude them pairwise.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .features import UserFeatureVector
from .ingest import FormatError, format_number

log = logging.getLogger(__name__)

AGGREGATORS = ("mean", "median", "std", "cv")
USER_FEATURES = ("topup_sum", "topup_mean", "topup_min", "topup_max", "social_diversity")
DEFAULT_MIN_USERS = 30


@dataclass
class SectorMatrix:
    """Rows = sectors, columns = named variables, plus a per-sector count.

    ``values`` is float64 with NaN marking undefined cells.
    """

    sectors: list[str]
    columns: list[str]
    values: np.ndarray
    counts: np.ndarray

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def __len__(self) -> int:
        return len(self.sectors)


def aggregate_sector(values: Sequence[float], aggregators: Iterable[str] = AGGREGATORS) -> dict:
    """Reduce one sector's values; undefined results come back as None.

    std uses the sample (n-1) denominator, so it needs n >= 2; cv = std/mean
    is undefined when the mean is 0. The median of an even count is the
    midpoint of the two middle values.
    """
    arr = np.asarray([float(v) for v in values], dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empty sector")
    out: dict[str, float | None] = {}
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size >= 2 else None
    for agg in aggregators:
        if agg == "mean":
            out[agg] = mean
        elif agg == "median":
            out[agg] = float(np.median(arr))
        elif agg == "std":
            out[agg] = std
        elif agg == "cv":
            out[agg] = None if (std is None or mean == 0.0) else std / mean
        else:
            raise ValueError(f"unknown aggregator {agg!r}")
    return out


def build_sector_matrix(
    features: Iterable[UserFeatureVector],
    min_users: int = DEFAULT_MIN_USERS,
    aggregators: Sequence[str] = AGGREGATORS,
    feature_names: Sequence[str] = USER_FEATURES,
    columns: Sequence[str] | None = None,
) -> tuple[SectorMatrix, dict[str, int]]:
    """Sector x mobile-variable matrix from user feature vectors.

    Sectors with fewer than ``min_users`` users are excluded and returned in
    the second element as {sector_id: user_count}. The default column set is
    the full cross of the user features with the four aggregators; pass
    ``columns`` (names of the form ``feature.aggregator``) to prune it.
    """
    wanted = [f"{feat}.{agg}" for feat in feature_names for agg in aggregators]
    if columns is not None:
        unknown = [c for c in columns if c not in wanted]
        if unknown:
            raise ValueError(f"unknown column(s): {', '.join(unknown)}")
        wanted = [c for c in wanted if c in set(columns)]

    by_sector: dict[str, list[UserFeatureVector]] = {}
    for vec in features:
        by_sector.setdefault(vec.home_sector, []).append(vec)

    excluded = {s: len(v) for s, v in by_sector.items() if len(v) < min_users}
    if excluded:
        log.warning(
            "%d sector(s) below the %d-user minimum excluded", len(excluded), min_users
        )
    sectors = sorted(s for s in by_sector if s not in excluded)

    values = np.full((len(sectors), len(wanted)), np.nan, dtype=np.float64)
    counts = np.zeros(len(sectors), dtype=np.int64)
    needed = sorted({c.split(".", 1)[0] for c in wanted})
    col_index = {c: j for j, c in enumerate(wanted)}
    flagged = 0
    for i, sector in enumerate(sectors):
        users = by_sector[sector]
        counts[i] = len(users)
        for feat in needed:
            vals = [getattr(u, feat) for u in users]
            defined = [float(v) for v in vals if v is not None]
            if not defined:
                continue
            # Fixed reduction order: the matrix is bit-identical no matter
            # how the input was ordered or partitioned.
            defined.sort()
            result = aggregate_sector(defined, aggregators)
            for agg, value in result.items():
                j = col_index.get(f"{feat}.{agg}")
                if j is None:
                    continue
                if value is None:
                    flagged += 1
                else:
                    values[i, j] = value
    if flagged:
        log.warning("%d undefined aggregate cell(s) left unset", flagged)
    return SectorMatrix(sectors=sectors, columns=wanted, values=values, counts=counts), excluded


def write_sector_matrix(matrix: SectorMatrix, path, count_column: str = "n_users") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(["sector_id"] + matrix.columns + [count_column]) + "\n")
        for i, sector in enumerate(matrix.sectors):
            cells = ",".join(format_number(v) for v in matrix.values[i])
            f.write(f"{sector},{cells},{matrix.counts[i]}\n")


def read_sector_matrix(path, count_column: str = "n_users") -> SectorMatrix:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0] != "sector_id" or header[-1] != count_column:
            raise FormatError(
                f"sector matrix: expected 'sector_id,...,{count_column}' header in {path}"
            )
        columns = header[1:-1]
        sectors: list[str] = []
        rows: list[list[float]] = []
        counts: list[int] = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"sector matrix: malformed row at line {reader.line_num}")
            sectors.append(row[0])
            rows.append([float(c) if c else math.nan for c in row[1:-1]])
            counts.append(int(row[-1]))
        values = (
            np.array(rows, dtype=np.float64)
            if rows
            else np.empty((0, len(columns)), dtype=np.float64)
        )
        return SectorMatrix(
            sectors=sectors,
            columns=columns,
            values=values,
            counts=np.array(counts, dtype=np.int64),
        )
