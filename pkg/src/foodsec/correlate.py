"""Mobile x survey correlation matrix, p-values, confidence intervals, and
the shuffled-sector null distribution.

Correlations are plain Pearson product-moment coefficients computed two-pass
for numerical stability. An undefined correlation (zero variance on either
side, or fewer than 3 paired sectors) is a distinct state, never coerced to
0 or NaN-leaked into output. Deletion of undefined cells is pairwise: each
(mobile, survey) pair keeps every sector where both sides are defined, and
records its own n.

Significance follows the standard Student-t transform of r; intervals use
the Fisher z-transform. The null distribution permutes the survey side's
sector order uniformly at random, recomputes every correlation, and pools
|r|; trials derive per-trial seeds from one master seed, so results are
reproducible regardless of how trials are scheduled.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .aggregate import SectorMatrix
from .ingest import FormatError, format_number

log = logging.getLogger(__name__)

CORRELATION_HEADER = ["mobile_var", "survey_var", "r", "p", "ci_low", "ci_high", "n", "defined"]
NULL_SUMMARY_HEADER = ["trials", "abs_r_p50", "abs_r_p95", "abs_r_p99", "abs_r_max"]


@dataclass(frozen=True)
class CorrelationEntry:
    mobile_var: str
    survey_var: str
    r: float | None
    p: float | None
    ci_low: float | None
    ci_high: float | None
    n: int
    defined: bool


@dataclass(frozen=True)
class NullSummary:
    trials: int
    abs_r_p50: float
    abs_r_p95: float
    abs_r_p99: float
    abs_r_max: float


def pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Pearson r of two equal-length vectors, or None if either side has
    zero variance. Two-pass (centered) evaluation, clamped to [-1, 1]."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError("x and y must be equal-length vectors")
    if xa.size < 2:
        raise ValueError("need at least 2 paired values")
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    sxx = float(np.dot(xc, xc))
    syy = float(np.dot(yc, yc))
    if sxx <= 0.0 or syy <= 0.0:
        return None
    r = float(np.dot(xc, yc)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def pearson_p(r: float, n: int) -> float | None:
    """Two-sided p-value for r via t = r * sqrt((n-2) / (1-r^2)) against
    Student-t with n-2 degrees of freedom. None when n < 3."""
    if n < 3:
        return None
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * stats.t.sf(abs(t), n - 2))


def fisher_ci(r: float, n: int, level: float = 0.95) -> tuple[float, float] | None:
    """Fisher z-transform confidence interval for r. None when n <= 3.

    z = atanh(r) with standard error 1/sqrt(n-3); the normal-quantile
    half-width is mapped back through tanh, so bounds stay inside [-1, 1].
    """
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    if n <= 3:
        return None
    if abs(r) >= 1.0:
        return (float(r), float(r))
    q = stats.norm.ppf(0.5 + level / 2.0)
    z = math.atanh(r)
    half = q / math.sqrt(n - 3)
    return (math.tanh(z - half), math.tanh(z + half))


def _joined_arrays(
    mobile: SectorMatrix, survey: SectorMatrix
) -> tuple[list[str], np.ndarray, np.ndarray]:
    common = sorted(set(mobile.sectors) & set(survey.sectors))
    mi = {s: i for i, s in enumerate(mobile.sectors)}
    si = {s: i for i, s in enumerate(survey.sectors)}
    mrows = [mi[s] for s in common]
    srows = [si[s] for s in common]
    return common, mobile.values[mrows], survey.values[srows]


def _corr_grid(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs correlations between columns of x and columns of y with
    pairwise deletion. Returns (r, n); undefined cells are NaN in r.

    Pairs of NaN-free columns go through one standardized matrix product;
    only pairs touching a column with missing cells take the per-pair
    masked path.
    """
    n_rows = x.shape[0]
    fx = np.isfinite(x)
    fy = np.isfinite(y)
    r = np.full((x.shape[1], y.shape[1]), np.nan, dtype=np.float64)
    ns = np.zeros((x.shape[1], y.shape[1]), dtype=np.int64)
    x_complete = np.flatnonzero(fx.all(axis=0))
    y_complete = np.flatnonzero(fy.all(axis=0))
    if x_complete.size and y_complete.size:
        ns[np.ix_(x_complete, y_complete)] = n_rows
        if n_rows >= 3:
            xs = _standardize_columns(x[:, x_complete])
            ys = _standardize_columns(y[:, y_complete])
            with np.errstate(invalid="ignore"):
                block = (xs.T @ ys) / (n_rows - 1)
            r[np.ix_(x_complete, y_complete)] = np.clip(block, -1.0, 1.0)
    x_done = set(x_complete.tolist())
    y_done = set(y_complete.tolist())
    for i in range(x.shape[1]):
        xi = x[:, i]
        fi = fx[:, i]
        for j in range(y.shape[1]):
            if i in x_done and j in y_done:
                continue
            mask = fi & fy[:, j]
            k = int(mask.sum())
            ns[i, j] = k
            if k < 3:
                continue
            value = pearson(xi[mask], y[mask, j])
            if value is not None:
                r[i, j] = value
    return r, ns


def _standardize_columns(a: np.ndarray) -> np.ndarray:
    """Center and scale columns to unit sample (n-1) variance; constant
    columns come out as NaN, which marks the correlation undefined."""
    mu = a.mean(axis=0)
    sd = a.std(axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (a - mu) / sd
    out[:, sd == 0.0] = np.nan
    return out


def correlation_matrix(
    mobile: SectorMatrix, survey: SectorMatrix, level: float = 0.95
) -> list[CorrelationEntry]:
    """One entry per (mobile variable, survey variable) pair, joined on
    sector_id with pairwise deletion of undefined cells.

    Signed r is always reported (heatmap output takes |r| separately). A
    pair with fewer than 3 common defined sectors, or zero variance on
    either side, yields an undefined entry.
    """
    common, x, y = _joined_arrays(mobile, survey)
    if len(common) < 3:
        log.warning(
            "correlation join has only %d common sector(s); every entry undefined",
            len(common),
        )
    r, ns = _corr_grid(x, y)
    entries: list[CorrelationEntry] = []
    for i, mobile_var in enumerate(mobile.columns):
        for j, survey_var in enumerate(survey.columns):
            rij = r[i, j]
            n = int(ns[i, j])
            if not math.isfinite(rij):
                entries.append(
                    CorrelationEntry(mobile_var, survey_var, None, None, None, None, n, False)
                )
                continue
            ci = fisher_ci(rij, n, level)
            entries.append(
                CorrelationEntry(
                    mobile_var=mobile_var,
                    survey_var=survey_var,
                    r=float(rij),
                    p=pearson_p(rij, n),
                    ci_low=None if ci is None else ci[0],
                    ci_high=None if ci is None else ci[1],
                    n=n,
                    defined=True,
                )
            )
    return entries


def shuffle_null(
    mobile: SectorMatrix,
    survey: SectorMatrix,
    trials: int,
    seed: int,
    threads: int = 1,
    perm_fn: Callable[[np.random.Generator, int], np.ndarray] | None = None,
) -> NullSummary:
    """Null |r| distribution from randomly permuted sector alignment.

    Each trial permutes the survey matrix's sector order uniformly at random
    (permuting one side is equivalent to permuting either), recomputes the
    full correlation grid, and pools the defined |r| values; the summary
    reports pooled quantiles and the overall max. ``perm_fn`` is a test hook
    replacing the uniform permutation draw.

    Trial t draws from a child seed spawned from ``seed``, so the result is
    identical for any ``threads`` value and any scheduling order.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    _, x, y = _joined_arrays(mobile, survey)
    n = x.shape[0]
    children = np.random.SeedSequence(seed).spawn(trials)

    def run_trial(t: int) -> tuple[np.ndarray, ...]:
        rng = np.random.default_rng(children[t])
        perm = perm_fn(rng, n) if perm_fn is not None else rng.permutation(n)
        r, _ = _corr_grid(x, y[perm])
        return (np.abs(r[np.isfinite(r)]).ravel(),)

    if threads > 1 and trials > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = [p[0] for p in pool.map(run_trial, range(trials))]
    else:
        parts = [run_trial(t)[0] for t in range(trials)]
    pooled = np.concatenate(parts) if parts else np.empty(0)
    if pooled.size == 0:
        raise ValueError("no defined correlations in any trial")
    p50, p95, p99 = np.quantile(pooled, [0.50, 0.95, 0.99])
    return NullSummary(
        trials=trials,
        abs_r_p50=float(p50),
        abs_r_p95=float(p95),
        abs_r_p99=float(p99),
        abs_r_max=float(pooled.max()),
    )


# --- output files ---


def write_correlations(entries: Sequence[CorrelationEntry], path) -> None:
    def cell(v) -> str:
        return "" if v is None else format_number(v)

    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(CORRELATION_HEADER) + "\n")
        for e in entries:
            f.write(
                f"{e.mobile_var},{e.survey_var},{cell(e.r)},{cell(e.p)},"
                f"{cell(e.ci_low)},{cell(e.ci_high)},{e.n},{str(e.defined).lower()}\n"
            )


def read_correlations(path) -> list[CorrelationEntry]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CORRELATION_HEADER:
            raise FormatError(f"correlations: unexpected header {header}")
        out = []
        for row in reader:
            if not row:
                continue
            out.append(
                CorrelationEntry(
                    mobile_var=row[0],
                    survey_var=row[1],
                    r=float(row[2]) if row[2] else None,
                    p=float(row[3]) if row[3] else None,
                    ci_low=float(row[4]) if row[4] else None,
                    ci_high=float(row[5]) if row[5] else None,
                    n=int(row[6]),
                    defined=row[7] == "true",
                )
            )
        return out


def write_heatmap_data(
    entries: Sequence[CorrelationEntry], categories: dict[str, str], path
) -> None:
    """Long-format |r| file for external heatmap rendering (defined entries
    only, tagged with the survey variable's category)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("mobile_var,survey_var,abs_r,category\n")
        for e in entries:
            if not e.defined:
                continue
            category = categories.get(e.survey_var, "")
            f.write(f"{e.mobile_var},{e.survey_var},{format_number(abs(e.r))},{category}\n")


def write_null_summary(summary: NullSummary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(NULL_SUMMARY_HEADER) + "\n")
        f.write(
            f"{summary.trials},{format_number(summary.abs_r_p50)},"
            f"{format_number(summary.abs_r_p95)},{format_number(summary.abs_r_p99)},"
            f"{format_number(summary.abs_r_max)}\n"
        )


def read_null_summary(path) -> NullSummary:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != NULL_SUMMARY_HEADER:
            raise FormatError(f"null_summary: unexpected header {header}")
        row = next(reader)
        return NullSummary(
            trials=int(row[0]),
            abs_r_p50=float(row[1]),
            abs_r_p95=float(row[2]),
            abs_r_p99=float(row[3]),
            abs_r_max=float(row[4]),
        )
