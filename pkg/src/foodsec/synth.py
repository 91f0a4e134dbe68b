"""Seeded synthetic dataset generator with planted sector-level relationships.

Generates the five pipeline input families (CDR, top-ups, tower map, survey
with metadata, poverty table) plus ``truth.csv``, the ground-truth file the
``verify`` step checks recovered results against. Generation is a pure
function of the config: identical configs yield byte-identical files.

The planted structure hangs off one latent wealth value per sector:

* each user's total top-up spend is linear in sector wealth plus user noise,
* each household's food expenditure follows a linear or quadratic link,
* food-item frequencies (integers 0..7) are binomial draws whose success
  probability is a logistic curve in wealth, one slope per item, grouped
  into high / middle / low / negative correlation bands,
* poverty headcount and intensity decrease with wealth.

When a target correlation ``planted_r`` is set, sector-level noise on both
sides is calibrated so the population correlation between the sector mean
of user top-up sums and mean food expenditure equals it exactly, accounting
for the user- and household-level noise that survives averaging. When the
expense link is quadratic, household noise is instead calibrated so a
degree-2 fit attains ``planted_fit_r``.

Money is generated in integer cents so every written amount is an exact
two-decimal value and user sums reproduce the planted linear predictor to
within half a cent.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields, replace
from datetime import date
from pathlib import Path
from typing import Mapping

import numpy as np

from .config import ConfigError, coerce, parse_kv_file
from .ingest import FormatError

TRUTH_HEADER = ["kind", "key", "value", "extra"]

PLANTED_PAIR = ("topup_sum.mean", "food_expenditure")

SECONDS_PER_DAY = 86400
NIGHT_START_SEC = 18 * 3600
NIGHT_SPAN_SEC = 14 * 3600  # 18:00 -> 08:00
DAY_START_SEC = 8 * 3600
DAY_SPAN_SEC = 10 * 3600


@dataclass(frozen=True)
class FoodItem:
    name: str
    group: str  # "high" | "middle" | "low" | "negative" | "fcs"
    alpha: float  # logistic intercept
    beta: float  # logistic slope on sector wealth


# Nine columns named for the standard FCS food groups (so household scores
# are computable with the default weight table) plus 21 planted items in
# four correlation bands: five high, five middle, ten near-zero, one
# clearly negative.
DEFAULT_FOOD_ITEMS: tuple[FoodItem, ...] = (
    FoodItem("staples", "fcs", 0.3, 0.9),
    FoodItem("pulses", "fcs", 0.5, 0.15),
    FoodItem("vegetables", "fcs", 0.4, 0.7),
    FoodItem("fruit", "fcs", -0.4, 0.55),
    FoodItem("meat_fish", "fcs", -0.9, 1.2),
    FoodItem("milk", "fcs", -0.7, 0.8),
    FoodItem("sugar", "fcs", -0.3, 1.0),
    FoodItem("oil", "fcs", 0.1, 0.45),
    FoodItem("condiments", "fcs", 0.9, 0.05),
    FoodItem("item_h1", "high", -0.5, 1.75),
    FoodItem("item_h2", "high", -0.3, 1.65),
    FoodItem("item_h3", "high", -0.6, 1.55),
    FoodItem("item_h4", "high", -0.2, 1.45),
    FoodItem("item_h5", "high", -0.4, 1.4),
    FoodItem("item_m1", "middle", -0.1, 0.42),
    FoodItem("item_m2", "middle", 0.1, 0.4),
    FoodItem("item_m3", "middle", -0.2, 0.38),
    FoodItem("item_m4", "middle", 0.0, 0.35),
    FoodItem("item_m5", "middle", 0.2, 0.32),
    FoodItem("item_l1", "low", 0.3, 0.05),
    FoodItem("item_l2", "low", -0.1, 0.04),
    FoodItem("item_l3", "low", 0.5, 0.03),
    FoodItem("item_l4", "low", 0.0, 0.02),
    FoodItem("item_l5", "low", 0.2, 0.01),
    FoodItem("item_l6", "low", -0.3, 0.0),
    FoodItem("item_l7", "low", 0.4, -0.01),
    FoodItem("item_l8", "low", 0.1, -0.02),
    FoodItem("item_l9", "low", -0.2, -0.03),
    FoodItem("item_l10", "low", 0.6, -0.04),
    FoodItem("item_n1", "negative", 0.3, -0.85),
)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 1
    n_sectors: int = 40
    towers_per_sector: int = 3
    users_per_sector: int = 120
    households_per_sector: int = 30
    period_start: date = date(2012, 1, 1)
    period_days: int = 182

    # calls
    p_home: float = 0.8
    night_calls_min: int = 20
    night_calls_extra_mean: float = 6.0
    day_calls_mean: float = 6.0
    contacts_min: int = 3
    contacts_max: int = 8
    contact_skew: float = 1.2
    diversity_wealth_slope: float = 0.0

    # top-ups (currency units; generated in integer cents)
    topup_events_mean: float = 10.0
    topup_base: float = 1000.0
    topup_scale: float = 250.0
    topup_user_sd: float = 120.0

    # survey expense link
    expense_base: float = 250.0
    expense_scale: float = 25.0
    expense_household_sd: float = 40.0
    expense_link: str = "linear"  # or "quadratic"
    expense_quad_coeff: float = 0.5

    # planted targets; None disables calibration and the explicit
    # sector-level noise values below are used as-is
    planted_r: float | None = 0.8
    planted_fit_r: float = 0.89
    sector_noise_mobile: float = 0.0
    sector_noise_survey: float = 0.0

    # food items
    food_sector_noise: float = 0.5
    food_household_noise: float = 0.8
    food_slope_scale: float = 1.0

    # verify tolerances recorded into truth.csv
    pair_tolerance: float = 0.05
    fit_tolerance: float = 0.05
    verify_p_max: float = 1e-6
    home_accuracy_min: float = 0.95
    negative_r_max: float = -0.2

    food_items: tuple[FoodItem, ...] = DEFAULT_FOOD_ITEMS

    @classmethod
    def from_file(cls, path) -> "SynthConfig":
        return cls.from_mapping(parse_kv_file(path))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "SynthConfig":
        known = {f.name: f for f in fields(cls) if f.name != "food_items"}
        values = {}
        for key, text in mapping.items():
            if key not in known:
                raise ConfigError(f"unknown synth config key {key!r}")
            if key == "planted_r":
                values[key] = None if text.lower() in ("none", "") else coerce(key, text, float)
            elif key == "period_start":
                values[key] = coerce(key, text, date)
            elif key == "expense_link":
                if text not in ("linear", "quadratic"):
                    raise ConfigError("expense_link must be 'linear' or 'quadratic'")
                values[key] = text
            else:
                kind = type(getattr(cls, key))
                values[key] = coerce(key, text, kind)
        return cls(**values)

    def validate(self) -> None:
        if self.n_sectors < 1 or self.users_per_sector < 1 or self.households_per_sector < 1:
            raise ConfigError("sector, user, and household counts must all be >= 1")
        if self.towers_per_sector < 1:
            raise ConfigError("towers_per_sector must be >= 1")
        if self.period_days < 1:
            raise ConfigError("period_days must be >= 1")
        if not 0.0 <= self.p_home <= 1.0:
            raise ConfigError("p_home must be in [0, 1]")
        if self.contacts_min < 1 or self.contacts_max < self.contacts_min:
            raise ConfigError("need 1 <= contacts_min <= contacts_max")
        if self.contacts_max >= self.users_per_sector:
            raise ConfigError("contacts_max must be below users_per_sector")
        if self.planted_r is not None and not -1.0 < self.planted_r < 1.0:
            raise ConfigError("planted_r must lie in (-1, 1)")
        if not 0.0 < self.planted_fit_r < 1.0:
            raise ConfigError("planted_fit_r must lie in (0, 1)")
        self.derived_noise()

    def derived_noise(self) -> tuple[float, float, float]:
        """(sector_noise_mobile, sector_noise_survey, expense_household_sd)
        after calibration against the planted targets.

        Linear link with ``planted_r`` r*: both sector means equal latent
        wealth plus independent noise, so r* = 1/sqrt((1+a)(1+b)) with a and
        b the per-side excess variance ratios. Splitting evenly gives a
        budget of 1/r* - 1 per side, from which the share already produced
        by averaged user/household noise is deducted.

        Quadratic link with ``planted_fit_r``: sector noise is zeroed and
        household noise is sized so the residual variance around the
        quadratic curve gives the target fit correlation.
        """
        if self.expense_link == "quadratic":
            q = self.expense_quad_coeff
            signal_var = 1.0 + 2.0 * q * q  # Var(w + q w^2), w standard normal
            resid_var = signal_var * (1.0 / self.planted_fit_r**2 - 1.0)
            hh_sd = self.expense_scale * math.sqrt(self.households_per_sector * resid_var)
            return 0.0, 0.0, hh_sd
        if self.planted_r is None:
            return self.sector_noise_mobile, self.sector_noise_survey, self.expense_household_sd
        r = abs(self.planted_r)
        budget = 1.0 / r - 1.0
        user_term = (self.topup_user_sd / self.topup_scale) ** 2 / self.users_per_sector
        hh_term = (self.expense_household_sd / self.expense_scale) ** 2 / self.households_per_sector
        sx2 = budget - user_term
        sy2 = budget - hh_term
        if sx2 < 0 or sy2 < 0:
            raise ConfigError(
                f"planted_r={self.planted_r} infeasible: averaged user/household noise "
                "already exceeds the correlation budget; lower the noise or the target"
            )
        return math.sqrt(sx2), math.sqrt(sy2), self.expense_household_sd


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _cents_str(cents: int) -> str:
    return f"{cents // 100}.{cents % 100:02d}"


@dataclass
class _SectorLatents:
    wealth: np.ndarray
    mobile: np.ndarray  # x_s = w + sx * eta
    survey: np.ndarray  # y_s = w + sy * eta'
    food: np.ndarray  # (n_sectors, n_items) logistic-argument noise
    pov_h: np.ndarray
    pov_a: np.ndarray
    share: np.ndarray
    income: np.ndarray
    nonfood: np.ndarray


def _draw_sector_latents(cfg: SynthConfig, rng: np.random.Generator) -> _SectorLatents:
    s = cfg.n_sectors
    sx, sy, _ = cfg.derived_noise()
    wealth = rng.standard_normal(s)
    latents = _SectorLatents(
        wealth=wealth,
        mobile=wealth + sx * rng.standard_normal(s),
        survey=wealth + sy * rng.standard_normal(s),
        food=cfg.food_sector_noise * rng.standard_normal((s, len(cfg.food_items))),
        pov_h=rng.standard_normal(s),
        pov_a=rng.standard_normal(s),
        share=rng.standard_normal(s),
        income=rng.standard_normal(s),
        nonfood=rng.standard_normal(s),
    )
    return latents


def _expense_mu(cfg: SynthConfig, y: np.ndarray) -> np.ndarray:
    if cfg.expense_link == "quadratic":
        g = y + cfg.expense_quad_coeff * y * y
    else:
        g = y
    return cfg.expense_base + cfg.expense_scale * g


def generate(config: SynthConfig, out_dir) -> dict[str, Path]:
    """Write the full synthetic dataset into ``out_dir``; returns the paths.

    Files: cdr.csv, topup.csv, towers.csv, survey.csv, survey_meta.csv,
    poverty.csv, truth.csv. Assembly is ordered sector then user (calls
    time-sorted within a user), so output bytes depend only on the config.
    """
    cfg = config
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        name: out / f"{name}.csv"
        for name in ("cdr", "topup", "towers", "survey", "survey_meta", "poverty", "truth")
    }

    master = np.random.SeedSequence(cfg.seed)
    latent_seed, *sector_seeds = master.spawn(cfg.n_sectors + 1)
    latents = _draw_sector_latents(cfg, np.random.default_rng(latent_seed))
    _, _, hh_sd = cfg.derived_noise()
    expense_mu = _expense_mu(cfg, latents.survey)
    topup_mu = cfg.topup_base + cfg.topup_scale * latents.mobile

    n_towers = cfg.n_sectors * cfg.towers_per_sector
    sector_ids = [f"s{i:04d}" for i in range(cfg.n_sectors)]
    tower_ids = np.array(
        [f"t{i:04d}_{j}" for i in range(cfg.n_sectors) for j in range(cfg.towers_per_sector)]
    )
    period_secs = cfg.period_days * SECONDS_PER_DAY
    time_base = np.datetime64(cfg.period_start.isoformat(), "s")

    def stamp(seconds: np.ndarray) -> np.ndarray:
        return np.datetime_as_string(time_base + seconds.astype("timedelta64[s]"), unit="s")

    items = [
        replace(item, beta=item.beta * cfg.food_slope_scale) for item in cfg.food_items
    ]
    alphas = np.array([it.alpha for it in items])
    betas = np.array([it.beta for it in items])

    survey_columns = (
        ["household_size", "crowding_index", "share_food_own_production"]
        + [it.name for it in items]
        + ["food_expenditure", "total_expenditure", "income_per_capita"]
    )
    survey_categories = (
        ["V1", "V1", "V2"] + ["food_group"] * len(items) + ["V3", "V3", "V3"]
    )

    user_home_rows: list[str] = []
    with open(paths["cdr"], "w", encoding="utf-8", newline="\n") as f_cdr, open(
        paths["topup"], "w", encoding="utf-8", newline="\n"
    ) as f_top, open(paths["survey"], "w", encoding="utf-8", newline="\n") as f_survey:
        f_cdr.write("caller_id,callee_id,tower_id,timestamp\n")
        f_top.write("user_id,amount,timestamp\n")
        f_survey.write("household_id,sector_id," + ",".join(survey_columns) + "\n")

        for si in range(cfg.n_sectors):
            rng = np.random.default_rng(sector_seeds[si])
            sector = sector_ids[si]
            users = np.array(
                [f"u{si:04d}_{k:05d}" for k in range(cfg.users_per_sector)]
            )
            cdr_rows: list[str] = []
            top_rows: list[str] = []
            for ui in range(cfg.users_per_sector):
                uid = users[ui]
                home_idx = si * cfg.towers_per_sector + rng.integers(cfg.towers_per_sector)
                user_home_rows.append(f"user_home,{uid},{sector},{tower_ids[home_idx]}\n")

                # calls
                n_night = cfg.night_calls_min + rng.poisson(cfg.night_calls_extra_mean)
                n_day = int(rng.poisson(cfg.day_calls_mean))
                n_calls = n_night + n_day
                conc = cfg.contact_skew * math.exp(
                    cfg.diversity_wealth_slope * latents.wealth[si]
                )
                k_contacts = int(rng.integers(cfg.contacts_min, cfg.contacts_max + 1))
                picks = rng.choice(cfg.users_per_sector - 1, size=k_contacts, replace=False)
                picks = np.where(picks >= ui, picks + 1, picks)
                weights = rng.dirichlet(np.full(k_contacts, conc))
                callees = users[picks[rng.choice(k_contacts, size=n_calls, p=weights)]]

                night_towers = np.where(
                    rng.random(n_night) < cfg.p_home,
                    home_idx,
                    rng.integers(0, n_towers, n_night),
                )
                day_towers = rng.integers(0, n_towers, n_day)
                towers = tower_ids[np.concatenate([night_towers, day_towers])]

                night_ts = (
                    rng.integers(0, cfg.period_days, n_night) * SECONDS_PER_DAY
                    + NIGHT_START_SEC
                    + rng.integers(0, NIGHT_SPAN_SEC, n_night)
                ) % period_secs
                day_ts = (
                    rng.integers(0, cfg.period_days, n_day) * SECONDS_PER_DAY
                    + DAY_START_SEC
                    + rng.integers(0, DAY_SPAN_SEC, n_day)
                )
                ts = np.concatenate([night_ts, day_ts])
                order = np.argsort(ts, kind="stable")
                stamps = stamp(ts[order])
                towers = towers[order]
                callees = callees[order]
                for j in range(n_calls):
                    cdr_rows.append(f"{uid},{callees[j]},{towers[j]},{stamps[j]}Z\n")

                # top-ups: an exact integer-cent split of the user's total
                k_top = 1 + int(rng.poisson(max(cfg.topup_events_mean - 1.0, 0.0)))
                total = topup_mu[si] + cfg.topup_user_sd * rng.standard_normal()
                cents = max(3 * k_top, int(round(100.0 * total)))
                mult = 0.5 + rng.random(k_top)
                parts = np.floor(cents * (mult / mult.sum())).astype(np.int64)
                parts[0] += cents - int(parts.sum())
                top_ts = np.sort(rng.integers(0, period_secs, k_top))
                top_stamps = stamp(top_ts)
                for j in range(k_top):
                    top_rows.append(f"{uid},{_cents_str(int(parts[j]))},{top_stamps[j]}Z\n")

            f_cdr.writelines(cdr_rows)
            f_top.writelines(top_rows)

            # households
            n_h = cfg.households_per_sector
            size = 1 + rng.poisson(2.5 * math.exp(-0.06 * latents.wealth[si]), n_h)
            rooms = 1 + rng.binomial(4, float(_sigmoid(0.2 + 0.35 * latents.wealth[si])), n_h)
            crowding = np.round(size / rooms, 3)
            share = np.round(
                100.0
                * _sigmoid(
                    -0.9 * (latents.wealth[si] + 0.4 * latents.share[si])
                    - 0.7 * rng.standard_normal(n_h)
                ),
                2,
            )
            food_latent = (
                alphas
                + betas * latents.wealth[si]
                + latents.food[si]
                + cfg.food_household_noise * rng.standard_normal((n_h, len(items)))
            )
            freqs = rng.binomial(7, _sigmoid(food_latent))
            expense_cents = np.maximum(
                1, np.round(100.0 * (expense_mu[si] + hh_sd * rng.standard_normal(n_h)))
            ).astype(np.int64)
            nonfood_cents = np.maximum(
                1,
                np.round(
                    100.0
                    * (
                        90.0
                        + 14.0 * (latents.wealth[si] + 0.3 * latents.nonfood[si])
                        + 20.0 * rng.standard_normal(n_h)
                    )
                ),
            ).astype(np.int64)
            total_cents = expense_cents + nonfood_cents
            income = np.round(
                30.0
                * np.exp(
                    0.45 * (latents.wealth[si] + 0.4 * latents.income[si])
                    + 0.35 * rng.standard_normal(n_h)
                ),
                2,
            )
            survey_rows = []
            for h in range(n_h):
                freq_cells = ",".join(str(v) for v in freqs[h])
                survey_rows.append(
                    f"h{si:04d}_{h:04d},{sector},{size[h]},{crowding[h]},{share[h]},"
                    f"{freq_cells},{_cents_str(int(expense_cents[h]))},"
                    f"{_cents_str(int(total_cents[h]))},{income[h]}\n"
                )
            f_survey.writelines(survey_rows)

    with open(paths["towers"], "w", encoding="utf-8", newline="\n") as f:
        f.write("tower_id,sector_id\n")
        for i, tower in enumerate(tower_ids):
            f.write(f"{tower},{sector_ids[i // cfg.towers_per_sector]}\n")

    with open(paths["survey_meta"], "w", encoding="utf-8", newline="\n") as f:
        f.write("variable,category\n")
        for name, category in zip(survey_columns, survey_categories):
            f.write(f"{name},{category}\n")

    headcount = _sigmoid(-0.1 - 0.9 * (latents.wealth + 0.3 * latents.pov_h))
    intensity = 0.34 + 0.25 * _sigmoid(-0.8 * (latents.wealth + 0.3 * latents.pov_a))
    with open(paths["poverty"], "w", encoding="utf-8", newline="\n") as f:
        f.write("sector_id,headcount,intensity\n")
        for i, sector in enumerate(sector_ids):
            f.write(f"{sector},{headcount[i]:.6f},{intensity[i]:.6f}\n")

    _write_truth(cfg, paths["truth"], sector_ids, latents, topup_mu, items, user_home_rows)
    return paths


def _write_truth(cfg, path, sector_ids, latents, topup_mu, items, user_home_rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(TRUTH_HEADER) + "\n")
        params = {
            "seed": cfg.seed,
            "n_sectors": cfg.n_sectors,
            "users_per_sector": cfg.users_per_sector,
            "households_per_sector": cfg.households_per_sector,
            "topup_user_sd": cfg.topup_user_sd,
            "expense_link": cfg.expense_link,
            "pair_tolerance": cfg.pair_tolerance,
            "fit_tolerance": cfg.fit_tolerance,
            "verify_p_max": cfg.verify_p_max,
            "home_accuracy_min": cfg.home_accuracy_min,
            "negative_r_max": cfg.negative_r_max,
        }
        for key, value in params.items():
            f.write(f"param,{key},{value},\n")
        if cfg.planted_r is not None and cfg.expense_link == "linear":
            f.write(f"planted_pair,{PLANTED_PAIR[0]}|{PLANTED_PAIR[1]},{cfg.planted_r!r},\n")
        if cfg.expense_link == "quadratic":
            f.write(f"planted_model,food_expenditure,{cfg.planted_fit_r!r},degree=2\n")
        for item in items:
            f.write(f"food_item,{item.name},{item.beta!r},{item.group}\n")
        for i, sector in enumerate(sector_ids):
            f.write(f"sector,{sector},{float(latents.wealth[i])!r},{float(topup_mu[i])!r}\n")
        f.writelines(user_home_rows)


def read_truth(path) -> dict[str, list[tuple[str, str, str]]]:
    """truth.csv grouped by kind: {kind: [(key, value, extra), ...]}."""
    out: dict[str, list[tuple[str, str, str]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != TRUTH_HEADER:
            raise FormatError(f"truth: unexpected header {header}")
        for row in reader:
            if not row:
                continue
            out.setdefault(row[0], []).append((row[1], row[2], row[3]))
    return out


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class VerifyReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [
            f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}" for c in self.checks
        ]


def verify_outputs(truth_path, outputs_dir) -> VerifyReport:
    """Compare pipeline outputs in ``outputs_dir`` against truth.csv.

    Checks planted pair correlations (value and significance), the
    food-item correlation ordering across groups, home-location accuracy,
    per-sector recovered top-up means, and (when planted) the quadratic
    model's fit correlation. Missing output files are fatal.
    """
    from .correlate import read_correlations
    from .features import read_user_features
    from .aggregate import read_sector_matrix
    from .models import read_model_summary

    truth = read_truth(truth_path)
    params = {k: v for k, v, _ in truth.get("param", [])}
    outputs = Path(outputs_dir)

    def need(name: str) -> Path:
        p = outputs / name
        if not p.exists():
            raise FormatError(f"verify: missing pipeline output {p}")
        return p

    checks: list[CheckResult] = []

    correlations = {
        (e.mobile_var, e.survey_var): e for e in read_correlations(need("correlations.csv"))
    }

    # planted pairwise correlations
    tol = float(params.get("pair_tolerance", 0.05))
    p_max = float(params.get("verify_p_max", 1e-6))
    for key, value, _ in truth.get("planted_pair", []):
        mobile_var, _, survey_var = key.partition("|")
        target = float(value)
        entry = correlations.get((mobile_var, survey_var))
        if entry is None or not entry.defined:
            checks.append(CheckResult(f"pair {key}", False, "correlation undefined"))
            continue
        ok = abs(entry.r - target) <= tol and entry.p is not None and entry.p < p_max
        checks.append(
            CheckResult(
                f"pair {key}",
                ok,
                f"recovered r={entry.r:.4f} (target {target} +/- {tol}), p={entry.p:.3g}",
            )
        )

    # food-item ordering across planted groups
    groups: dict[str, list[tuple[str, float]]] = {}
    for name, _, group in truth.get("food_item", []):
        if group not in ("high", "middle", "low", "negative"):
            continue
        entry = correlations.get((PLANTED_PAIR[0], name))
        if entry is None or not entry.defined:
            checks.append(CheckResult("food ordering", False, f"{name}: undefined"))
            break
        groups.setdefault(group, []).append((name, entry.r))
    else:
        if groups:
            checks.extend(_ordering_checks(groups, float(params.get("negative_r_max", -0.2))))

    # home-location accuracy
    homes = {key: value for key, value, _ in truth.get("user_home", [])}
    if homes:
        features = read_user_features(need("user_features.csv"))
        hits = sum(1 for v in features if homes.get(v.user_id) == v.home_sector)
        accuracy = hits / len(features) if features else 0.0
        floor = float(params.get("home_accuracy_min", 0.95))
        checks.append(
            CheckResult(
                "home accuracy",
                accuracy >= floor and bool(features),
                f"{accuracy:.4f} over {len(features)} user(s), floor {floor}",
            )
        )

    # recovered per-sector top-up means
    expected = {key: float(extra) for key, _, extra in truth.get("sector", [])}
    if expected:
        matrix = read_sector_matrix(need("sector_mobile.csv"))
        user_sd = float(params.get("topup_user_sd", 0.0))
        n_users = int(params.get("users_per_sector", 1))
        tol_mean = 6.0 * user_sd / math.sqrt(n_users) + 0.05
        col = matrix.column("topup_sum.mean")
        worst = 0.0
        missing = [s for s in expected if s not in matrix.sectors]
        for i, sector in enumerate(matrix.sectors):
            if sector in expected:
                worst = max(worst, abs(col[i] - expected[sector]))
        checks.append(
            CheckResult(
                "sector means",
                not missing and worst <= tol_mean,
                f"max |recovered-planted|={worst:.3f} (tol {tol_mean:.3f})"
                + (f"; {len(missing)} sector(s) missing" if missing else ""),
            )
        )

    # planted model fit
    fit_tol = float(params.get("fit_tolerance", 0.05))
    for target, value, _ in truth.get("planted_model", []):
        summary = read_model_summary(need(f"model_{target}.csv"))
        fit_r = summary.get("fit_r")
        ok = fit_r is not None and abs(fit_r - float(value)) <= fit_tol
        checks.append(
            CheckResult(
                f"model {target}",
                ok,
                f"fit_r={fit_r} (target {value} +/- {fit_tol})",
            )
        )

    return VerifyReport(checks)


def _ordering_checks(
    groups: dict[str, list[tuple[str, float]]], negative_r_max: float
) -> list[CheckResult]:
    order = ["high", "middle", "low", "negative"]
    present = [g for g in order if groups.get(g)]
    results = []
    for upper, lower in zip(present, present[1:]):
        lo_name, lo_r = min(groups[upper], key=lambda kv: kv[1])
        hi_name, hi_r = max(groups[lower], key=lambda kv: kv[1])
        results.append(
            CheckResult(
                f"food ordering {upper}>{lower}",
                lo_r > hi_r,
                f"min({upper})={lo_r:.3f} ({lo_name}) vs max({lower})={hi_r:.3f} ({hi_name})",
            )
        )
    for name, r in groups.get("negative", []):
        results.append(
            CheckResult(
                "negative food item",
                r <= negative_r_max,
                f"{name}: r={r:.3f} (required <= {negative_r_max})",
            )
        )
    return results


def write_verify_report(report: VerifyReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("check,status,detail\n")
        for c in report.checks:
            detail = c.detail.replace(",", ";")
            f.write(f"{c.name},{'pass' if c.passed else 'fail'},{detail}\n")
