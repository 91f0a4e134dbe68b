"""Command-line entry point wiring the pipeline.

Subcommands map one-to-one onto the pipeline stages (``synth``,
``features``, ``aggregate``, ``indices``, ``correlate``, ``null``, ``fit``,
``rolling``, ``verify``) plus ``all``, which runs the whole chain over a
directory of canonical input files. Every run writes a machine-readable
``run_manifest.json`` (inputs, outputs, resolved config and its hash, seed,
versions; no timestamps, so re-runs are byte-identical).

Configuration precedence: built-in defaults < ``--config`` key=value file <
``FOODSEC_*`` environment variables < explicit flags.

Exit codes: 0 success, 1 validation/config error, 2 data error (including
row errors under --strict and failed verification), 3 internal error.
"""

from __future__ import annotations

import hashlib
import json
import logging
import sys
import traceback
from datetime import date
from pathlib import Path

import click

from . import __version__
from .aggregate import (
    DEFAULT_MIN_USERS,
    build_sector_matrix,
    read_sector_matrix,
    write_sector_matrix,
)
from .config import ConfigError, parse_kv_file, parse_night_window
from .correlate import (
    correlation_matrix,
    shuffle_null,
    write_correlations,
    write_heatmap_data,
    write_null_summary,
)
from .features import (
    FeatureAccumulator,
    FeatureConfig,
    read_user_features,
    write_user_features,
)
from .indices import (
    FoodGroupWeights,
    build_survey_matrix,
    load_csi_weights,
    load_fcs_weights,
    load_poverty,
)
from .ingest import (
    FormatError,
    RowErrorLog,
    load_survey,
    load_tower_map,
    parse_cdr_stream,
    parse_topup_stream,
)
from .models import fit_from_matrices, predict_rows, write_model, write_scatter_data
from .rolling import (
    emit_overlay,
    load_stock_series,
    rolling_sector_series,
    write_rolling,
)
from .synth import SynthConfig, generate, verify_outputs, write_verify_report

log = logging.getLogger(__name__)


class VerificationFailed(Exception):
    """One or more ground-truth checks failed."""


def _require(value, key: str):
    if value is None:
        raise ConfigError(f"missing required config key {key!r}")
    return value


def _require_file(path, key: str) -> Path:
    p = Path(_require(path, key))
    if not p.exists():
        raise ConfigError(f"config key {key!r}: file not found: {p}")
    return p


def _out_dir(path) -> Path:
    out = Path(_require(path, "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(
    out_dir: Path,
    subcommand: str,
    inputs: dict,
    outputs: list[str],
    config: dict,
    seed: int | None = None,
    extra: dict | None = None,
) -> None:
    import numpy
    import scipy

    resolved = {k: (str(v) if isinstance(v, (Path, date)) else v) for k, v in config.items()}
    payload = {
        "subcommand": subcommand,
        "inputs": {k: str(v) for k, v in inputs.items() if v is not None},
        "outputs": sorted(outputs),
        "config": resolved,
        "config_hash": hashlib.sha256(
            json.dumps(resolved, sort_keys=True).encode()
        ).hexdigest(),
        "seed": seed,
        "versions": {
            "foodsec": __version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
        },
    }
    if extra:
        payload.update(extra)
    with open(out_dir / "run_manifest.json", "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _config_defaults(path) -> dict:
    """Turn a flat key=value file into a click default map for every
    subcommand (flags and env vars still win)."""
    flat = parse_kv_file(path)
    return {name: dict(flat) for name in cli.commands}


@click.group(name="foodsec")
@click.version_option(__version__)
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="key=value config file supplying defaults for any flag",
)
@click.option("-v", "--verbose", count=True, help="-v info, -vv debug")
@click.pass_context
def cli(ctx, config_path, verbose):
    """Sector-level food-security proxies from mobile phone records."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if config_path:
        ctx.default_map = _config_defaults(config_path)


# --- stage helpers shared by the individual subcommands and `all` ---


def _stage_features(cdr, topup, towers, out, night_window, strict, home_hours, direction):
    tower_map = load_tower_map(towers)
    cfg = FeatureConfig(
        night_window=parse_night_window(night_window),
        home_hours=home_hours,
        diversity_direction=direction,
    )
    acc = FeatureAccumulator(cfg)
    cdr_errors = RowErrorLog(strict=strict)
    topup_errors = RowErrorLog(strict=strict)
    acc.update_calls(parse_cdr_stream(cdr, cdr_errors))
    acc.update_topups(parse_topup_stream(topup, topup_errors))
    features, exclusions = acc.finalize(tower_map)
    if cdr_errors.count or topup_errors.count:
        log.warning("cdr: %s; topup: %s", cdr_errors.summary(), topup_errors.summary())
    write_user_features(features, out / "user_features.csv")
    stats = {
        "users_out": len(features),
        "excluded": dict(exclusions),
        "row_errors": {"cdr": cdr_errors.count, "topup": topup_errors.count},
    }
    return features, stats


def _stage_indices(survey, survey_meta, fcs_weights, poor_max, borderline_max,
                   csi_weights, poverty, variables, strict, out):
    errors = RowErrorLog(strict=strict)
    table = load_survey(survey, survey_meta, errors)
    if errors.count:
        log.warning("survey: %s", errors.summary())
    if fcs_weights is not None:
        fcs = load_fcs_weights(fcs_weights, poor_max, borderline_max)
    else:
        fcs = FoodGroupWeights(
            poor_max=FoodGroupWeights().poor_max if poor_max is None else poor_max,
            borderline_max=(
                FoodGroupWeights().borderline_max if borderline_max is None else borderline_max
            ),
        )
    csi = load_csi_weights(csi_weights) if csi_weights else None
    pov = load_poverty(poverty) if poverty else None
    wanted = [v.strip() for v in variables.split(",")] if variables else None
    matrix, categories = build_survey_matrix(
        table, fcs_weights=fcs, csi_weights=csi, poverty=pov, variables=wanted
    )
    write_sector_matrix(matrix, out / "sector_survey.csv", count_column="n_households")
    return matrix, categories, {"row_errors": {"survey": errors.count}}


def _stage_fit(mobile, survey, target, variables, degree, scatter, out):
    names = [v.strip() for v in variables.split(",") if v.strip()]
    if target not in survey.columns:
        raise ConfigError(f"config key 'target': {target!r} not in the survey matrix")
    unknown = [v for v in names if v not in mobile.columns]
    if unknown or not names:
        raise ConfigError(
            f"config key 'variables': unknown mobile variable(s) {', '.join(unknown) or '<none>'}"
        )
    model, joined, y = fit_from_matrices(
        mobile, survey, target, degree=degree, variables=names
    )
    outputs = [f"model_{target}.csv"]
    write_model(model, out / outputs[0])
    if scatter:
        outputs.append(f"scatter_{target}.csv")
        write_scatter_data(joined.sectors, predict_rows(model, joined), y, out / outputs[1])
    return model, outputs


def _stage_rolling(topup, home, window_days, denominator, stock, strict, out):
    errors = RowErrorLog(strict=strict)
    series = rolling_sector_series(
        parse_topup_stream(topup, errors),
        home,
        period=None,
        window_days=window_days,
        denominator=denominator,
    )
    if errors.count:
        log.warning("topup: %s", errors.summary())
    outputs = [f"rolling_{window_days}.csv", "overlay.csv"]
    write_rolling(series, out / outputs[0])
    stock_rows = load_stock_series(stock) if stock else None
    emit_overlay(series, out / outputs[1], stock_rows)
    return series, outputs, {"row_errors": {"topup": errors.count}}


# --- subcommands ---


@cli.command()
@click.option("--synth-config", type=click.Path(exists=True, dir_okay=False), default=None,
              help="key=value file of generator settings")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--seed", type=int, default=None, help="overrides the config seed")
def synth(synth_config, out, seed):
    """Generate a seeded synthetic dataset with planted relationships."""
    cfg = SynthConfig.from_file(synth_config) if synth_config else SynthConfig()
    if seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=seed)
    out_dir = _out_dir(out)
    paths = generate(cfg, out_dir)
    _write_manifest(
        out_dir,
        "synth",
        inputs={"synth_config": synth_config} if synth_config else {},
        outputs=[p.name for p in paths.values()],
        config={f.name: getattr(cfg, f.name) for f in cfg.__dataclass_fields__.values()
                if f.name != "food_items"},
        seed=cfg.seed,
    )
    click.echo(f"wrote {len(paths)} files to {out_dir}")


@cli.command()
@click.option("--cdr", type=click.Path(), required=True)
@click.option("--topup", type=click.Path(), required=True)
@click.option("--towers", type=click.Path(), required=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--night-window", default="18:00-08:00", show_default=True)
@click.option("--home-hours", type=click.Choice(["night", "all"]), default="night")
@click.option("--diversity-direction", type=click.Choice(["both", "out"]), default="both")
@click.option("--strict", is_flag=True, help="promote row errors to fatal")
def features(cdr, topup, towers, out, night_window, home_hours, diversity_direction, strict):
    """Per-user features: home sector, top-up stats, social diversity."""
    cdr = _require_file(cdr, "cdr")
    topup = _require_file(topup, "topup")
    towers = _require_file(towers, "towers")
    out_dir = _out_dir(out)
    _, stats = _stage_features(
        cdr, topup, towers, out_dir, night_window, strict, home_hours, diversity_direction
    )
    _write_manifest(
        out_dir,
        "features",
        inputs={"cdr": cdr, "topup": topup, "towers": towers},
        outputs=["user_features.csv"],
        config={
            "night_window": night_window,
            "home_hours": home_hours,
            "diversity_direction": diversity_direction,
            "strict": strict,
        },
        extra={"stats": stats},
    )
    click.echo(f"{stats['users_out']} user feature vector(s)")


@cli.command()
@click.option("--user-features", "user_features_path", type=click.Path(), required=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--min-users", type=int, default=DEFAULT_MIN_USERS, show_default=True)
@click.option("--columns", default=None, help="comma list pruning feature.aggregator columns")
def aggregate(user_features_path, out, min_users, columns):
    """Aggregate user features into the sector x mobile-variable matrix."""
    path = _require_file(user_features_path, "user_features")
    out_dir = _out_dir(out)
    vectors = read_user_features(path)
    wanted = [c.strip() for c in columns.split(",")] if columns else None
    matrix, excluded = build_sector_matrix(vectors, min_users=min_users, columns=wanted)
    write_sector_matrix(matrix, out_dir / "sector_mobile.csv")
    _write_manifest(
        out_dir,
        "aggregate",
        inputs={"user_features": path},
        outputs=["sector_mobile.csv"],
        config={"min_users": min_users, "columns": columns},
        extra={"stats": {"sectors_out": len(matrix), "sectors_excluded": excluded}},
    )
    click.echo(f"{len(matrix)} sector(s), {len(excluded)} excluded")


@cli.command()
@click.option("--survey", type=click.Path(), required=True)
@click.option("--survey-meta", type=click.Path(), required=True)
@click.option("--fcs-weights", type=click.Path(), default=None,
              help="food_group,weight file (default: standard table)")
@click.option("--fcs-poor-max", type=float, default=None)
@click.option("--fcs-borderline-max", type=float, default=None)
@click.option("--csi-weights", type=click.Path(), default=None)
@click.option("--poverty", type=click.Path(), default=None)
@click.option("--variables", default=None, help="comma list of survey variables to keep")
@click.option("--strict", is_flag=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def indices(survey, survey_meta, fcs_weights, fcs_poor_max, fcs_borderline_max,
            csi_weights, poverty, variables, strict, out):
    """Household indices (FCS, CSI, MPI) and sector survey means."""
    survey = _require_file(survey, "survey")
    survey_meta = _require_file(survey_meta, "survey_meta")
    out_dir = _out_dir(out)
    matrix, _, stats = _stage_indices(
        survey, survey_meta, fcs_weights, fcs_poor_max, fcs_borderline_max,
        csi_weights, poverty, variables, strict, out_dir,
    )
    _write_manifest(
        out_dir,
        "indices",
        inputs={"survey": survey, "survey_meta": survey_meta, "fcs_weights": fcs_weights,
                "csi_weights": csi_weights, "poverty": poverty},
        outputs=["sector_survey.csv"],
        config={"variables": variables, "fcs_poor_max": fcs_poor_max,
                "fcs_borderline_max": fcs_borderline_max, "strict": strict},
        extra={"stats": stats},
    )
    click.echo(f"{len(matrix)} sector(s) x {len(matrix.columns)} column(s)")


@cli.command()
@click.option("--mobile", type=click.Path(), required=True)
@click.option("--survey-matrix", type=click.Path(), required=True)
@click.option("--ci-level", type=float, default=0.95, show_default=True)
@click.option("--heatmap-data", is_flag=True, help="also write heatmap.csv (|r| long format)")
@click.option("--survey-meta", type=click.Path(), default=None,
              help="category tags for heatmap output")
@click.option("--out", type=click.Path(file_okay=False), required=True)
def correlate(mobile, survey_matrix, ci_level, heatmap_data, survey_meta, out):
    """Mobile x survey Pearson correlation matrix with p-values and CIs."""
    mobile_path = _require_file(mobile, "mobile")
    survey_path = _require_file(survey_matrix, "survey_matrix")
    out_dir = _out_dir(out)
    mobile_m = read_sector_matrix(mobile_path)
    survey_m = read_sector_matrix(survey_path, count_column="n_households")
    entries = correlation_matrix(mobile_m, survey_m, level=ci_level)
    outputs = ["correlations.csv"]
    write_correlations(entries, out_dir / outputs[0])
    if heatmap_data:
        categories = _heatmap_categories(survey_meta)
        outputs.append("heatmap.csv")
        write_heatmap_data(entries, categories, out_dir / outputs[1])
    _write_manifest(
        out_dir,
        "correlate",
        inputs={"mobile": mobile_path, "survey_matrix": survey_path,
                "survey_meta": survey_meta},
        outputs=outputs,
        config={"ci_level": ci_level, "heatmap_data": heatmap_data},
    )
    defined = sum(1 for e in entries if e.defined)
    if defined == 0:
        raise FormatError("no defined correlations: do the matrices share sectors?")
    click.echo(f"{len(entries)} pair(s), {defined} defined")


def _heatmap_categories(survey_meta) -> dict[str, str]:
    from .ingest import load_survey_metadata

    categories = {"fcs_mean": "composite", "csi_mean": "composite", "mpi": "poverty"}
    if survey_meta:
        categories.update(load_survey_metadata(_require_file(survey_meta, "survey_meta")))
    return categories


@cli.command()
@click.option("--mobile", type=click.Path(), required=True)
@click.option("--survey-matrix", type=click.Path(), required=True)
@click.option("--trials", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=None, required=False)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def null(mobile, survey_matrix, trials, seed, threads, out):
    """Shuffled-sector null distribution of |r|."""
    seed = _require(seed, "seed")
    mobile_path = _require_file(mobile, "mobile")
    survey_path = _require_file(survey_matrix, "survey_matrix")
    out_dir = _out_dir(out)
    summary = shuffle_null(
        read_sector_matrix(mobile_path),
        read_sector_matrix(survey_path, count_column="n_households"),
        trials=trials,
        seed=seed,
        threads=threads,
    )
    write_null_summary(summary, out_dir / "null_summary.csv")
    # threads is an execution knob that never changes results, so it stays
    # out of the manifest: re-runs at any worker count are byte-identical.
    _write_manifest(
        out_dir,
        "null",
        inputs={"mobile": mobile_path, "survey_matrix": survey_path},
        outputs=["null_summary.csv"],
        config={"trials": trials},
        seed=seed,
    )
    click.echo(
        f"null |r| p95={summary.abs_r_p95:.4f} p99={summary.abs_r_p99:.4f} "
        f"max={summary.abs_r_max:.4f} over {trials} trial(s)"
    )


@cli.command()
@click.option("--mobile", type=click.Path(), required=True)
@click.option("--survey-matrix", type=click.Path(), required=True)
@click.option("--target", required=True, help="survey column to model")
@click.option("--variables", required=True, help="comma list of mobile variables")
@click.option("--degree", type=click.IntRange(1, 2), default=1, show_default=True)
@click.option("--scatter-data", is_flag=True, help="also write scatter_<target>.csv")
@click.option("--out", type=click.Path(file_okay=False), required=True)
def fit(mobile, survey_matrix, target, variables, degree, scatter_data, out):
    """Fit a polynomial proxy model for one survey indicator."""
    mobile_path = _require_file(mobile, "mobile")
    survey_path = _require_file(survey_matrix, "survey_matrix")
    out_dir = _out_dir(out)
    model, outputs = _stage_fit(
        read_sector_matrix(mobile_path),
        read_sector_matrix(survey_path, count_column="n_households"),
        target,
        variables,
        degree,
        scatter_data,
        out_dir,
    )
    _write_manifest(
        out_dir,
        "fit",
        inputs={"mobile": mobile_path, "survey_matrix": survey_path},
        outputs=outputs,
        config={"target": target, "variables": variables, "degree": degree,
                "scatter_data": scatter_data},
    )
    click.echo(f"fit_r={model.fit_r:.4f} over {model.n} sector(s)")


@cli.command()
@click.option("--topup", type=click.Path(), required=True)
@click.option("--user-features", "user_features_path", type=click.Path(), required=True)
@click.option("--window-days", type=int, default=30, show_default=True)
@click.option("--denominator", type=click.Choice(["period", "window"]), default="period")
@click.option("--stock", type=click.Path(), default=None, help="optional date,label,percentage overlay")
@click.option("--strict", is_flag=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def rolling(topup, user_features_path, window_days, denominator, stock, strict, out):
    """Rolling-window top-up expenditure series per sector."""
    topup = _require_file(topup, "topup")
    features_path = _require_file(user_features_path, "user_features")
    stock_path = _require_file(stock, "stock") if stock else None
    out_dir = _out_dir(out)
    home = {v.user_id: v.home_sector for v in read_user_features(features_path)}
    series, outputs, stats = _stage_rolling(
        topup, home, window_days, denominator, stock_path, strict, out_dir
    )
    _write_manifest(
        out_dir,
        "rolling",
        inputs={"topup": topup, "user_features": features_path, "stock": stock_path},
        outputs=outputs,
        config={"window_days": window_days, "denominator": denominator, "strict": strict},
        extra={"stats": stats},
    )
    click.echo(f"{len(series)} sector series")


@cli.command()
@click.option("--truth", type=click.Path(), required=True)
@click.option("--outputs", "outputs_dir", type=click.Path(file_okay=False), required=True)
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="report directory (default: the outputs directory)")
def verify(truth, outputs_dir, out):
    """Check pipeline outputs against a synthetic dataset's ground truth."""
    truth = _require_file(truth, "truth")
    outputs_path = Path(outputs_dir)
    if not outputs_path.is_dir():
        raise ConfigError(f"config key 'outputs': not a directory: {outputs_path}")
    report_dir = _out_dir(out) if out else outputs_path
    report = verify_outputs(truth, outputs_path)
    write_verify_report(report, report_dir / "verify_report.csv")
    for line in report.lines():
        click.echo(line)
    if not report.passed:
        raise VerificationFailed(
            f"{sum(not c.passed for c in report.checks)} of {len(report.checks)} check(s) failed"
        )
    click.echo(f"all {len(report.checks)} check(s) passed")


@cli.command(name="all")
@click.option("--in", "in_dir", type=click.Path(file_okay=False), required=True,
              help="directory with cdr/topup/towers/survey/survey_meta/poverty csv files")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--strict", is_flag=True)
@click.option("--night-window", default="18:00-08:00", show_default=True)
@click.option("--min-users", type=int, default=DEFAULT_MIN_USERS, show_default=True)
@click.option("--ci-level", type=float, default=0.95, show_default=True)
@click.option("--trials", type=int, default=1000, show_default=True)
@click.option("--target", default="food_expenditure", show_default=True)
@click.option("--variables", default="topup_sum.mean,topup_mean.mean", show_default=True)
@click.option("--degree", type=click.IntRange(1, 2), default=2, show_default=True)
@click.option("--window-days", type=int, default=30, show_default=True)
@click.option("--heatmap-data", is_flag=True)
@click.option("--scatter-data", is_flag=True)
def run_all(in_dir, out, seed, threads, strict, night_window, min_users, ci_level,
            trials, target, variables, degree, window_days, heatmap_data, scatter_data):
    """Run the full chain: features, aggregate, indices, correlate, null,
    fit, rolling."""
    seed = _require(seed, "seed")
    base = Path(in_dir)
    paths = {name: base / f"{name}.csv"
             for name in ("cdr", "topup", "towers", "survey", "survey_meta", "poverty")}
    for key in ("cdr", "topup", "towers", "survey", "survey_meta"):
        _require_file(paths[key], key)
    poverty_path = paths["poverty"] if paths["poverty"].exists() else None
    fcs_path = base / "fcs_weights.csv"
    csi_path = base / "csi_weights.csv"
    out_dir = _out_dir(out)
    outputs: list[str] = []
    stats: dict = {}

    vectors, feature_stats = _stage_features(
        paths["cdr"], paths["topup"], paths["towers"], out_dir,
        night_window, strict, "night", "both",
    )
    stats["features"] = feature_stats
    outputs.append("user_features.csv")

    mobile_matrix, excluded = build_sector_matrix(vectors, min_users=min_users)
    write_sector_matrix(mobile_matrix, out_dir / "sector_mobile.csv")
    stats["aggregate"] = {"sectors_out": len(mobile_matrix), "sectors_excluded": excluded}
    outputs.append("sector_mobile.csv")

    survey_matrix, categories, index_stats = _stage_indices(
        paths["survey"], paths["survey_meta"],
        fcs_path if fcs_path.exists() else None, None, None,
        csi_path if csi_path.exists() else None,
        poverty_path, None, strict, out_dir,
    )
    stats["indices"] = index_stats
    outputs.append("sector_survey.csv")

    entries = correlation_matrix(mobile_matrix, survey_matrix, level=ci_level)
    write_correlations(entries, out_dir / "correlations.csv")
    outputs.append("correlations.csv")
    if heatmap_data:
        write_heatmap_data(entries, categories, out_dir / "heatmap.csv")
        outputs.append("heatmap.csv")

    summary = shuffle_null(mobile_matrix, survey_matrix, trials=trials, seed=seed,
                           threads=threads)
    write_null_summary(summary, out_dir / "null_summary.csv")
    outputs.append("null_summary.csv")

    model, fit_outputs = _stage_fit(
        mobile_matrix, survey_matrix, target, variables, degree, scatter_data, out_dir
    )
    outputs.extend(fit_outputs)
    stats["fit"] = {"fit_r": model.fit_r, "n": model.n}

    home = {v.user_id: v.home_sector for v in vectors}
    _, rolling_outputs, rolling_stats = _stage_rolling(
        paths["topup"], home, window_days, "period", None, strict, out_dir
    )
    outputs.extend(rolling_outputs)
    stats["rolling"] = rolling_stats

    _write_manifest(
        out_dir,
        "all",
        inputs={k: p for k, p in paths.items() if p.exists()},
        outputs=outputs,
        config={"night_window": night_window, "min_users": min_users,
                "ci_level": ci_level, "trials": trials,
                "target": target, "variables": variables, "degree": degree,
                "window_days": window_days, "strict": strict,
                "heatmap_data": heatmap_data, "scatter_data": scatter_data},
        seed=seed,
        extra={"stats": stats},
    )
    click.echo(f"wrote {len(outputs)} artifact(s) to {out_dir}")


def main(argv=None) -> int:
    """Console entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False, auto_envvar_prefix="FOODSEC")
        return 0
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except VerificationFailed as exc:
        click.echo(f"verification failed: {exc}", err=True)
        return 2
    except FormatError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except Exception:  # pragma: no cover - the catch-all contract
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
