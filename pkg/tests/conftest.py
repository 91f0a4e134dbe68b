import io

import pytest

from foodsec.synth import SynthConfig, generate


def text_stream(body: str) -> io.StringIO:
    return io.StringIO(body)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A small but fully featured synthetic dataset shared across tests."""
    out = tmp_path_factory.mktemp("small_synth")
    cfg = SynthConfig(
        seed=5,
        n_sectors=12,
        users_per_sector=45,
        households_per_sector=15,
        period_days=60,
        night_calls_min=10,
        night_calls_extra_mean=3.0,
        day_calls_mean=3.0,
        topup_events_mean=5.0,
    )
    paths = generate(cfg, out)
    return cfg, paths


@pytest.fixture(scope="session")
def medium_dataset(tmp_path_factory):
    """Enough sectors for the statistical ground-truth checks to be stable."""
    out = tmp_path_factory.mktemp("medium_synth")
    cfg = SynthConfig(
        seed=2,
        n_sectors=60,
        users_per_sector=45,
        households_per_sector=25,
        period_days=60,
        night_calls_min=10,
        night_calls_extra_mean=3.0,
        day_calls_mean=3.0,
        topup_events_mean=5.0,
    )
    paths = generate(cfg, out)
    return cfg, paths


@pytest.fixture(scope="session")
def medium_pipeline(medium_dataset, tmp_path_factory):
    """`all` run over the medium dataset, shared by CLI and verify tests."""
    from foodsec.cli import main

    _, paths = medium_dataset
    out = tmp_path_factory.mktemp("medium_outputs")
    rc = main(
        ["all", "--in", str(paths["cdr"].parent), "--out", str(out),
         "--seed", "3", "--trials", "50", "--min-users", "5"]
    )
    assert rc == 0
    return out
