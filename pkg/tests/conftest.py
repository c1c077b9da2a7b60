import datetime as dt

import pytest
from hypothesis import HealthCheck, settings

from xlstm_trader import kernels
from xlstm_trader.market import SynthConfig, load_manifest, load_panel, turbulence_series, write_market

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    with kernels.use_backend(request.param):
        yield request.param


@pytest.fixture(scope="session")
def small_market(tmp_path_factory):
    """400 business days, one ticker with an upward drift segment."""
    out = tmp_path_factory.mktemp("market")
    path = write_market(out, SynthConfig(n_days=400, seed=7))
    return path


@pytest.fixture(scope="session")
def small_panel(small_market):
    manifest = load_manifest(small_market)
    panel = load_panel(manifest)
    return manifest, panel, turbulence_series(panel, manifest.train_start, manifest.train_end)


@pytest.fixture(scope="session")
def flat_market(tmp_path_factory):
    """Constant prices: zero drift and zero volatility."""
    out = tmp_path_factory.mktemp("flat")
    return write_market(out, SynthConfig(n_days=300, drift=0.0, vol=0.0, seed=1))


@pytest.fixture(scope="session")
def multi_market(tmp_path_factory):
    out = tmp_path_factory.mktemp("multi")
    return write_market(out, SynthConfig(n_days=420, tickers=("AAA", "BBB", "CCC"), seed=3, vol=0.02))


def rand(rng, *shape, lo=-2.0, hi=2.0):
    return rng.uniform(lo, hi, size=shape)


def days(*isos):
    return [dt.date.fromisoformat(s) for s in isos]


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
