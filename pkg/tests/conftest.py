import numpy as np
import pytest

from jetcast.data import SynthConfig, TimeSeries, synth_generate


def random_series(rng: np.random.Generator, n: int, start: int = 0) -> TimeSeries:
    """Arbitrary but schema-valid series; values are unrelated so lag cells are easy to tell apart."""
    ts = start + 10 * np.arange(n, dtype=np.int64)
    feats = rng.uniform(-50.0, 1100.0, (n, 8))
    speeds = rng.uniform(0.0, 25.0, (n, 4))
    return TimeSeries(ts, feats, speeds)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_series():
    return synth_generate(SynthConfig(length=600, seed=3))


VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[VERDICTS] = []


@pytest.fixture
def verdict(request, capsys):
    """Record and print one acceptance line: ``verdict(name, ok, detail)``."""

    def record(name: str, ok: bool, detail: str = "") -> None:
        line = f"ACCEPTANCE {'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip()
        request.config.stash[VERDICTS].append(line)
        with capsys.disabled():
            print(f"\n{line}")

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
