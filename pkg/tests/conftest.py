import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from haelt.data import OhlcvSeries  # noqa: E402


def random_ohlcv(n: int = 500, seed: int = 0, start: int = 1_600_000_000) -> OhlcvSeries:
    """Random-walk bars satisfying the OHLC envelope."""
    rng = np.random.default_rng(seed)
    close = 100.0 * np.exp(np.cumsum(0.01 * rng.standard_normal(n)))
    open_ = np.r_[100.0, close[:-1]] * np.exp(0.002 * rng.standard_normal(n))
    high = np.maximum(open_, close) * (1 + 0.005 * rng.random(n))
    low = np.minimum(open_, close) * (1 - 0.005 * rng.random(n))
    volume = rng.uniform(1e3, 1e6, n).round()
    return OhlcvSeries(start + 3600 * np.arange(n), open_, high, low, close, volume)


@pytest.fixture
def ohlcv():
    return random_ohlcv()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
