"""Synthetic hourly OHLCV generator (geometric random walk with regimes)."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .data import OhlcvSeries
from .exceptions import ConfigError

HOUR = 3600
DEFAULT_START = 1_577_869_200  # 2020-01-01 09:00 UTC


@dataclass
class Regime:
    rows: int
    drift: float = 0.0
    volatility: float = 0.01

    def __post_init__(self):
        if self.rows < 1:
            raise ConfigError("regime rows must be >= 1")
        if self.volatility < 0:
            raise ConfigError("regime volatility must be >= 0")


@dataclass
class SyntheticSpec:
    """``regimes`` cover the series in order; the last one is stretched to ``n_rows``.

    ``volume_signal`` > 0 plants a detectable cue: a bar's volume is scaled by
    ``1 + volume_signal`` whenever the next close is higher.
    """

    n_rows: int = 2438
    regimes: list[Regime] = field(default_factory=lambda: [Regime(2438, 0.0, 0.01)])
    base_price: float = 100.0
    base_volume: float = 1_000_000.0
    volume_signal: float = 0.0
    seed: int = 0
    start: int = DEFAULT_START

    def __post_init__(self):
        self.regimes = [r if isinstance(r, Regime) else Regime(**r) for r in self.regimes]
        self.validate()

    def validate(self) -> None:
        if self.n_rows < 100:
            raise ConfigError(f"n_rows must be >= 100, got {self.n_rows}")
        if not self.regimes:
            raise ConfigError("at least one regime is required")
        if self.base_price <= 0 or self.base_volume <= 0:
            raise ConfigError("base price and volume must be positive")
        if self.volume_signal < 0:
            raise ConfigError("volume_signal must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        return cls(**d)

    def schedule(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-row drift and volatility."""
        drift = np.empty(self.n_rows)
        vol = np.empty(self.n_rows)
        pos = 0
        for i, r in enumerate(self.regimes):
            stop = self.n_rows if i == len(self.regimes) - 1 else min(pos + r.rows, self.n_rows)
            drift[pos:stop] = r.drift
            vol[pos:stop] = r.volatility
            pos = stop
            if pos >= self.n_rows:
                break
        return drift, vol


def generate(spec: SyntheticSpec) -> OhlcvSeries:
    """Deterministic per seed: close follows ``base * exp(cumsum(drift + vol * z))``."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_rows
    drift, vol = spec.schedule()
    z = rng.standard_normal(n)
    close = spec.base_price * np.exp(np.cumsum(drift + vol * z))
    open_ = np.r_[spec.base_price, close[:-1]]
    wick_up = vol * np.abs(rng.standard_normal(n)) * 0.5
    wick_dn = vol * np.abs(rng.standard_normal(n)) * 0.5
    high = np.maximum(open_, close) * np.exp(wick_up)
    low = np.minimum(open_, close) * np.exp(-wick_dn)
    volume = spec.base_volume * rng.uniform(0.8, 1.2, n)
    if spec.volume_signal:
        up_next = np.r_[close[1:] > close[:-1], False]
        volume = volume * np.where(up_next, 1.0 + spec.volume_signal, 1.0)
    timestamps = spec.start + HOUR * np.arange(n, dtype=np.int64)
    return OhlcvSeries(timestamps, open_, high, low, close, np.round(volume))
