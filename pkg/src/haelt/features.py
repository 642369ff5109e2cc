"""Technical-indicator feature set.

Every indicator is causal: the value at row ``t`` uses rows ``<= t`` only.
Leading rows without enough history are NaN and counted in
:attr:`FeatureFrame.warmup`.

Conventions
-----------
* EMA: ``alpha = 2 / (window + 1)``, seeded with the SMA of the first
  ``window`` valid values.
* Wilder smoothing (RSI, ATR, ADX): ``alpha = 1 / window``, same seeding.
* Rolling standard deviations are population (divide by ``n``).
* True range needs the previous close, so it starts at row 1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .data import OHLCV_COLUMNS, OhlcvSeries
from .exceptions import DataError

LONGEST_LOOKBACK = 50

FEATURE_REGISTRY: tuple[str, ...] = (
    "sma_10", "sma_20", "sma_50",
    "ema_10", "ema_20", "ema_50",
    "macd", "macd_signal", "macd_diff",
    "adx", "vortex_pos", "vortex_neg",
    "rsi", "stoch_k", "stoch_d", "roc", "ultimate_oscillator", "williams_r",
    "bb_high_ind", "bb_low_ind", "bb_width", "bb_pct_b", "atr",
    "obv", "mfi", "cmf", "force_index",
    "close_lag_1", "close_lag_2", "close_lag_3", "close_lag_4", "close_lag_5",
    "volume_lag_1", "volume_lag_2", "volume_lag_3", "volume_lag_4", "volume_lag_5",
    "close_roll_mean_6", "close_roll_mean_12", "close_roll_mean_24",
    "close_roll_std_6", "close_roll_std_12", "close_roll_std_24",
    "high_low_ratio", "close_open_ratio", "price_change_1h", "price_change_6h",
)


# ---------------------------------------------------------------- primitives


def _windows(x: np.ndarray, n: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(x, n)


def _rolling(x, n: int, reducer) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.full(len(x), np.nan)
    if len(x) >= n:
        out[n - 1:] = reducer(_windows(x, n), axis=-1)
    return out


def rolling_sum(x, n: int) -> np.ndarray:
    return _rolling(x, n, np.sum)


def sma(x, n: int) -> np.ndarray:
    return _rolling(x, n, np.mean)


def rolling_std(x, n: int) -> np.ndarray:
    return _rolling(x, n, np.std)


def rolling_max(x, n: int) -> np.ndarray:
    return _rolling(x, n, np.max)


def rolling_min(x, n: int) -> np.ndarray:
    return _rolling(x, n, np.min)


def _smooth(x, n: int, alpha: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.full(len(x), np.nan)
    valid = np.flatnonzero(~np.isnan(x))
    if valid.size == 0:
        return out
    first = valid[0]
    seed = first + n - 1
    if seed >= len(x):
        return out
    prev = x[first:seed + 1].mean()
    out[seed] = prev
    keep = 1.0 - alpha
    for t in range(seed + 1, len(x)):
        prev = alpha * x[t] + keep * prev
        out[t] = prev
    return out


def ema(x, n: int) -> np.ndarray:
    """Exponential moving average, ``alpha = 2/(n+1)``, SMA-seeded."""
    return _smooth(x, n, 2.0 / (n + 1))


def wilder(x, n: int) -> np.ndarray:
    """Wilder smoothing, ``alpha = 1/n``, SMA-seeded."""
    return _smooth(x, n, 1.0 / n)


def _safe_ratio(num, den, fill: float) -> np.ndarray:
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.full(num.shape, np.nan)
    ok = ~(np.isnan(num) | np.isnan(den))
    zero = ok & (den == 0)
    nz = ok & ~zero
    out[nz] = num[nz] / den[nz]
    out[zero] = fill
    return out


def _prev(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    out[0] = np.nan
    out[1:] = x[:-1]
    return out


def lag(x, k: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.full(len(x), np.nan)
    out[k:] = x[:len(x) - k]
    return out


def true_range(high, low, close) -> np.ndarray:
    pc = _prev(close)
    return np.fmax(high - low, np.fmax(np.abs(high - pc), np.abs(low - pc))) + 0.0 * pc


# ---------------------------------------------------------------- indicators


def rsi(close, window: int = 14) -> np.ndarray:
    """Wilder RSI; zero average loss gives 100 (50 when gains are zero too)."""
    delta = np.asarray(close, dtype=np.float64) - _prev(close)
    gain = wilder(np.where(delta > 0, delta, 0.0) + 0.0 * delta, window)
    loss = wilder(np.where(delta < 0, -delta, 0.0) + 0.0 * delta, window)
    out = 100.0 - 100.0 / (1.0 + _safe_ratio(gain, loss, np.inf))
    flat = (gain == 0) & (loss == 0)
    out[flat] = 50.0
    return out


def macd(close, fast: int = 12, slow: int = 26, signal: int = 9):
    """Returns ``(macd, signal, diff)``."""
    close = np.asarray(close, dtype=np.float64)
    if len(close) < slow + signal - 1:
        raise DataError(f"macd: need at least {slow + signal - 1} rows, got {len(close)}")
    line = ema(close, fast) - ema(close, slow)
    sig = ema(line, signal)
    return line, sig, line - sig


def bollinger(close, window: int = 20, k: float = 2.0):
    """Returns ``(high_indicator, low_indicator, width, percent_b)``.

    ``width = 2k*std/mid``; ``%B = (close - lower) / (upper - lower)``. A flat
    window gives width 0 and %B 0.5.
    """
    close = np.asarray(close, dtype=np.float64)
    mid = sma(close, window)
    band = k * rolling_std(close, window)
    upper, lower = mid + band, mid - band
    valid = ~np.isnan(mid)
    hi = np.where(valid, (close > upper).astype(float), np.nan)
    lo = np.where(valid, (close < lower).astype(float), np.nan)
    width = _safe_ratio(2.0 * band, mid, 0.0)
    width[valid & (band == 0)] = 0.0
    pct_b = _safe_ratio(close - lower, 2.0 * band, 0.5)
    return hi, lo, width, pct_b


def atr(high, low, close, window: int = 14) -> np.ndarray:
    return wilder(true_range(high, low, close), window)


def adx(high, low, close, window: int = 14) -> np.ndarray:
    """Wilder's average directional index."""
    high = np.asarray(high, dtype=np.float64)
    low = np.asarray(low, dtype=np.float64)
    up = high - _prev(high)
    down = _prev(low) - low
    plus_dm = np.where((up > down) & (up > 0), up, 0.0) + 0.0 * up
    minus_dm = np.where((down > up) & (down > 0), down, 0.0) + 0.0 * down
    tr = wilder(true_range(high, low, close), window)
    plus_di = 100.0 * _safe_ratio(wilder(plus_dm, window), tr, 0.0)
    minus_di = 100.0 * _safe_ratio(wilder(minus_dm, window), tr, 0.0)
    dx = 100.0 * _safe_ratio(np.abs(plus_di - minus_di), plus_di + minus_di, 0.0)
    return wilder(dx, window)


def vortex(high, low, close, window: int = 14):
    """Returns ``(VI+, VI-)``."""
    high = np.asarray(high, dtype=np.float64)
    low = np.asarray(low, dtype=np.float64)
    vm_plus = np.abs(high - _prev(low))
    vm_minus = np.abs(low - _prev(high))
    tr = rolling_sum(true_range(high, low, close), window)
    return (_safe_ratio(rolling_sum(vm_plus, window), tr, 0.0),
            _safe_ratio(rolling_sum(vm_minus, window), tr, 0.0))


def stochastic(high, low, close, window: int = 14, smooth_window: int = 3):
    """Returns ``(%K, %D)``: raw %K over ``window`` and its SMA over ``smooth_window``."""
    hh = rolling_max(high, window)
    ll = rolling_min(low, window)
    k = 100.0 * _safe_ratio(np.asarray(close, float) - ll, hh - ll, 0.5)
    return k, sma(k, smooth_window)


def roc(close, window: int = 10) -> np.ndarray:
    base = lag(close, window)
    return 100.0 * (np.asarray(close, float) - base) / base


def ultimate_oscillator(high, low, close, short: int = 7, medium: int = 14, long: int = 28):
    close = np.asarray(close, dtype=np.float64)
    pc = _prev(close)
    floor = np.fmin(low, pc) + 0.0 * pc
    bp = close - floor
    tr = np.fmax(high, pc) - floor
    avgs = [_safe_ratio(rolling_sum(bp, n), rolling_sum(tr, n), 0.5) for n in (short, medium, long)]
    return 100.0 * (4.0 * avgs[0] + 2.0 * avgs[1] + avgs[2]) / 7.0


def williams_r(high, low, close, window: int = 14) -> np.ndarray:
    hh = rolling_max(high, window)
    ll = rolling_min(low, window)
    return -100.0 * _safe_ratio(hh - np.asarray(close, float), hh - ll, 0.5)


def obv(close, volume) -> np.ndarray:
    close = np.asarray(close, dtype=np.float64)
    step = np.zeros(len(close))
    step[1:] = np.sign(np.diff(close)) * np.asarray(volume, float)[1:]
    return np.cumsum(step)


def mfi(high, low, close, volume, window: int = 14) -> np.ndarray:
    tp = (np.asarray(high, float) + np.asarray(low, float) + np.asarray(close, float)) / 3.0
    flow = tp * np.asarray(volume, float)
    change = tp - _prev(tp)
    pos = np.where(change > 0, flow, 0.0) + 0.0 * change
    neg = np.where(change < 0, flow, 0.0) + 0.0 * change
    p, n = rolling_sum(pos, window), rolling_sum(neg, window)
    return 100.0 * _safe_ratio(p, p + n, 0.5)


def cmf(high, low, close, volume, window: int = 20) -> np.ndarray:
    high = np.asarray(high, float)
    low = np.asarray(low, float)
    close = np.asarray(close, float)
    volume = np.asarray(volume, float)
    mult = _safe_ratio((close - low) - (high - close), high - low, 0.0)
    return _safe_ratio(rolling_sum(mult * volume, window), rolling_sum(volume, window), 0.0)


def force_index(close, volume, window: int = 13) -> np.ndarray:
    close = np.asarray(close, float)
    return ema((close - _prev(close)) * np.asarray(volume, float), window)


def price_change(close, periods: int) -> np.ndarray:
    base = lag(close, periods)
    return (np.asarray(close, float) - base) / base


# ---------------------------------------------------------------- frame


@dataclass
class FeatureFrame:
    """Named feature columns aligned to timestamps."""

    columns: dict[str, np.ndarray]
    timestamps: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise DataError("feature columns differ in length")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.columns)

    @property
    def length(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    @property
    def warmup(self) -> dict[str, int]:
        out = {}
        for name, col in self.columns.items():
            valid = np.flatnonzero(~np.isnan(col))
            out[name] = int(valid[0]) if valid.size else len(col)
        return out

    @property
    def max_warmup(self) -> int:
        return max(self.warmup.values(), default=0)

    def matrix(self, names=None) -> np.ndarray:
        names = self.names if names is None else names
        return np.column_stack([self.columns[n] for n in names])

    def trimmed(self, rows: int | None = None) -> "FeatureFrame":
        """Drop the joint warm-up prefix (or the first ``rows`` rows)."""
        k = self.max_warmup if rows is None else rows
        ts = self.timestamps[k:] if len(self.timestamps) else self.timestamps
        return FeatureFrame({n: c[k:] for n, c in self.columns.items()}, ts)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(("timestamp",) + self.names)
            ts = self.timestamps if len(self.timestamps) else np.arange(self.length)
            mat = self.matrix()
            for i in range(self.length):
                w.writerow([int(ts[i])] + ["" if np.isnan(v) else repr(float(v)) for v in mat[i]])


def compute_feature_set(series: OhlcvSeries, include_raw: bool = False) -> FeatureFrame:
    """Compute the full indicator registry (optionally preceded by raw OHLCV)."""
    n = len(series)
    if n <= LONGEST_LOOKBACK:
        raise DataError(f"compute_feature_set: need more than {LONGEST_LOOKBACK} rows, got {n}")
    o, h, l, c, v = (series.column(k) for k in OHLCV_COLUMNS)
    if np.isnan(np.column_stack((o, h, l, c, v))).any():
        raise DataError("compute_feature_set: series has missing values; forward_fill first")
    cols: dict[str, np.ndarray] = {}
    if include_raw:
        cols.update({k: series.column(k).copy() for k in OHLCV_COLUMNS})
    for w in (10, 20, 50):
        cols[f"sma_{w}"] = sma(c, w)
    for w in (10, 20, 50):
        cols[f"ema_{w}"] = ema(c, w)
    cols["macd"], cols["macd_signal"], cols["macd_diff"] = macd(c)
    cols["adx"] = adx(h, l, c)
    cols["vortex_pos"], cols["vortex_neg"] = vortex(h, l, c)
    cols["rsi"] = rsi(c)
    cols["stoch_k"], cols["stoch_d"] = stochastic(h, l, c)
    cols["roc"] = roc(c)
    cols["ultimate_oscillator"] = ultimate_oscillator(h, l, c)
    cols["williams_r"] = williams_r(h, l, c)
    cols["bb_high_ind"], cols["bb_low_ind"], cols["bb_width"], cols["bb_pct_b"] = bollinger(c)
    cols["atr"] = atr(h, l, c)
    cols["obv"] = obv(c, v)
    cols["mfi"] = mfi(h, l, c, v)
    cols["cmf"] = cmf(h, l, c, v)
    cols["force_index"] = force_index(c, v)
    for k in range(1, 6):
        cols[f"close_lag_{k}"] = lag(c, k)
    for k in range(1, 6):
        cols[f"volume_lag_{k}"] = lag(v, k)
    for w in (6, 12, 24):
        cols[f"close_roll_mean_{w}"] = sma(c, w)
    for w in (6, 12, 24):
        cols[f"close_roll_std_{w}"] = rolling_std(c, w)
    cols["high_low_ratio"] = h / l
    cols["close_open_ratio"] = c / o
    cols["price_change_1h"] = price_change(c, 1)
    cols["price_change_6h"] = price_change(c, 6)
    return FeatureFrame(cols, series.timestamp.copy())


class FeatureEngineer(TransformerMixin, BaseEstimator):
    """Stateless transformer: (n, 5) OHLCV matrix -> indicator matrix with NaN warm-up."""

    def __init__(self, include_raw: bool = False):
        self.include_raw = include_raw

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(OHLCV_COLUMNS):
            raise DataError("FeatureEngineer expects an (n, 5) open/high/low/close/volume matrix")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        series = OhlcvSeries(np.arange(len(X)), *X.T)
        return compute_feature_set(series, self.include_raw).matrix()

    def get_feature_names_out(self, input_features=None):
        raw = OHLCV_COLUMNS if self.include_raw else ()
        return np.asarray(raw + FEATURE_REGISTRY, dtype=object)
