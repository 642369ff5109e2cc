"""OHLCV ingestion, cleaning, scaling, chronological splitting and windowing."""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DataError

logger = logging.getLogger(__name__)

OHLCV_COLUMNS = ("open", "high", "low", "close", "volume")
CSV_HEADER = ("timestamp",) + OHLCV_COLUMNS


@dataclass
class OhlcvSeries:
    """Hourly bars; missing fields are NaN until :func:`forward_fill` runs."""

    timestamp: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray

    def __post_init__(self):
        self.timestamp = np.asarray(self.timestamp, dtype=np.int64)
        for col in OHLCV_COLUMNS:
            setattr(self, col, np.asarray(getattr(self, col), dtype=np.float64))
        n = len(self.timestamp)
        if any(len(getattr(self, c)) != n for c in OHLCV_COLUMNS):
            raise DataError("OHLCV columns differ in length")

    def __len__(self) -> int:
        return len(self.timestamp)

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def columns(self) -> dict[str, np.ndarray]:
        return {c: getattr(self, c) for c in OHLCV_COLUMNS}

    def replace(self, **columns) -> "OhlcvSeries":
        data = {"timestamp": self.timestamp, **self.columns(), **columns}
        return OhlcvSeries(**data)

    def slice(self, start: int, stop: int) -> "OhlcvSeries":
        return OhlcvSeries(self.timestamp[start:stop],
                           **{c: v[start:stop] for c, v in self.columns().items()})

    def validate(self) -> None:
        """Check monotone timestamps, non-negative volume and the bar envelope."""
        if len(self) and np.any(np.diff(self.timestamp) <= 0):
            raise DataError("timestamps are not strictly increasing")
        complete = ~np.isnan(np.column_stack(list(self.columns().values()))).any(axis=1)
        vol = self.volume
        bad = np.flatnonzero(~np.isnan(vol) & (vol < 0))
        if bad.size:
            raise _row_error(f"negative volume at row {bad[0]}", bad[0])
        hi, lo = self.high, self.low
        top = np.maximum(self.open, self.close)
        bottom = np.minimum(self.open, self.close)
        bad = np.flatnonzero(complete & ((hi < top) | (lo > bottom)))
        if bad.size:
            raise _row_error("bar envelope violated (high < max(open, close) or "
                             f"low > min(open, close)) at row {bad[0]}", bad[0])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for i in range(len(self)):
                w.writerow([int(self.timestamp[i])] + [repr(float(getattr(self, c)[i]))
                                                       for c in OHLCV_COLUMNS])


def _row_error(message: str, row) -> DataError:
    exc = DataError(message)
    exc.row = int(row)
    return exc


def load_csv(path) -> OhlcvSeries:
    """Read ``timestamp,open,high,low,close,volume`` (header case-insensitive).

    Empty cells become NaN for later forward filling. Rows are sorted by
    timestamp; duplicate timestamps, negative volume and malformed cells raise
    :class:`DataError` naming the file line.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [c for c in CSV_HEADER if c not in header]
        if missing:
            raise DataError(f"{path}: header lacks columns {missing}")
        idx = [header.index(c) for c in CSV_HEADER]
        ts, rows, lines = [], [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not cell.strip() for cell in rec):
                continue
            if len(rec) < len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                stamp = int(float(rec[idx[0]]))
                vals = [float(rec[i]) if rec[i].strip() else math.nan for i in idx[1:]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: malformed row ({exc})") from None
            if any(math.isinf(v) for v in vals):
                raise DataError(f"{path}:{lineno}: infinite value")
            if not math.isnan(vals[4]) and vals[4] < 0:
                raise DataError(f"{path}:{lineno}: negative volume {vals[4]}")
            ts.append(stamp)
            rows.append(vals)
            lines.append(lineno)
    if not rows:
        raise DataError(f"{path}: no data rows")
    ts_arr = np.asarray(ts, dtype=np.int64)
    order = np.argsort(ts_arr, kind="stable")
    ts_arr = ts_arr[order]
    dup = np.flatnonzero(np.diff(ts_arr) == 0)
    if dup.size:
        raise DataError(f"{path}:{lines[order[dup[0] + 1]]}: duplicate timestamp {ts_arr[dup[0]]}")
    data = np.asarray(rows, dtype=np.float64)[order]
    series = OhlcvSeries(ts_arr, *data.T)
    try:
        series.validate()
    except DataError as exc:
        if getattr(exc, "row", None) is None:
            raise
        raise DataError(f"{path}:{lines[order[exc.row]]}: {exc}") from None
    return series


def forward_fill(series: OhlcvSeries) -> OhlcvSeries:
    """Replace missing fields with the most recent valid value.

    Filled bars get their high/low widened to enclose open and close so the
    envelope invariant survives imputation.
    """
    if len(series) == 0:
        return series
    cols = {}
    for name, col in series.columns().items():
        if np.isnan(col[0]):
            raise DataError(f"forward_fill: first row has missing {name}")
        valid = ~np.isnan(col)
        idx = np.where(valid, np.arange(len(col)), 0)
        np.maximum.accumulate(idx, out=idx)
        cols[name] = col[idx]
    filled = np.isnan(np.column_stack(list(series.columns().values()))).any(axis=1)
    if filled.any():
        top = np.maximum(cols["open"], cols["close"])
        bottom = np.minimum(cols["open"], cols["close"])
        cols["high"] = np.where(filled, np.maximum(cols["high"], top), cols["high"])
        cols["low"] = np.where(filled, np.minimum(cols["low"], bottom), cols["low"])
    return series.replace(**cols)


def winsorize(column, lower_pct: float = 0.5, upper_pct: float = 99.5) -> np.ndarray:
    """Clip to the given percentiles (linear interpolation between closest ranks)."""
    col = np.asarray(column, dtype=np.float64)
    if col.size == 0:
        raise DataError("winsorize: empty column")
    if not 0 <= lower_pct <= upper_pct <= 100:
        raise ValueError("percentiles must satisfy 0 <= lower <= upper <= 100")
    lo, hi = np.percentile(col, [lower_pct, upper_pct])
    return np.clip(col, lo, hi)


def winsorize_series(series: OhlcvSeries, lower_pct: float = 0.5,
                     upper_pct: float = 99.5) -> OhlcvSeries:
    return series.replace(**{c: winsorize(v, lower_pct, upper_pct)
                             for c, v in series.columns().items()})


class Winsorizer(TransformerMixin, BaseEstimator):
    """Learn per-column percentile bounds on ``fit``; clip to them on ``transform``."""

    def __init__(self, lower_pct: float = 0.5, upper_pct: float = 99.5):
        self.lower_pct = lower_pct
        self.upper_pct = upper_pct

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if not 0 <= self.lower_pct <= self.upper_pct <= 100:
            raise ValueError("percentiles must satisfy 0 <= lower <= upper <= 100")
        self.lower_, self.upper_ = np.percentile(X, [self.lower_pct, self.upper_pct], axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "lower_")
        return np.clip(check_array(X, dtype=np.float64), self.lower_, self.upper_)


# ---------------------------------------------------------------- scaling


@dataclass
class ScalerState:
    min: np.ndarray
    max: np.ndarray
    names: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"names": list(self.names), "min": self.min.tolist(), "max": self.max.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScalerState":
        return cls(np.asarray(d["min"], float), np.asarray(d["max"], float), tuple(d.get("names", ())))


def fit_scaler(train_columns, names: Sequence[str] = ()) -> ScalerState:
    """Per-column min/max over training rows (2-D input: rows x columns)."""
    arr = np.asarray(train_columns, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[0] == 0:
        raise DataError("fit_scaler: no training rows")
    if not np.all(np.isfinite(arr)):
        raise DataError("fit_scaler: non-finite training values")
    state = ScalerState(arr.min(axis=0), arr.max(axis=0), tuple(names))
    flat = np.flatnonzero(state.max == state.min)
    if flat.size:
        which = [state.names[i] if state.names else str(i) for i in flat]
        warnings.warn(f"constant training column(s) {which}; scaled to 0.5", RuntimeWarning,
                      stacklevel=2)
    return state


def apply_scaler(state: ScalerState, columns) -> np.ndarray:
    """``(x - min) / (max - min)``; constant columns map to 0.5. Never refits."""
    arr = np.asarray(columns, dtype=np.float64)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[:, None]
    if arr.shape[1] != state.min.size:
        raise DataError(f"apply_scaler: expected {state.min.size} columns, got {arr.shape[1]}")
    span = state.max - state.min
    flat = span == 0
    out = (arr - state.min) / np.where(flat, 1.0, span)
    out[:, flat] = 0.5
    return out[:, 0] if squeeze else out


class MinMaxScaler(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_scaler` / :func:`apply_scaler`."""

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.state_ = fit_scaler(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "state_")
        return apply_scaler(self.state_, check_array(X, dtype=np.float64))


# ---------------------------------------------------------------- split & windows


@dataclass(frozen=True)
class Split:
    train: range
    val: range
    test: range

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)


def chronological_split(n: int, fractions: Sequence[float] = (0.8, 0.1, 0.1),
                        min_size: int = 50) -> Split:
    """Contiguous train/val/test ranges: floor, floor, remainder."""
    if n < min_size:
        raise DataError(f"chronological_split: need at least {min_size} records, got {n}")
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1) > 1e-9:
        raise ValueError("fractions must be three positive numbers summing to 1")
    n_train = math.floor(fractions[0] * n + 1e-9)
    n_val = math.floor(fractions[1] * n + 1e-9)
    return Split(range(0, n_train), range(n_train, n_train + n_val), range(n_train + n_val, n))


@dataclass
class SequenceDataset:
    """Windows (N, length, F), next-step direction labels and window-end timestamps."""

    windows: np.ndarray
    labels: np.ndarray
    timestamps: np.ndarray
    feature_names: tuple[str, ...] = ()
    end_rows: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "SequenceDataset":
        return SequenceDataset(self.windows[idx], self.labels[idx], self.timestamps[idx],
                               self.feature_names,
                               self.end_rows[idx] if len(self.end_rows) else self.end_rows)


def direction_labels(close) -> np.ndarray:
    """``1`` if the next close is strictly higher else ``0``; length ``len(close) - 1``."""
    close = np.asarray(close, dtype=np.float64)
    return (close[1:] > close[:-1]).astype(np.int64)


def make_sequences(features, close, length: int = 30, timestamps=None,
                   feature_names: Sequence[str] = ()) -> SequenceDataset:
    """Every full window whose last row has a successor.

    Window ``i`` covers rows ``i .. i+length-1`` and its label compares the
    close of row ``i+length`` with row ``i+length-1``; there are
    ``rows - length`` windows.
    """
    feats = np.asarray(features, dtype=np.float64)
    close = np.asarray(close, dtype=np.float64)
    if feats.ndim != 2 or len(feats) != len(close):
        raise DataError("make_sequences: features must be 2-D and aligned with close")
    rows = len(feats)
    if length < 1 or rows <= length:
        raise DataError(f"make_sequences: need more than {length} rows, got {rows}")
    n = rows - length
    view = np.lib.stride_tricks.sliding_window_view(feats, length, axis=0)  # (rows-length+1, F, length)
    windows = np.ascontiguousarray(view[:n].transpose(0, 2, 1))
    end_rows = np.arange(length - 1, length - 1 + n)
    labels = direction_labels(close)[end_rows]
    ts = np.asarray(timestamps)[end_rows] if timestamps is not None else end_rows.copy()
    return SequenceDataset(windows, labels, ts, tuple(feature_names), end_rows)
