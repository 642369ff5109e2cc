import numpy as np
import pytest

import oracles
from conftest import random_ohlcv
from haelt.data import OhlcvSeries
from haelt.exceptions import DataError
from haelt.features import (FEATURE_REGISTRY, LONGEST_LOOKBACK, FeatureEngineer, bollinger,
                            compute_feature_set, ema, macd, obv, rsi, sma, wilder)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_every_feature_matches_naive_oracle(seed):
    s = random_ohlcv(500, seed)
    frame = compute_feature_set(s)
    expected = oracles.feature_table(s.open, s.high, s.low, s.close, s.volume)
    assert frame.names == FEATURE_REGISTRY
    assert set(expected) == set(FEATURE_REGISTRY)
    for name in FEATURE_REGISTRY:
        got = frame.columns[name]
        want = np.array(expected[name])
        np.testing.assert_array_equal(np.isnan(got), np.isnan(want), err_msg=name)
        ok = ~np.isnan(want)
        np.testing.assert_allclose(got[ok], want[ok], rtol=1e-9, atol=1e-9, err_msg=name)


def test_registry_size_and_raw_columns(ohlcv):
    assert len(FEATURE_REGISTRY) == 47
    frame = compute_feature_set(ohlcv, include_raw=True)
    assert frame.names[:5] == ("open", "high", "low", "close", "volume")
    assert len(frame.names) == 52


def test_warmup_is_longest_lookback_minus_one(ohlcv):
    frame = compute_feature_set(ohlcv)
    assert frame.max_warmup == LONGEST_LOOKBACK - 1
    trimmed = frame.trimmed()
    assert trimmed.length == len(ohlcv) - (LONGEST_LOOKBACK - 1)
    assert not np.isnan(trimmed.matrix()).any()


def test_features_are_causal():
    s = random_ohlcv(300, 4)
    full = compute_feature_set(s).matrix()
    cut = 200
    head = compute_feature_set(s.slice(0, cut)).matrix()
    np.testing.assert_array_equal(full[:cut], head)


def test_short_or_missing_input_rejected(ohlcv):
    with pytest.raises(DataError):
        compute_feature_set(ohlcv.slice(0, LONGEST_LOOKBACK))
    close = ohlcv.close.copy()
    close[100] = np.nan
    with pytest.raises(DataError, match="forward_fill"):
        compute_feature_set(ohlcv.replace(close=close))


class TestRsi:
    def test_monotone_increase_gives_100(self):
        out = rsi(np.arange(1.0, 60.0))
        assert np.all(out[14:] == 100.0)
        assert np.isnan(out[:14]).all()

    def test_constant_gives_50(self):
        assert np.all(rsi(np.full(40, 7.0))[14:] == 50.0)

    def test_alternating_moves_average_to_50(self):
        close = 100 + np.array([i % 2 for i in range(400)], dtype=float)
        out = rsi(close)
        assert out[14] == pytest.approx(50.0)
        # Wilder smoothing oscillates around 50: consecutive values mirror each other
        np.testing.assert_allclose(out[300:-1] + out[301:], 100.0, atol=1e-9)
        limits = sorted(out[-2:])
        assert limits == pytest.approx([100 * 13 / 27, 100 * 14 / 27], abs=1e-9)

    def test_bounded(self, ohlcv):
        out = rsi(ohlcv.close)
        assert np.nanmin(out) >= 0 and np.nanmax(out) <= 100


class TestMacd:
    def test_constant_series_is_zero(self):
        line, sig, diff = macd(np.full(60, 3.0))
        assert np.nanmax(np.abs(line)) == 0 and np.nanmax(np.abs(diff)) == 0

    def test_diff_is_line_minus_signal(self, ohlcv):
        line, sig, diff = macd(ohlcv.close)
        np.testing.assert_allclose(diff, line - sig, equal_nan=True)
        assert np.isnan(sig[:33]).all() and not np.isnan(sig[33])

    def test_too_short_raises(self):
        with pytest.raises(DataError):
            macd(np.arange(20.0))


class TestBollinger:
    def test_constant_window(self):
        hi, lo, width, pct = bollinger(np.full(30, 5.0))
        assert np.all(width[19:] == 0) and np.all(pct[19:] == 0.5)
        assert np.all(hi[19:] == 0) and np.all(lo[19:] == 0)

    def test_spike_above_upper_band(self):
        x = np.full(30, 10.0)
        x[-1] = 100.0
        # window mean 14.5, population std ~19.6: upper band ~53.7 for k=2
        hi, lo, _, pct = bollinger(x)
        assert hi[-1] == 1 and lo[-1] == 0 and pct[-1] > 1
        # k=5 widens the upper band to ~112.5, above the spike
        hi5, _, _, pct5 = bollinger(x, k=5.0)
        assert hi5[-1] == 0 and 0.5 < pct5[-1] < 1


def test_ema_and_wilder_seeded_by_sma():
    x = np.arange(1.0, 21.0)
    e = ema(x, 5)
    assert e[4] == pytest.approx(3.0)
    assert e[5] == pytest.approx(2 / 6 * 6 + 4 / 6 * 3.0)
    w = wilder(x, 5)
    assert w[5] == pytest.approx(0.2 * 6 + 0.8 * 3.0)
    np.testing.assert_allclose(sma(x, 4)[3:], np.arange(2.5, 19.0))


def test_obv_direction_rule():
    close = np.array([1.0, 2.0, 2.0, 1.0])
    vol = np.array([10.0, 20.0, 30.0, 40.0])
    np.testing.assert_array_equal(obv(close, vol), [0, 20, 20, -20])


def test_feature_engineer_transformer(ohlcv):
    X = np.column_stack([ohlcv.open, ohlcv.high, ohlcv.low, ohlcv.close, ohlcv.volume])
    fe = FeatureEngineer(include_raw=True).fit(X)
    out = fe.transform(X)
    assert out.shape == (len(X), 52)
    assert list(fe.get_feature_names_out()[:5]) == ["open", "high", "low", "close", "volume"]
    with pytest.raises(DataError):
        FeatureEngineer().fit(X[:, :4])


def test_feature_frame_csv(tmp_path, ohlcv):
    frame = compute_feature_set(ohlcv).trimmed()
    path = tmp_path / "f.csv"
    frame.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[0] == "timestamp"
    assert len(lines) == frame.length + 1


def test_flat_bars_do_not_produce_nan():
    n = 120
    s = OhlcvSeries(np.arange(n), *(np.full(n, 10.0) for _ in range(4)), np.full(n, 5.0))
    m = compute_feature_set(s).trimmed().matrix()
    assert np.isfinite(m).all()
