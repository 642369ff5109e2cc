"""Deliberately naive, loop-based reference implementations used as test oracles.

Nothing here is imported from the package; each value is computed with
scalar Python arithmetic straight from the textbook definition.
"""

from __future__ import annotations

import math

NAN = float("nan")


def _isnan(v) -> bool:
    return isinstance(v, float) and math.isnan(v)


def _window(x, t, n):
    if t - n + 1 < 0:
        return None
    w = [float(v) for v in x[t - n + 1:t + 1]]
    if any(_isnan(v) for v in w):
        return None
    return w


def sma(x, n):
    out = []
    for t in range(len(x)):
        w = _window(x, t, n)
        out.append(NAN if w is None else sum(w) / n)
    return out


def rsum(x, n):
    out = []
    for t in range(len(x)):
        w = _window(x, t, n)
        out.append(NAN if w is None else sum(w))
    return out


def pstd(x, n):
    out = []
    for t in range(len(x)):
        w = _window(x, t, n)
        if w is None:
            out.append(NAN)
            continue
        m = sum(w) / n
        out.append(math.sqrt(sum((v - m) ** 2 for v in w) / n))
    return out


def rmax(x, n):
    return [NAN if (w := _window(x, t, n)) is None else max(w) for t in range(len(x))]


def rmin(x, n):
    return [NAN if (w := _window(x, t, n)) is None else min(w) for t in range(len(x))]


def smooth(x, n, alpha):
    """SMA-seeded exponential smoothing starting at the first non-NaN value."""
    out = [NAN] * len(x)
    first = next((i for i, v in enumerate(x) if not _isnan(float(v))), None)
    if first is None or first + n - 1 >= len(x):
        return out
    s = first + n - 1
    prev = sum(float(v) for v in x[first:s + 1]) / n
    out[s] = prev
    for t in range(s + 1, len(x)):
        prev = alpha * float(x[t]) + (1 - alpha) * prev
        out[t] = prev
    return out


def ema(x, n):
    return smooth(x, n, 2 / (n + 1))


def wilder(x, n):
    return smooth(x, n, 1 / n)


def div(a, b, fill):
    if _isnan(a) or _isnan(b):
        return NAN
    return fill if b == 0 else a / b


def true_range(h, l, c):
    out = [NAN]
    for t in range(1, len(c)):
        out.append(max(h[t] - l[t], abs(h[t] - c[t - 1]), abs(l[t] - c[t - 1])))
    return out


def rsi(c, n=14):
    gains, losses = [NAN], [NAN]
    for t in range(1, len(c)):
        d = c[t] - c[t - 1]
        gains.append(d if d > 0 else 0.0)
        losses.append(-d if d < 0 else 0.0)
    g, l = wilder(gains, n), wilder(losses, n)
    out = []
    for a, b in zip(g, l):
        if _isnan(a):
            out.append(NAN)
        elif a == 0 and b == 0:
            out.append(50.0)
        elif b == 0:
            out.append(100.0)
        else:
            out.append(100 - 100 / (1 + a / b))
    return out


def macd(c):
    f, s = ema(c, 12), ema(c, 26)
    line = [NAN if _isnan(a) or _isnan(b) else a - b for a, b in zip(f, s)]
    sig = ema(line, 9)
    diff = [NAN if _isnan(a) or _isnan(b) else a - b for a, b in zip(line, sig)]
    return line, sig, diff


def bollinger(c, n=20, k=2.0):
    mid, sd = sma(c, n), pstd(c, n)
    hi, lo, width, pb = [], [], [], []
    for t in range(len(c)):
        if _isnan(mid[t]):
            hi.append(NAN), lo.append(NAN), width.append(NAN), pb.append(NAN)
            continue
        up, dn = mid[t] + k * sd[t], mid[t] - k * sd[t]
        hi.append(1.0 if c[t] > up else 0.0)
        lo.append(1.0 if c[t] < dn else 0.0)
        width.append(0.0 if sd[t] == 0 else (up - dn) / mid[t])
        pb.append(0.5 if up == dn else (c[t] - dn) / (up - dn))
    return hi, lo, width, pb


def atr(h, l, c, n=14):
    return wilder(true_range(h, l, c), n)


def adx(h, l, c, n=14):
    pdm, mdm = [NAN], [NAN]
    for t in range(1, len(c)):
        up, down = h[t] - h[t - 1], l[t - 1] - l[t]
        pdm.append(up if up > down and up > 0 else 0.0)
        mdm.append(down if down > up and down > 0 else 0.0)
    tr = wilder(true_range(h, l, c), n)
    sp, sm = wilder(pdm, n), wilder(mdm, n)
    dx = []
    for a, b, r in zip(sp, sm, tr):
        if _isnan(r):
            dx.append(NAN)
            continue
        pdi = 100 * div(a, r, 0.0)
        mdi = 100 * div(b, r, 0.0)
        dx.append(100 * div(abs(pdi - mdi), pdi + mdi, 0.0))
    return wilder(dx, n)


def vortex(h, l, c, n=14):
    vp, vm = [NAN], [NAN]
    for t in range(1, len(c)):
        vp.append(abs(h[t] - l[t - 1]))
        vm.append(abs(l[t] - h[t - 1]))
    tr = rsum(true_range(h, l, c), n)
    sp, sm = rsum(vp, n), rsum(vm, n)
    return [div(a, r, 0.0) for a, r in zip(sp, tr)], [div(b, r, 0.0) for b, r in zip(sm, tr)]


def stochastic(h, l, c, n=14, d=3):
    hh, ll = rmax(h, n), rmin(l, n)
    k = [NAN if _isnan(a) else 100 * div(c[t] - b, a - b, 0.5)
         for t, (a, b) in enumerate(zip(hh, ll))]
    return k, sma(k, d)


def roc(c, n=10):
    return [NAN if t < n else 100 * (c[t] - c[t - n]) / c[t - n] for t in range(len(c))]


def ultimate(h, l, c):
    bp, tr = [NAN], [NAN]
    for t in range(1, len(c)):
        lo = min(l[t], c[t - 1])
        bp.append(c[t] - lo)
        tr.append(max(h[t], c[t - 1]) - lo)
    avgs = []
    for n in (7, 14, 28):
        sb, st = rsum(bp, n), rsum(tr, n)
        avgs.append([div(a, b, 0.5) for a, b in zip(sb, st)])
    return [NAN if _isnan(a) or _isnan(b) or _isnan(z) else 100 * (4 * a + 2 * b + z) / 7
            for a, b, z in zip(*avgs)]


def williams(h, l, c, n=14):
    hh, ll = rmax(h, n), rmin(l, n)
    return [NAN if _isnan(a) else -100 * div(a - c[t], a - b, 0.5)
            for t, (a, b) in enumerate(zip(hh, ll))]


def obv(c, v):
    out = [0.0]
    for t in range(1, len(c)):
        step = v[t] if c[t] > c[t - 1] else (-v[t] if c[t] < c[t - 1] else 0.0)
        out.append(out[-1] + step)
    return out


def mfi(h, l, c, v, n=14):
    tp = [(a + b + z) / 3 for a, b, z in zip(h, l, c)]
    pos, neg = [NAN], [NAN]
    for t in range(1, len(c)):
        flow = tp[t] * v[t]
        pos.append(flow if tp[t] > tp[t - 1] else 0.0)
        neg.append(flow if tp[t] < tp[t - 1] else 0.0)
    sp, sn = rsum(pos, n), rsum(neg, n)
    return [NAN if _isnan(a) else 100 * div(a, a + b, 0.5) for a, b in zip(sp, sn)]


def cmf(h, l, c, v, n=20):
    mfv = [div((c[t] - l[t]) - (h[t] - c[t]), h[t] - l[t], 0.0) * v[t] for t in range(len(c))]
    a, b = rsum(mfv, n), rsum(v, n)
    return [div(x, y, 0.0) for x, y in zip(a, b)]


def force(c, v, n=13):
    raw = [NAN] + [(c[t] - c[t - 1]) * v[t] for t in range(1, len(c))]
    return ema(raw, n)


def lag(x, k):
    return [NAN] * k + [float(v) for v in x[:len(x) - k]]


def pct_change(c, k):
    return [NAN if t < k else (c[t] - c[t - k]) / c[t - k] for t in range(len(c))]


def feature_table(o, h, l, c, v) -> dict[str, list[float]]:
    """Every registry feature, keyed by name."""
    o, h, l, c, v = ([float(x) for x in col] for col in (o, h, l, c, v))
    out = {}
    for w in (10, 20, 50):
        out[f"sma_{w}"] = sma(c, w)
    for w in (10, 20, 50):
        out[f"ema_{w}"] = ema(c, w)
    out["macd"], out["macd_signal"], out["macd_diff"] = macd(c)
    out["adx"] = adx(h, l, c)
    out["vortex_pos"], out["vortex_neg"] = vortex(h, l, c)
    out["rsi"] = rsi(c)
    out["stoch_k"], out["stoch_d"] = stochastic(h, l, c)
    out["roc"] = roc(c)
    out["ultimate_oscillator"] = ultimate(h, l, c)
    out["williams_r"] = williams(h, l, c)
    (out["bb_high_ind"], out["bb_low_ind"], out["bb_width"],
     out["bb_pct_b"]) = bollinger(c)
    out["atr"] = atr(h, l, c)
    out["obv"] = obv(c, v)
    out["mfi"] = mfi(h, l, c, v)
    out["cmf"] = cmf(h, l, c, v)
    out["force_index"] = force(c, v)
    for k in range(1, 6):
        out[f"close_lag_{k}"] = lag(c, k)
    for k in range(1, 6):
        out[f"volume_lag_{k}"] = lag(v, k)
    for w in (6, 12, 24):
        out[f"close_roll_mean_{w}"] = sma(c, w)
    for w in (6, 12, 24):
        out[f"close_roll_std_{w}"] = pstd(c, w)
    out["high_low_ratio"] = [a / b for a, b in zip(h, l)]
    out["close_open_ratio"] = [a / b for a, b in zip(c, o)]
    out["price_change_1h"] = pct_change(c, 1)
    out["price_change_6h"] = pct_change(c, 6)
    return out


# ---------------------------------------------------------------- other oracles


def percentile(values, q):
    """Linear interpolation between closest ranks on the sorted sample."""
    s = sorted(float(v) for v in values)
    pos = (len(s) - 1) * q / 100.0
    lo = math.floor(pos)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (s[hi] - s[lo]) * (pos - lo)


def pairwise_auc(y, p):
    pos = [s for s, t in zip(p, y) if t == 1]
    neg = [s for s, t in zip(p, y) if t == 0]
    total = 0.0
    for a in pos:
        for b in neg:
            total += 1.0 if a > b else (0.5 if a == b else 0.0)
    return total / (len(pos) * len(neg))


def count_confusion(y, p, threshold=0.5):
    tp = tn = fp = fn = 0
    for t, s in zip(y, p):
        pred = 1 if s >= threshold else 0
        if pred == 1 and t == 1:
            tp += 1
        elif pred == 0 and t == 0:
            tn += 1
        elif pred == 1:
            fp += 1
        else:
            fn += 1
    return tp, tn, fp, fn
