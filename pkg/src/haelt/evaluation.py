"""Classification metrics, ROC data and permutation feature importance."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from .exceptions import ConfigError, DataError

THRESHOLD = 0.5


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc_roc: float | None = None
    threshold: float = THRESHOLD
    n: int = 0
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _aligned(y, p) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y).astype(np.int64).ravel()
    p = np.asarray(p, dtype=np.float64).ravel()
    if y.size != p.size:
        raise DataError(f"{y.size} labels vs {p.size} scores")
    if y.size == 0:
        raise DataError("cannot evaluate an empty prediction set")
    return y, p


def confusion(y, p, threshold: float = THRESHOLD) -> ConfusionMatrix:
    """Counts with class 1 ("price up") positive; predicts 1 iff ``p >= threshold``."""
    y, p = _aligned(y, p)
    pred = p >= threshold
    pos = y == 1
    return ConfusionMatrix(tp=int(np.sum(pred & pos)), tn=int(np.sum(~pred & ~pos)),
                           fp=int(np.sum(pred & ~pos)), fn=int(np.sum(~pred & pos)))


def f1_score(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def metrics(cm: ConfusionMatrix, threshold: float = THRESHOLD) -> MetricsReport:
    """Accuracy, precision, recall and F1; zero denominators yield 0 and a flag."""
    if cm.total <= 0:
        raise DataError("confusion matrix is empty")
    flags = []
    if cm.tp + cm.fp:
        precision = cm.tp / (cm.tp + cm.fp)
    else:
        precision = 0.0
        flags.append("precision_undefined")
    if cm.tp + cm.fn:
        recall = cm.tp / (cm.tp + cm.fn)
    else:
        recall = 0.0
        flags.append("recall_undefined")
    return MetricsReport(accuracy=(cm.tp + cm.tn) / cm.total, precision=precision,
                         recall=recall, f1=f1_score(precision, recall),
                         threshold=threshold, n=cm.total, flags=flags)


def auc_roc(y, p) -> float:
    """Mann-Whitney AUC; tied scores count one half via average ranks."""
    y, p = _aligned(y, p)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes present")
    ranks = rankdata(p)
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_points(y, p) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ROC curve from (0, 0) to (1, 1); one point per distinct score.

    Returns ``(fpr, tpr, thresholds)``; the first threshold is ``+inf``.
    """
    y, p = _aligned(y, p)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both classes present")
    order = np.argsort(-p, kind="mergesort")
    ps, ys = p[order], y[order]
    last_of_group = np.r_[np.flatnonzero(np.diff(ps)), ps.size - 1]
    tps = np.cumsum(ys)[last_of_group]
    fps = (last_of_group + 1) - tps
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    return fpr, tpr, np.r_[np.inf, ps[last_of_group]]


def trapezoid_auc(fpr, tpr) -> float:
    return float(np.trapezoid(tpr, fpr))


def evaluate_predictions(y, p, threshold: float = THRESHOLD) -> MetricsReport:
    """Full report including AUC (``None`` with a flag when one class is absent)."""
    report = metrics(confusion(y, p, threshold), threshold)
    y_arr = np.asarray(y).astype(int)
    if 0 < y_arr.sum() < y_arr.size:
        report.auc_roc = auc_roc(y, p)
    else:
        report.flags.append("auc_undefined")
    return report


def accuracy_metric(y, p) -> float:
    y, p = _aligned(y, p)
    return float(np.mean((p >= THRESHOLD) == (y == 1)))


METRICS: dict[str, Callable] = {
    "accuracy": accuracy_metric,
    "auc": auc_roc,
    "f1": lambda y, p: metrics(confusion(y, p)).f1,
}


def permutation_importance(predict: Callable[[np.ndarray], np.ndarray], X, y,
                           metric: str | Callable = "accuracy", repeats: int = 10,
                           seed: int = 0, feature_names=None) -> dict[str, dict]:
    """Metric drop when one feature is shuffled across windows.

    ``predict`` maps windows ``(n, time, features)`` to probabilities. Each
    permutation moves a whole window's trajectory of the feature to another
    window, so within-window time order is preserved. Repeat ``r`` of feature
    ``j`` draws from its own generator spawned from ``seed``. Returns
    ``{name: {"importance", "std", "baseline"}}`` in feature order.
    """
    if repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {repeats}")
    score = METRICS[metric] if isinstance(metric, str) else metric
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 3:
        raise DataError("permutation_importance expects (n, time, features) windows")
    n_feat = X.shape[2]
    names = list(feature_names) if feature_names is not None else [f"f{j}" for j in range(n_feat)]
    if len(names) != n_feat:
        raise DataError("feature_names length differs from the feature axis")
    baseline = float(score(y, predict(X)))
    children = np.random.SeedSequence(seed).spawn(n_feat)
    out = {}
    work = X.copy()
    for j, name in enumerate(names):
        rngs = [np.random.default_rng(s) for s in children[j].spawn(repeats)]
        drops = []
        original = X[:, :, j]
        for rng in rngs:
            work[:, :, j] = original[rng.permutation(len(X))]
            drops.append(baseline - float(score(y, predict(work))))
        work[:, :, j] = original
        out[name] = {"importance": float(np.mean(drops)), "std": float(np.std(drops)),
                     "baseline": baseline}
    return out


# ---------------------------------------------------------------- file output


def write_roc_csv(path, y, p) -> None:
    fpr, tpr, thr = roc_points(y, p)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fpr", "tpr", "threshold"])
        for a, b, t in zip(fpr, tpr, thr):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(t))])


def write_importance_csv(path, importance: dict[str, dict], top: int | None = None) -> list[str]:
    ranked = sorted(importance.items(), key=lambda kv: (-kv[1]["importance"], kv[0]))
    if top is not None:
        ranked = ranked[:top]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "feature", "importance", "std"])
        for i, (name, d) in enumerate(ranked, 1):
            w.writerow([i, name, repr(d["importance"]), repr(d["std"])])
    return [name for name, _ in ranked]


def read_importance_csv(path) -> dict[str, dict]:
    with open(path, newline="") as fh:
        return {row["feature"]: {"importance": float(row["importance"]), "std": float(row["std"])}
                for row in csv.DictReader(fh)}


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
