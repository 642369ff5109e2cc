"""End-to-end stages behind the command-line interface.

Each stage reads and writes plain files inside a run directory so that any
stage can be re-run on its own.
"""

from __future__ import annotations

import csv
import json
import logging
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (arima_direction_probs, fit_arima, fit_garch, fit_logistic,
                        window_last_step)
from .config import RunConfig
from .data import (OhlcvSeries, ScalerState, SequenceDataset, Split, apply_scaler,
                   chronological_split, fit_scaler, forward_fill, load_csv, make_sequences,
                   winsorize_series)
from .evaluation import (confusion, evaluate_predictions, permutation_importance, read_importance_csv,
                         write_importance_csv, write_json, write_roc_csv)
from .exceptions import DataError, HaeltError
from .features import compute_feature_set
from .model.estimator import HaeltClassifier
from .model.network import VARIANT_LABELS, VARIANTS
from .seeding import derive_seed
from .synthetic import generate

logger = logging.getLogger(__name__)


class StageError(HaeltError):
    """Wraps a module error with the pipeline stage that raised it."""

    def __init__(self, stage: str, error: HaeltError):
        super().__init__(f"[{stage}] {error}")
        self.stage = stage
        self.error = error
        self.exit_code = error.exit_code


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except HaeltError as exc:
                raise StageError(name, exc) from exc
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner
    return wrap


# ---------------------------------------------------------------- data


@dataclass
class PreparedData:
    dataset: SequenceDataset
    split: Split
    scaler: ScalerState
    close: np.ndarray
    n_raw_rows: int
    warmup: int

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.dataset.feature_names

    def part(self, name: str) -> SequenceDataset:
        rng = getattr(self.split, name)
        return self.dataset.subset(np.arange(rng.start, rng.stop))

    def manifest(self) -> dict:
        return {
            "rows_raw": self.n_raw_rows,
            "rows_after_warmup": int(len(self.close)),
            "warmup_rows_dropped": self.warmup,
            "windows": len(self.dataset),
            "split": {name: [getattr(self.split, name).start, getattr(self.split, name).stop]
                      for name in ("train", "val", "test")},
            "split_sizes": list(self.split.sizes),
            "features": list(self.feature_names),
            "scaler": self.scaler.to_dict(),
        }


@_stage("load")
def load_series(cfg: RunConfig) -> OhlcvSeries:
    if cfg.data.path:
        return forward_fill(load_csv(cfg.data.path))
    return generate(cfg.data.synthetic_spec(derive_seed(cfg.seed, "data")))


@_stage("prepare")
def prepare(series: OhlcvSeries, cfg: RunConfig) -> PreparedData:
    """Winsorize raw columns, engineer features, drop warm-up, window, split, scale.

    The split is applied to windows; the scaler sees only rows covered by
    training windows.
    """
    d = cfg.data
    cleaned = winsorize_series(series, *d.winsor_limits) if d.winsorize else series
    frame = compute_feature_set(cleaned, include_raw=d.include_raw)
    warmup = frame.max_warmup
    frame = frame.trimmed()
    close = series.close[warmup:]  # labels follow the unclipped price path
    raw = frame.matrix()
    n_windows = len(raw) - d.seq_len
    if n_windows < 1:
        raise DataError(f"series too short: {len(raw)} usable rows for length-{d.seq_len} windows")
    split = chronological_split(n_windows, d.split)
    fit_rows = split.train.stop + d.seq_len - 1
    scaler = fit_scaler(raw[:fit_rows], frame.names)
    scaled = apply_scaler(scaler, raw)
    dataset = make_sequences(scaled, close, d.seq_len, frame.timestamps, frame.names)
    return PreparedData(dataset, split, scaler, close, len(series), warmup)


def load_and_prepare(cfg: RunConfig) -> PreparedData:
    return prepare(load_series(cfg), cfg)


# ---------------------------------------------------------------- training


def make_estimator(cfg: RunConfig, variant: str | None = None) -> HaeltClassifier:
    m, t, e = cfg.model, cfg.train, cfg.ensemble
    return HaeltClassifier(
        variant=variant or m.variant, resnet_filters=m.resnet_filters,
        resnet_kernels=m.resnet_kernels, lstm_units=m.lstm_units, embed_dim=m.embed_dim,
        num_heads=m.num_heads, ff_dim=m.ff_dim, encoder_layers=m.encoder_layers,
        dropout=m.dropout, head_units=m.head_units, fusion_units=m.fusion_units,
        lr=t.lr, batch_size=t.batch_size, max_epochs=t.max_epochs, es_patience=t.es_patience,
        plateau_factor=t.plateau_factor, plateau_patience=t.plateau_patience,
        min_lr=t.min_lr, val_fraction=t.val_fraction, class_weight=t.class_weight,
        ensemble_window=e.k, temperature=e.tau, ensemble_mode=e.mode, random_state=cfg.seed)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(v) -> str:
    return repr(float(v))


@_stage("train")
def run_train(cfg: RunConfig, data: PreparedData | None = None, out: Path | None = None,
              variant: str | None = None) -> dict:
    """Fit, prime the ensemble on validation, walk forward over test, write artifacts."""
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    variant = variant or cfg.model.variant
    cfg.model.variant = variant
    cfg.save(out / "config.yaml")
    data = data or load_and_prepare(cfg)
    train, val, test = data.part("train"), data.part("val"), data.part("test")
    est = make_estimator(cfg, variant)
    est.fit(train.windows, train.labels)
    est.history_.write(out / "train_log.jsonl")
    p_val = est.prime_ensemble(val.windows, val.labels)
    est.save(out / "checkpoint.json")
    p_test, traj = est.walk_forward_proba(test.windows, test.labels)
    members = est.predict_members(test.windows)
    val_report = evaluate_predictions(val.labels, p_val)
    test_report = evaluate_predictions(test.labels, p_test)
    (out / "metrics_val.json").write_text(val_report.to_json())
    (out / "metrics_test.json").write_text(test_report.to_json())
    names = list(est.members)
    _write_csv(out / "ensemble_weights.csv", ["t", "timestamp"] + [f"w_{m}" for m in names],
               ([i, int(ts)] + [_fmt(w) for w in row]
                for i, (ts, row) in enumerate(zip(test.timestamps, traj))))
    _write_csv(out / "predictions_test.csv",
               ["t", "timestamp", "label", "p_final"] + [f"p_{m}" for m in names],
               ([i, int(test.timestamps[i]), int(test.labels[i]), _fmt(p_test[i])]
                + [_fmt(members[m][i]) for m in names] for i in range(len(test))))
    manifest = {
        "version": __version__,
        "variant": variant,
        "members": names,
        "n_parameters": est.n_parameters_,
        "seed": cfg.seed,
        "sub_seeds": {k: derive_seed(cfg.seed, k)
                      for k in ("data", "init", "dropout", "shuffle", "permutation")},
        "best_epoch": est.history_.best_epoch,
        "epochs_run": len(est.history_.records),
        "stop_reason": est.history_.stop_reason,
        "data": data.manifest(),
    }
    write_json(out / "manifest.json", manifest)
    return {"variant": variant, "val": val_report, "test": test_report,
            "n_parameters": est.n_parameters_, "estimator": est, "out": out}


# ---------------------------------------------------------------- ablation


ABLATION_COLUMNS = ("variant", "name", "accuracy", "precision", "recall", "f1", "auc_roc",
                    "n_parameters", "status")


@_stage("ablate")
def run_ablation(cfg: RunConfig, variants=VARIANTS, out: Path | None = None) -> list[dict]:
    """Train every variant on the same prepared data and seed; write ``ablation.csv``.

    A failing variant leaves a row with status ``failed: ...`` and empty metrics.
    """
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.yaml")
    data = load_and_prepare(cfg)
    rows = []
    for v in variants:
        vcfg = RunConfig.from_dict(cfg.to_dict())
        try:
            res = run_train(vcfg, data, out / v, v)
            r = res["test"]
            rows.append({"variant": v, "name": VARIANT_LABELS[v], "accuracy": r.accuracy,
                         "precision": r.precision, "recall": r.recall, "f1": r.f1,
                         "auc_roc": r.auc_roc, "n_parameters": res["n_parameters"],
                         "status": "ok"})
        except HaeltError as exc:
            logger.error("variant %s failed: %s", v, exc)
            rows.append({"variant": v, "name": VARIANT_LABELS[v], "accuracy": None,
                         "precision": None, "recall": None, "f1": None, "auc_roc": None,
                         "n_parameters": None, "status": f"failed: {exc}"})
    _write_csv(out / "ablation.csv", ABLATION_COLUMNS,
               ([("" if row[c] is None else row[c]) for c in ABLATION_COLUMNS] for row in rows))
    return rows


# ---------------------------------------------------------------- baselines


@_stage("baselines")
def run_baselines(cfg: RunConfig, out: Path | None = None,
                  data: PreparedData | None = None) -> dict:
    """Logistic regression, ARIMA(p,d,0) and GARCH(1,1) on the shared split."""
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    data = data or load_and_prepare(cfg)
    train, test = data.part("train"), data.part("test")
    p_order, d_order = cfg.baselines.arima_order
    logit = fit_logistic(window_last_step(train.windows), train.labels, cfg.baselines.logistic_l2)
    p_logit = logit.predict_proba(window_last_step(test.windows))
    train_levels = data.close[:train.end_rows[-1] + 1]
    arima = fit_arima(train_levels, p_order, d_order)
    p_arima = arima_direction_probs(arima, data.close, test.end_rows)
    returns = np.diff(np.log(train_levels))
    garch = fit_garch(returns)
    garch.prior_up = float(np.mean(train.labels))
    p_garch = garch.predict_direction(len(test))
    preds = {"logistic": p_logit, "arima": p_arima, "garch": p_garch}
    reports = {name: evaluate_predictions(test.labels, p).to_dict() for name, p in preds.items()}
    write_json(out / "baselines.json", {"logistic": logit.to_dict(), "arima": arima.to_dict(),
                                        "garch": garch.to_dict()})
    write_json(out / "metrics_baselines.json", reports)
    _write_csv(out / "predictions_baselines.csv",
               ["t", "timestamp", "label"] + [f"p_{k}" for k in preds],
               ([i, int(test.timestamps[i]), int(test.labels[i])]
                + [_fmt(preds[k][i]) for k in preds] for i in range(len(test))))
    return reports


# ---------------------------------------------------------------- importance


def _load_run(run_dir: Path) -> tuple[RunConfig, HaeltClassifier]:
    cfg = RunConfig.load(run_dir / "config.yaml")
    est = HaeltClassifier.load(run_dir / "checkpoint.json")
    return cfg, est


@_stage("importance")
def run_importance(run_dir, repeats: int | None = None, seed: int | None = None) -> dict:
    """Permutation importance of each feature on the test windows of a trained run.

    Scores are the walk-forward ensemble probabilities, matching test evaluation.
    """
    run_dir = Path(run_dir)
    _require(run_dir, ("config.yaml", "checkpoint.json"))
    cfg, est = _load_run(run_dir)
    data = load_and_prepare(cfg)
    test = data.part("test")
    labels = test.labels

    def predict(windows):
        return est.walk_forward_proba(windows, labels)[0]

    master = cfg.seed if seed is None else seed
    result = permutation_importance(predict, test.windows, labels, cfg.importance.metric,
                                    repeats or cfg.importance.repeats,
                                    derive_seed(master, "permutation"), test.feature_names)
    write_importance_csv(run_dir / "importance.csv", result)
    return result


# ---------------------------------------------------------------- report


REPORT_INPUTS = ("predictions_test.csv", "metrics_test.json", "importance.csv")


def _require(run_dir: Path, names) -> None:
    missing = [n for n in names if not (run_dir / n).exists()]
    if missing:
        raise DataError(f"{run_dir}: missing artifacts: {', '.join(missing)}")


def _read_prob_columns(path: Path) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{path} has no rows")
    labels = np.array([int(r["label"]) for r in rows])
    probs = {k[2:]: np.array([float(r[k]) for r in rows]) for k in rows[0] if k.startswith("p_")}
    return labels, probs


@_stage("report")
def run_report(run_dir, top: int = 15) -> Path:
    """Plot-ready files: ROC points per model, metric bars, top features, confusion matrix."""
    run_dir = Path(run_dir)
    _require(run_dir, REPORT_INPUTS)
    out = run_dir / "report"
    if out.exists():
        shutil.rmtree(out)
    out.mkdir()
    labels, probs = _read_prob_columns(run_dir / "predictions_test.csv")
    if (run_dir / "predictions_baselines.csv").exists():
        _, extra = _read_prob_columns(run_dir / "predictions_baselines.csv")
        probs.update(extra)
    bars = []
    for name, p in probs.items():
        if 0 < labels.sum() < labels.size:
            write_roc_csv(out / f"roc_{name}.csv", labels, p)
        r = evaluate_predictions(labels, p)
        for metric in ("accuracy", "precision", "recall", "f1", "auc_roc"):
            value = getattr(r, metric)
            bars.append([name, metric, "" if value is None else _fmt(value)])
    _write_csv(out / "metrics_bar.csv", ["model", "metric", "value"], bars)
    write_importance_csv(out / "importance_top15.csv", read_importance_csv(run_dir / "importance.csv"),
                         top=top)
    cm = confusion(labels, probs["final"])
    metrics_test = json.loads((run_dir / "metrics_test.json").read_text())
    write_json(out / "confusion.json", {**cm.to_dict(), "total": cm.total,
                                        "threshold": metrics_test.get("threshold", 0.5)})
    return out
