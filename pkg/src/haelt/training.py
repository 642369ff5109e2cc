"""Training protocol: class-weighted BCE, Adam, LR plateau decay, early stopping."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .ensemble import PROB_CLIP, EnsembleState, step_bce, walk_forward
from .exceptions import ConfigError, DataError, NumericalError
from .seeding import rng_for

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 5e-4
    batch_size: int = 64
    max_epochs: int = 100
    es_patience: int = 30
    plateau_factor: float = 0.8
    plateau_patience: int = 8
    min_lr: float = 1e-4
    val_fraction: float = 0.1
    class_weight: str | None = "balanced"
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0 < self.plateau_factor < 1:
            raise ConfigError("plateau_factor must lie in (0, 1)")
        if self.min_lr <= 0 or self.lr <= 0:
            raise ConfigError("learning rates must be positive")
        if self.es_patience < 1 or self.plateau_patience < 1:
            raise ConfigError("patience values must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("batch_size and max_epochs must be >= 1")
        if not 0 < self.val_fraction < 1:
            raise ConfigError("val_fraction must lie in (0, 1)")
        if self.class_weight not in (None, "balanced"):
            raise ConfigError("class_weight must be 'balanced' or None")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- losses


def class_weights(labels) -> tuple[float, float]:
    """Balanced weights ``N / (2 N_c)`` as ``(w_neg, w_pos)``."""
    y = np.asarray(labels).astype(np.int64).ravel()
    n = y.size
    n_pos = int(y.sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("class_weights: labels contain a single class")
    return n / (2.0 * n_neg), n / (2.0 * n_pos)


def weighted_bce(y, p, weights=(1.0, 1.0)):
    """Mean class-weighted binary cross-entropy.

    ``p`` may be an array (returns a float) or a :class:`~haelt.autodiff.Tensor`
    (returns a scalar tensor on the active graph). Probabilities are clipped to
    ``[1e-7, 1 - 1e-7]``.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    w_neg, w_pos = weights
    sample_w = np.where(y > 0.5, w_pos, w_neg)
    if isinstance(p, ad.Tensor):
        if p.size != y.size:
            raise ValueError(f"weighted_bce: {y.size} labels vs {p.size} probabilities")
        pc = ad.clip(ad.reshape(p, (y.size,)), PROB_CLIP, 1.0 - PROB_CLIP)
        ll = y * ad.log(pc) + (1.0 - y) * ad.log(1.0 - pc)
        return -ad.mean(sample_w * ll)
    p = np.asarray(p, dtype=np.float64).ravel()
    if p.size != y.size:
        raise ValueError(f"weighted_bce: {y.size} labels vs {p.size} probabilities")
    return float(np.mean(sample_w * step_bce(y, p)))


# ---------------------------------------------------------------- schedules


class EarlyStopping:
    """Stop after ``patience`` epochs without a strict improvement (max mode)."""

    def __init__(self, patience: int = 30):
        self.patience = patience
        self.best = -math.inf
        self.best_epoch = 0
        self.wait = 0

    def update(self, epoch: int, value: float) -> bool:
        """Record ``value`` for ``epoch``; return True when training should stop."""
        if value > self.best:
            self.best = value
            self.best_epoch = epoch
            self.wait = 0
            return False
        self.wait += 1
        return self.wait >= self.patience


class PlateauScheduler:
    """Multiply the LR by ``factor`` after ``patience`` epochs without lower loss."""

    def __init__(self, lr: float, factor: float = 0.8, patience: int = 8, min_lr: float = 1e-4):
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.best = math.inf
        self.wait = 0

    def step(self, value: float) -> float:
        """Feed one epoch's monitored loss; returns the LR for the next epoch."""
        if value < self.best:
            self.best = value
            self.wait = 0
        else:
            self.wait += 1
            if self.wait >= self.patience:
                if self.lr > self.min_lr:
                    self.lr = max(self.lr * self.factor, self.min_lr)
                self.wait = 0
        return self.lr


# ---------------------------------------------------------------- log


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    lr: float
    ensemble_weights: dict[str, float]


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_accuracy: float = float("nan")
    stop_reason: str = ""

    def to_jsonl(self) -> str:
        lines = [json.dumps(asdict(r), sort_keys=True) for r in self.records]
        lines.append(json.dumps({"best_epoch": self.best_epoch,
                                 "best_val_accuracy": self.best_val_accuracy,
                                 "stop_reason": self.stop_reason}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def read(cls, path) -> "TrainLog":
        rows = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
        summary = rows.pop()
        return cls([EpochRecord(**r) for r in rows], **summary)


# ---------------------------------------------------------------- loop


@dataclass
class Evaluation:
    loss: float
    accuracy: float
    member_probs: dict[str, np.ndarray]
    final_probs: np.ndarray
    ensemble: EnsembleState


def evaluate(network, X, y, k: int = 24, tau: float = 1.0) -> Evaluation:
    """Inference over ``X`` in time order with a fresh walk-forward ensemble."""
    members = network.predict_members(X)
    state = EnsembleState(network.members, k, tau)
    final, _ = walk_forward(state, members, y)
    y = np.asarray(y)
    acc = float(np.mean((final >= 0.5).astype(int) == y)) if len(y) else float("nan")
    return Evaluation(float(np.mean(step_bce(y, final))), acc, members, final, state)


def chronological_holdout(n: int, fraction: float) -> tuple[np.ndarray, np.ndarray]:
    """Training indices and the chronological tail slice used for validation."""
    n_val = max(1, int(math.floor(n * fraction + 1e-9)))
    if n - n_val < 1:
        raise DataError(f"too few windows ({n}) for a validation fraction of {fraction}")
    return np.arange(n - n_val), np.arange(n - n_val, n)


def _member_loss(outputs, y, weights):
    losses = [weighted_bce(y, p, weights) for p in outputs.members.values()]
    total = losses[0]
    for extra in losses[1:]:
        total = total + extra
    return total * (1.0 / len(losses))


def train(network, X, y, config: TrainConfig | None = None, *, ensemble_k: int = 24,
          ensemble_tau: float = 1.0, callback=None):
    """Fit ``network`` on chronologically ordered windows ``X`` with labels ``y``.

    The tail ``val_fraction`` of the windows is held out (never shuffled) for
    early stopping on validation accuracy and LR decay on validation loss.
    The best epoch's weights are restored before returning
    ``(best_state_dict, TrainLog, Evaluation_at_best)``.
    """
    config = config or TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64).ravel()
    if X.ndim != 3 or len(X) != len(y):
        raise DataError("train: X must be (n, time, features) aligned with y")
    train_idx, val_idx = chronological_holdout(len(X), config.val_fraction)
    weights = class_weights(y[train_idx]) if config.class_weight == "balanced" else (1.0, 1.0)
    params = network.parameters()
    opt = ad.Adam(params, lr=config.lr)
    shuffle_rng = rng_for(config.seed, "shuffle")
    dropout_rng = rng_for(config.seed, "dropout")
    stopper = EarlyStopping(config.es_patience)
    plateau = PlateauScheduler(config.lr, config.plateau_factor, config.plateau_patience,
                               config.min_lr)
    log = TrainLog()
    best_state = network.state_dict()
    best_eval = None
    held_out = set(val_idx.tolist())
    X_val, y_val = X[val_idx], y[val_idx]
    for epoch in range(1, config.max_epochs + 1):
        lr = plateau.lr
        opt.lr = lr
        order = shuffle_rng.permutation(train_idx)
        if held_out.intersection(order.tolist()):
            raise RuntimeError("validation windows leaked into a training batch")
        batch_losses, batch_sizes = [], []
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            idx = order[start:start + config.batch_size]
            with ad.Graph() as graph:
                outputs = network.forward(X[idx], training=True, rng=dropout_rng)
                loss = _member_loss(outputs, y[idx], weights)
                value = float(loss.value[0])
                if not math.isfinite(value):
                    raise NumericalError(f"non-finite training loss at epoch {epoch}, batch {b}")
                grads = ad.backward(loss)
            graph.release()
            opt.step(grads)
            batch_losses.append(value)
            batch_sizes.append(len(idx))
        train_loss = float(np.average(batch_losses, weights=batch_sizes))
        ev = evaluate(network, X_val, y_val, ensemble_k, ensemble_tau)
        if not math.isfinite(ev.loss):
            raise NumericalError(f"non-finite validation loss at epoch {epoch}")
        log.records.append(EpochRecord(
            epoch, train_loss, ev.loss, ev.accuracy, lr,
            {m: float(w) for m, w in zip(network.members, ev.ensemble.weights)}))
        stop = stopper.update(epoch, ev.accuracy)
        if stopper.best_epoch == epoch:
            best_state = network.state_dict()
            best_eval = ev
        plateau.step(ev.loss)
        logger.info("epoch %d loss=%.4f val_loss=%.4f val_acc=%.4f lr=%.2e",
                    epoch, train_loss, ev.loss, ev.accuracy, lr)
        if callback is not None:
            callback(log.records[-1])
        if stop:
            log.stop_reason = f"early stopping: no val accuracy gain for {config.es_patience} epochs"
            break
    else:
        log.stop_reason = f"reached max_epochs={config.max_epochs}"
    network.load_state_dict(best_state)
    log.best_epoch = stopper.best_epoch
    log.best_val_accuracy = stopper.best
    return best_state, log, best_eval
