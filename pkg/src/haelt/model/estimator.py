"""scikit-learn compatible wrapper around network, training loop and ensemble."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..ensemble import EnsembleState, walk_forward
from ..exceptions import ConfigError, DataError
from ..seeding import derive_seed
from ..training import TrainConfig, train
from .network import HaeltConfig, HaeltNetwork

ENSEMBLE_MODES = ("walk_forward", "fixed")

_ARCH_PARAMS = ("resnet_filters", "resnet_kernels", "lstm_units", "embed_dim", "num_heads",
                "ff_dim", "encoder_layers", "dropout", "head_units", "fusion_units", "variant")
_TRAIN_PARAMS = ("lr", "batch_size", "max_epochs", "es_patience", "plateau_factor",
                 "plateau_patience", "min_lr", "val_fraction", "class_weight")


def _check_windows(X) -> np.ndarray:
    X = check_array(X, allow_nd=True, dtype=np.float64, ensure_all_finite=True)
    if X.ndim != 3:
        raise DataError(f"expected windows of shape (n, time, features), got {X.shape}")
    return X


def _check_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y).ravel()
    if y.size != n:
        raise DataError(f"{n} windows but {y.size} labels")
    if not np.all(np.isin(y, (0, 1))):
        raise DataError("labels must be 0/1 direction indicators")
    return y.astype(np.int64)


class HaeltClassifier(ClassifierMixin, BaseEstimator):
    """Hybrid ResNet/attention/LSTM/Transformer classifier with a dynamic ensemble.

    ``fit`` takes chronologically ordered windows; its own tail slice drives
    early stopping. ``prime_ensemble`` then warms the ensemble's loss buffers
    on a separate validation set, and ``walk_forward_proba`` scores a test set
    step by step, folding in each realised label after its prediction.
    """

    def __init__(self, variant="full", resnet_filters=(64, 128), resnet_kernels=(3, 5),
                 lstm_units=(128, 64, 32), embed_dim=64, num_heads=4, ff_dim=128,
                 encoder_layers=2, dropout=(0.2, 0.3, 0.1), head_units=32, fusion_units=(64, 32),
                 lr=5e-4, batch_size=64, max_epochs=100, es_patience=30, plateau_factor=0.8,
                 plateau_patience=8, min_lr=1e-4, val_fraction=0.1, class_weight="balanced",
                 ensemble_window=24, temperature=1.0, ensemble_mode="walk_forward",
                 random_state=0):
        self.variant = variant
        self.resnet_filters = resnet_filters
        self.resnet_kernels = resnet_kernels
        self.lstm_units = lstm_units
        self.embed_dim = embed_dim
        self.num_heads = num_heads
        self.ff_dim = ff_dim
        self.encoder_layers = encoder_layers
        self.dropout = dropout
        self.head_units = head_units
        self.fusion_units = fusion_units
        self.lr = lr
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.es_patience = es_patience
        self.plateau_factor = plateau_factor
        self.plateau_patience = plateau_patience
        self.min_lr = min_lr
        self.val_fraction = val_fraction
        self.class_weight = class_weight
        self.ensemble_window = ensemble_window
        self.temperature = temperature
        self.ensemble_mode = ensemble_mode
        self.random_state = random_state

    def model_config(self, seq_len: int, n_features: int) -> HaeltConfig:
        return HaeltConfig(seq_len=seq_len, n_features=n_features,
                           **{k: getattr(self, k) for k in _ARCH_PARAMS})

    def train_config(self) -> TrainConfig:
        return TrainConfig(seed=int(self.random_state),
                           **{k: getattr(self, k) for k in _TRAIN_PARAMS})

    def _new_ensemble(self) -> EnsembleState:
        return EnsembleState(self.network_.members, self.ensemble_window, self.temperature)

    def fit(self, X, y, callback=None):
        if self.ensemble_mode not in ENSEMBLE_MODES:
            raise ConfigError(f"ensemble_mode must be one of {ENSEMBLE_MODES}")
        X = _check_windows(X)
        y = _check_labels(y, len(X))
        config = self.model_config(X.shape[1], X.shape[2])
        self.network_ = HaeltNetwork(config, X.shape[2],
                                     seed=derive_seed(self.random_state, "init"))
        _, self.history_, best = train(self.network_, X, y, self.train_config(),
                                       ensemble_k=self.ensemble_window,
                                       ensemble_tau=self.temperature, callback=callback)
        self.ensemble_ = best.ensemble if best is not None else self._new_ensemble()
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[2]
        self.n_parameters_ = self.network_.n_parameters()
        return self

    @property
    def members(self) -> tuple[str, ...]:
        check_is_fitted(self, "network_")
        return self.network_.members

    def predict_members(self, X) -> dict[str, np.ndarray]:
        check_is_fitted(self, "network_")
        X = _check_windows(X)
        if X.shape[2] != self.n_features_in_:
            raise DataError(f"expected {self.n_features_in_} features, got {X.shape[2]}")
        return self.network_.predict_members(X)

    def prime_ensemble(self, X, y) -> np.ndarray:
        """Reset the ensemble and walk it forward over a labelled validation set.

        Returns the ensemble probabilities produced along the way.
        """
        X = _check_windows(X)
        y = _check_labels(y, len(X))
        self.ensemble_ = self._new_ensemble()
        final, _ = walk_forward(self.ensemble_, self.predict_members(X), y)
        return final

    def walk_forward_proba(self, X, y=None) -> tuple[np.ndarray, np.ndarray]:
        """Time-ordered ensemble probabilities and the weight trajectory.

        In ``walk_forward`` mode with labels, weights adapt after every step;
        otherwise the current weights stay fixed. The fitted ensemble state is
        left untouched.
        """
        check_is_fitted(self, "ensemble_")
        members = self.predict_members(X)
        if y is not None:
            y = _check_labels(y, len(next(iter(members.values()))))
        state = self.ensemble_.copy()
        update = self.ensemble_mode == "walk_forward"
        return walk_forward(state, members, y, update=update)

    def predict_proba(self, X) -> np.ndarray:
        """Class probabilities under the current (frozen) ensemble weights."""
        p, _ = self.walk_forward_proba(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    # persistence -----------------------------------------------------

    def save(self, path) -> None:
        check_is_fitted(self, "network_")
        payload = {
            "params": _jsonable(self.get_params()),
            "config": self.network_.config.to_dict(),
            "parameters": {name: {"shape": list(v.shape), "values": v.ravel().tolist()}
                           for name, v in self.network_.state_dict().items()},
            "ensemble": self.ensemble_.to_dict(),
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True))

    @classmethod
    def load(cls, path) -> "HaeltClassifier":
        payload = json.loads(Path(path).read_text())
        est = cls(**payload["params"])
        config = HaeltConfig.from_dict(payload["config"])
        est.network_ = HaeltNetwork(config)
        est.network_.load_state_dict(
            {name: np.asarray(e["values"], dtype=np.float64).reshape(e["shape"])
             for name, e in payload["parameters"].items()})
        est.ensemble_ = EnsembleState.from_dict(payload["ensemble"])
        est.classes_ = np.array([0, 1])
        est.n_features_in_ = config.n_features
        est.n_parameters_ = est.network_.n_parameters()
        return est


def _jsonable(params: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in params.items()}
