"""HAELT network assembly and its ablation variants."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..exceptions import ConfigError, ShapeError
from .layers import (
    Head,
    LSTMBranch,
    Module,
    ResNetStack,
    TemporalAttention,
    TransformerBranch,
)

VARIANTS = (
    "full",
    "no_cnn",
    "no_lstm",
    "no_transformer",
    "no_ensemble",
    "cnn_only",
    "lstm_only",
    "transformer_only",
)

VARIANT_LABELS = {
    "full": "HAELT",
    "no_cnn": "w/o CNN",
    "no_lstm": "w/o LSTM",
    "no_transformer": "w/o Transformer",
    "no_ensemble": "w/o Ensemble",
    "cnn_only": "CNN Only",
    "lstm_only": "LSTM Only",
    "transformer_only": "Transformer Only",
}

# (resnet, attention, lstm, transformer, per-branch heads)
_WIRING = {
    "full": (True, True, True, True, True),
    "no_cnn": (False, True, True, True, True),
    "no_lstm": (True, True, False, True, True),
    "no_transformer": (True, True, True, False, True),
    "no_ensemble": (True, True, True, True, False),
    "cnn_only": (True, False, False, False, False),
    "lstm_only": (False, False, True, False, False),
    "transformer_only": (False, False, False, True, False),
}


@dataclass
class HaeltConfig:
    """Architecture hyperparameters; defaults are the reference configuration.

    ``dropout`` holds the three rates (0.2, 0.3, 0.1): the LSTM layers use them
    in order, the ResNet blocks use the first and the Transformer encoder the
    last.
    """

    seq_len: int = 30
    n_features: int | None = None
    resnet_filters: tuple[int, ...] = (64, 128)
    resnet_kernels: tuple[int, ...] = (3, 5)
    lstm_units: tuple[int, ...] = (128, 64, 32)
    embed_dim: int = 64
    num_heads: int = 4
    ff_dim: int = 128
    encoder_layers: int = 2
    dropout: tuple[float, ...] = (0.2, 0.3, 0.1)
    head_units: int = 32
    fusion_units: tuple[int, ...] = (64, 32)
    variant: str = "full"

    def __post_init__(self):
        for name in ("resnet_filters", "resnet_kernels", "lstm_units", "dropout", "fusion_units"):
            setattr(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.num_heads < 1 or self.embed_dim % self.num_heads:
            raise ConfigError(
                f"embed_dim {self.embed_dim} is not divisible by num_heads {self.num_heads}")
        if len(self.resnet_filters) != len(self.resnet_kernels):
            raise ConfigError("resnet_filters and resnet_kernels differ in length")
        if any(k % 2 == 0 or k < 1 for k in self.resnet_kernels):
            raise ConfigError("resnet kernels must be odd")
        if any(k > self.seq_len for k in self.resnet_kernels):
            raise ConfigError("resnet kernel longer than the sequence")
        if not self.lstm_units:
            raise ConfigError("lstm_units must not be empty")
        if not self.dropout or any(not 0 <= r < 1 for r in self.dropout):
            raise ConfigError("dropout rates must lie in [0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "HaeltConfig":
        return cls(**d)


@dataclass
class ModelOutputs:
    """Per-member sigmoid outputs, keyed ``lstm``/``transformer``/``fused``/``cnn``."""

    members: dict[str, Tensor] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Tensor:
        return self.members[name]

    @property
    def p_lstm(self):
        return self.members.get("lstm")

    @property
    def p_transformer(self):
        return self.members.get("transformer")

    @property
    def p_fused(self):
        return self.members.get("fused")

    def as_numpy(self) -> dict[str, np.ndarray]:
        return {k: v.value for k, v in self.members.items()}


class HaeltNetwork(Module):
    """Features -> ResNet -> temporal attention -> LSTM || Transformer -> heads.

    Each variant builds only the components it names, so parameter counts
    reflect the removed parts. Members are returned in a fixed order; the
    dynamic ensemble combines them downstream.
    """

    def __init__(self, config: HaeltConfig, n_features: int | None = None, seed: int = 0):
        n_features = n_features if n_features is not None else config.n_features
        if not n_features or n_features < 1:
            raise ConfigError("n_features must be a positive integer")
        config.n_features = int(n_features)
        config.validate()
        self.config = config
        rng = np.random.default_rng(seed)
        use_cnn, use_attn, use_lstm, use_tf, branch_heads = _WIRING[config.variant]
        d = n_features
        rates = config.dropout
        self.resnet = None
        self.attention = None
        self.lstm = None
        self.transformer = None
        self.lstm_head = None
        self.transformer_head = None
        self.fused_head = None
        self.cnn_head = None
        if use_cnn:
            self.resnet = ResNetStack(d, config.resnet_filters, config.resnet_kernels, rates[0], rng)
            d = self.resnet.out_dim
        if use_attn:
            self.attention = TemporalAttention(d, rng)
        if use_lstm:
            self.lstm = LSTMBranch(d, config.lstm_units, rates, rng)
        if use_tf:
            self.transformer = TransformerBranch(d, config.embed_dim, config.num_heads, config.ff_dim,
                                                 config.encoder_layers, rates[-1], rng)
        if config.variant == "cnn_only":
            self.cnn_head = Head(d, [config.head_units], rng)
        elif not use_attn:
            # single sequence branch straight from the features
            branch = self.lstm or self.transformer
            head = Head(branch.out_dim, [config.head_units], rng)
            if self.lstm is not None:
                self.lstm_head = head
            else:
                self.transformer_head = head
        else:
            fused_in = 0
            if self.lstm is not None:
                fused_in += self.lstm.out_dim
                if branch_heads:
                    self.lstm_head = Head(self.lstm.out_dim, [config.head_units], rng)
            if self.transformer is not None:
                fused_in += self.transformer.out_dim
                if branch_heads:
                    self.transformer_head = Head(self.transformer.out_dim, [config.head_units], rng)
            self.fused_head = Head(fused_in, config.fusion_units, rng)
        self.members = tuple(name for name, head in (
            ("lstm", self.lstm_head), ("transformer", self.transformer_head),
            ("fused", self.fused_head), ("cnn", self.cnn_head)) if head is not None)

    @property
    def variant(self) -> str:
        return self.config.variant

    def forward(self, x, training: bool = False, rng: np.random.Generator | None = None) -> ModelOutputs:
        x = ad.as_tensor(x)
        cfg = self.config
        if x.ndim != 3 or x.shape[2] != cfg.n_features:
            raise ShapeError("forward", [x.shape], f"expected (batch, time, {cfg.n_features})")
        h = x
        if self.resnet is not None:
            h = self.resnet(h, training, rng)
        if self.attention is not None:
            h = self.attention(h)
        out: dict[str, Tensor] = {}
        if self.cnn_head is not None:
            out["cnn"] = self.cnn_head(ad.mean(h, axis=1))
            return ModelOutputs(out)
        reps = []
        if self.lstm is not None:
            z = self.lstm(h, training, rng)
            reps.append(z)
            if self.lstm_head is not None:
                out["lstm"] = self.lstm_head(z)
        if self.transformer is not None:
            z = self.transformer(h, training, rng)
            reps.append(z)
            if self.transformer_head is not None:
                out["transformer"] = self.transformer_head(z)
        if self.fused_head is not None:
            out["fused"] = self.fused_head(reps[0] if len(reps) == 1 else ad.concat(reps, axis=-1))
        return ModelOutputs({m: out[m] for m in self.members})

    __call__ = forward

    def predict_members(self, x: np.ndarray, batch_size: int = 256) -> dict[str, np.ndarray]:
        """Inference (no dropout, no graph) in chunks; arrays of shape (n,) per member."""
        x = np.asarray(x, dtype=np.float64)
        chunks: dict[str, list[np.ndarray]] = {m: [] for m in self.members}
        for start in range(0, len(x), batch_size):
            outs = self.forward(x[start:start + batch_size]).as_numpy()
            for m in self.members:
                chunks[m].append(outs[m])
        return {m: np.concatenate(v) if v else np.empty(0) for m, v in chunks.items()}

    # weights -------------------------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = sorted(set(params) - set(state))
        extra = sorted(set(state) - set(params))
        if missing or extra:
            raise ConfigError(f"checkpoint mismatch: missing={missing} unexpected={extra}")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ShapeError("load_state_dict", [p.shape, arr.shape], name)
            p.value[...] = arr

    def save(self, path) -> None:
        """JSON checkpoint: config plus named arrays with shapes."""
        payload = {
            "config": self.config.to_dict(),
            "parameters": {name: {"shape": list(v.shape), "values": v.ravel().tolist()}
                           for name, v in self.state_dict().items()},
        }
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def load(cls, path) -> "HaeltNetwork":
        payload = json.loads(Path(path).read_text())
        net = cls(HaeltConfig.from_dict(payload["config"]))
        net.load_state_dict({name: np.asarray(e["values"], dtype=np.float64).reshape(e["shape"])
                             for name, e in payload["parameters"].items()})
        return net


def parameter_counts(n_features: int, base: HaeltConfig | None = None) -> dict[str, int]:
    """Parameter count of every variant for the given feature width."""
    base = base or HaeltConfig()
    counts = {}
    for v in VARIANTS:
        cfg = HaeltConfig.from_dict({**base.to_dict(), "variant": v})
        counts[v] = HaeltNetwork(cfg, n_features).n_parameters()
    return counts
