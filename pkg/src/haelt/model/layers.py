"""Building blocks of the HAELT network, written over :mod:`haelt.autodiff`."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..exceptions import ConfigError, ShapeError


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def orthogonal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Orthogonal matrix (rows x cols) from the QR decomposition of a Gaussian draw."""
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q *= np.sign(np.diag(r))
    return q if rows >= cols else q.T


def _param(value: np.ndarray) -> Tensor:
    return Tensor(value, requires_grad=True)


class Module:
    """Parameter container. Parameters are discovered in attribute order."""

    training = False

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))


class Dense(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, activation: str | None = None):
        self.weight = _param(glorot_uniform(rng, (n_in, n_out), n_in, n_out))
        self.bias = _param(np.zeros(n_out))
        self.activation = activation

    def __call__(self, x: Tensor) -> Tensor:
        y = ad.matmul(x, self.weight) + self.bias
        if self.activation == "relu":
            return ad.relu(y)
        if self.activation == "sigmoid":
            return ad.sigmoid(y)
        return y


class Conv1D(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator):
        if kernel < 1 or kernel % 2 == 0:
            raise ConfigError(f"conv kernel must be odd and positive, got {kernel}")
        self.kernel = kernel
        self.weight = _param(glorot_uniform(rng, (kernel, c_in, c_out), kernel * c_in, kernel * c_out))
        self.bias = _param(np.zeros(c_out))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.conv1d(x, self.weight, self.bias)


class ResNetBlock(Module):
    """``relu(conv2(relu(conv1(x))) + project(x))`` with same-length padding.

    ``project`` is a 1x1 convolution when the channel count changes and the
    identity otherwise.
    """

    def __init__(self, c_in: int, filters: int, kernel: int, rng: np.random.Generator):
        self.conv1 = Conv1D(c_in, filters, kernel, rng)
        self.conv2 = Conv1D(filters, filters, kernel, rng)
        self.project = Conv1D(c_in, filters, 1, rng) if c_in != filters else None

    def __call__(self, x: Tensor) -> Tensor:
        if self.conv1.kernel > x.shape[1]:
            raise ShapeError("resnet_block", [x.shape], f"kernel {self.conv1.kernel} exceeds time length")
        h = ad.relu(self.conv1(x))
        h = self.conv2(h)
        shortcut = self.project(x) if self.project is not None else x
        return ad.relu(h + shortcut)


def scaled_dot_product_attention(q: Tensor, k: Tensor, v: Tensor) -> tuple[Tensor, Tensor]:
    """``softmax(q kᵀ / sqrt(d_k)) v`` over the last two axes; returns (output, weights)."""
    d_k = q.shape[-1]
    axes = tuple(range(k.ndim - 2)) + (k.ndim - 1, k.ndim - 2)
    scores = ad.matmul(q, ad.transpose(k, axes)) * (1.0 / math.sqrt(d_k))
    weights = ad.softmax(scores, axis=-1)
    return ad.matmul(weights, v), weights


class TemporalAttention(Module):
    """Single-head self-attention over time steps with learned Q/K/V projections."""

    def __init__(self, dim: int, rng: np.random.Generator):
        self.w_query = _param(glorot_uniform(rng, (dim, dim), dim, dim))
        self.w_key = _param(glorot_uniform(rng, (dim, dim), dim, dim))
        self.w_value = _param(glorot_uniform(rng, (dim, dim), dim, dim))
        self.last_weights: np.ndarray | None = None

    def __call__(self, x: Tensor) -> Tensor:
        out, weights = scaled_dot_product_attention(
            ad.matmul(x, self.w_query), ad.matmul(x, self.w_key), ad.matmul(x, self.w_value))
        self.last_weights = weights.value
        return out


class MultiHeadAttention(Module):
    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if heads < 1 or dim % heads:
            raise ConfigError(f"embed_dim {dim} is not divisible by num_heads {heads}")
        self.heads = heads
        self.query = Dense(dim, dim, rng)
        self.key = Dense(dim, dim, rng)
        self.value = Dense(dim, dim, rng)
        self.output = Dense(dim, dim, rng)
        self.last_weights: np.ndarray | None = None

    def _split(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        return ad.transpose(ad.reshape(x, (b, t, self.heads, d // self.heads)), (0, 2, 1, 3))

    def attend(self, x: Tensor) -> Tensor:
        """Concatenated head outputs before the output projection."""
        b, t, d = x.shape
        out, weights = scaled_dot_product_attention(
            self._split(self.query(x)), self._split(self.key(x)), self._split(self.value(x)))
        self.last_weights = weights.value
        return ad.reshape(ad.transpose(out, (0, 2, 1, 3)), (b, t, d))

    def __call__(self, x: Tensor) -> Tensor:
        return self.output(self.attend(x))


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-8):
        self.gamma = _param(np.ones(dim))
        self.beta = _param(np.zeros(dim))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return ad.layer_norm(x, self.gamma, self.beta, self.eps)


def sinusoidal_encoding(steps: int, dim: int) -> np.ndarray:
    pos = np.arange(steps)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


class EncoderLayer(Module):
    """Post-norm Transformer encoder layer."""

    def __init__(self, dim: int, heads: int, ff_dim: int, dropout: float, rng: np.random.Generator):
        self.attention = MultiHeadAttention(dim, heads, rng)
        self.norm1 = LayerNorm(dim)
        self.ff1 = Dense(dim, ff_dim, rng, activation="relu")
        self.ff2 = Dense(ff_dim, dim, rng)
        self.norm2 = LayerNorm(dim)
        self.dropout = dropout

    def __call__(self, x: Tensor, training: bool = False, rng=None) -> Tensor:
        a = ad.dropout(self.attention(x), self.dropout, rng, training)
        x = self.norm1(x + a)
        f = ad.dropout(self.ff2(self.ff1(x)), self.dropout, rng, training)
        return self.norm2(x + f)


class LSTMLayer(Module):
    def __init__(self, n_in: int, units: int, rng: np.random.Generator):
        self.units = units
        self.kernel = _param(glorot_uniform(rng, (n_in, 4 * units), n_in, 4 * units))
        self.recurrent = _param(orthogonal(rng, units, 4 * units))
        bias = np.zeros(4 * units)
        bias[units:2 * units] = 1.0  # forget gate
        self.bias = _param(bias)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.lstm(x, self.kernel, self.recurrent, self.bias)


class LSTMBranch(Module):
    """Stacked LSTM; returns the last hidden state of the final layer."""

    def __init__(self, n_in: int, units, dropout, rng: np.random.Generator):
        units = list(units)
        rates = list(dropout) if isinstance(dropout, (list, tuple)) else [dropout] * len(units)
        if len(rates) < len(units):
            rates += [rates[-1] if rates else 0.0] * (len(units) - len(rates))
        self.layers = []
        for n in units:
            self.layers.append(LSTMLayer(n_in, n, rng))
            n_in = n
        self.rates = rates[:len(units)]
        self.out_dim = units[-1]

    def __call__(self, x: Tensor, training: bool = False, rng=None) -> Tensor:
        for layer, rate in zip(self.layers, self.rates):
            x = ad.dropout(layer(x), rate, rng, training)
        return x[:, -1, :]


class TransformerBranch(Module):
    """Linear projection, sinusoidal positions, encoder stack, temporal mean pool."""

    def __init__(self, n_in: int, embed_dim: int, heads: int, ff_dim: int, layers: int,
                 dropout: float, rng: np.random.Generator):
        if heads < 1 or embed_dim % heads:
            raise ConfigError(f"embed_dim {embed_dim} is not divisible by num_heads {heads}")
        self.projection = Dense(n_in, embed_dim, rng)
        self.encoders = [EncoderLayer(embed_dim, heads, ff_dim, dropout, rng) for _ in range(layers)]
        self.embed_dim = embed_dim
        self.out_dim = embed_dim

    def __call__(self, x: Tensor, training: bool = False, rng=None) -> Tensor:
        h = self.projection(x) + sinusoidal_encoding(x.shape[1], self.embed_dim)
        for enc in self.encoders:
            h = enc(h, training, rng)
        return ad.mean(h, axis=1)


class ResNetStack(Module):
    def __init__(self, n_in: int, filters, kernels, dropout: float, rng: np.random.Generator):
        if len(filters) != len(kernels):
            raise ConfigError("resnet filters and kernels must have equal length")
        self.blocks = []
        for f, k in zip(filters, kernels):
            self.blocks.append(ResNetBlock(n_in, f, k, rng))
            n_in = f
        self.dropout = dropout
        self.out_dim = n_in

    def __call__(self, x: Tensor, training: bool = False, rng=None) -> Tensor:
        for block in self.blocks:
            x = ad.dropout(block(x), self.dropout, rng, training)
        return x


class Head(Module):
    """Dense stack ending in a single sigmoid unit; output shape (batch,)."""

    def __init__(self, n_in: int, hidden, rng: np.random.Generator):
        self.hidden = []
        for n in hidden:
            self.hidden.append(Dense(n_in, n, rng, activation="relu"))
            n_in = n
        self.out = Dense(n_in, 1, rng, activation="sigmoid")

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.hidden:
            x = layer(x)
        return ad.reshape(self.out(x), (x.shape[0],))
