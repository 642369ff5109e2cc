"""Dense float64 tensors with a define-by-run reverse-mode tape.

Operations executed inside an active :class:`Graph` are appended to its tape
in execution order; :func:`backward` walks the tape in exact reverse order.
Outside a graph the same operations run eagerly without recording, which is
what inference uses.

>>> w = Tensor([3.0], requires_grad=True)
>>> with Graph():
...     loss = (w * w).sum()
...     grads = backward(loss)
>>> float(grads[w][0])
6.0
"""

from __future__ import annotations

import contextvars
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit

from ..exceptions import NumericalError, ShapeError

_ACTIVE_GRAPH: contextvars.ContextVar["Graph | None"] = contextvars.ContextVar(
    "haelt_active_graph", default=None
)


class Tensor:
    """n-dimensional float64 array participating in reverse-mode autodiff."""

    __slots__ = ("value", "grad", "requires_grad", "name", "_graph", "_node")
    __array_ufunc__ = None  # make ``ndarray * Tensor`` dispatch to Tensor

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        arr = np.array(value, dtype=np.float64, order="C")
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if not np.all(np.isfinite(arr)):
            raise NumericalError(f"non-finite values in tensor {name or ''}".rstrip())
        self.value = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._graph: Graph | None = None
        self._node: int | None = None

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        # internal constructor: no copy, no finiteness scan
        t = cls.__new__(cls)
        t.value = arr
        t.grad = None
        t.requires_grad = False
        t.name = None
        t._graph = None
        t._node = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    def numpy(self) -> np.ndarray:
        return self.value

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.value)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return slice_(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor._wrap(np.asarray(x, dtype=np.float64))


@dataclass
class Node:
    kind: str
    inputs: tuple[int | None, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None


@dataclass(eq=False)
class Graph:
    """Tape of operation records; acts as a context manager.

    Every node input id refers to an earlier node, so the insertion order is a
    topological order by construction.
    """

    nodes: list[Node] = field(default_factory=list)
    _leaf_ids: dict[int, int] = field(default_factory=dict, repr=False)
    _token: object = field(default=None, repr=False)

    def __enter__(self) -> "Graph":
        self._token = _ACTIVE_GRAPH.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_GRAPH.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def release(self) -> None:
        """Drop the tape so intermediate arrays are freed without waiting for the GC.

        Tensors recorded on the tape point back at the graph, so a finished
        graph otherwise lingers in a reference cycle.
        """
        for node in self.nodes:
            if node.output._graph is self:
                node.output._graph = None
                node.output._node = None
        self.nodes.clear()
        self._leaf_ids.clear()

    def _input_id(self, t: Tensor) -> int | None:
        if t._graph is self:
            return t._node
        if t.requires_grad:
            key = id(t)
            nid = self._leaf_ids.get(key)
            if nid is None:
                nid = len(self.nodes)
                self.nodes.append(Node("leaf", (), t, None))
                self._leaf_ids[key] = nid
            return nid
        return None

    def record(self, kind, inputs, out_value, backward_fn) -> Tensor:
        ids = tuple(self._input_id(t) for t in inputs)
        out = Tensor._wrap(out_value)
        if all(i is None for i in ids):
            return out
        out.requires_grad = True
        out._graph = self
        out._node = len(self.nodes)
        self.nodes.append(Node(kind, ids, out, backward_fn))
        return out


def active_graph() -> Graph | None:
    return _ACTIVE_GRAPH.get()


def _emit(kind: str, inputs: Sequence[Tensor], value: np.ndarray, backward_fn) -> Tensor:
    graph = _ACTIVE_GRAPH.get()
    if graph is None:
        return Tensor._wrap(value)
    return graph.record(kind, inputs, value, backward_fn)


def backward(loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Reverse pass from a scalar ``loss``.

    Sets ``.grad`` on every leaf tensor with ``requires_grad`` that the graph
    touched (zeros when ``loss`` does not depend on it) and returns the same
    arrays keyed by tensor.
    """
    if loss.size != 1:
        raise ShapeError("backward", [loss.shape], "loss must be scalar")
    graph = loss._graph
    if graph is None or not graph.nodes:
        raise ValueError("backward: loss is not attached to a non-empty graph")
    if not np.isfinite(loss.value).all():
        raise NumericalError("backward: loss is not finite")
    nodes = graph.nodes
    grads: list[np.ndarray | None] = [None] * len(nodes)
    grads[loss._node] = np.ones_like(loss.value)
    for i in range(loss._node, -1, -1):
        node = nodes[i]
        g = grads[i]
        if g is None or node.backward is None:
            continue
        for nid, gi in zip(node.inputs, node.backward(g)):
            if nid is None or gi is None:
                continue
            if grads[nid] is None:
                grads[nid] = gi
            else:
                grads[nid] = grads[nid] + gi
    result: dict[Tensor, np.ndarray] = {}
    for nid in graph._leaf_ids.values():
        leaf = nodes[nid].output
        g = grads[nid]
        if g is None:
            g = np.zeros_like(leaf.value)
        else:
            g = np.array(np.broadcast_to(g, leaf.shape))
        leaf.grad = g
        result[leaf] = g
    return result


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_check(kind, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(kind, [a.shape, b.shape], "not broadcastable") from None


# ---------------------------------------------------------------- elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("add", a, b)
    sa, sb = a.shape, b.shape
    return _emit("add", (a, b), a.value + b.value,
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("sub", a, b)
    sa, sb = a.shape, b.shape
    return _emit("sub", (a, b), a.value - b.value,
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("mul", a, b)
    av, bv = a.value, b.value
    return _emit("mul", (a, b), av * bv,
                 lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("div", a, b)
    av, bv = a.value, b.value
    out = av / bv
    return _emit("div", (a, b), out,
                 lambda g: (_unbroadcast(g / bv, av.shape),
                            _unbroadcast(-g * out / bv, bv.shape)))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _emit("neg", (a,), -a.value, lambda g: (-g,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.value)
    return _emit("exp", (a,), out, lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    av = a.value
    if np.any(av <= 0):
        raise NumericalError("log: non-positive input")
    return _emit("log", (a,), np.log(av), lambda g: (g / av,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = expit(a.value)
    return _emit("sigmoid", (a,), out, lambda g: (g * out * (1.0 - out),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.value)
    return _emit("tanh", (a,), out, lambda g: (g * (1.0 - out * out),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.value > 0
    return _emit("relu", (a,), np.where(mask, a.value, 0.0), lambda g: (g * mask,))


def clip(a, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    av = a.value
    mask = (av >= lo) & (av <= hi)
    return _emit("clip", (a,), np.clip(av, lo, hi), lambda g: (g * mask,))


def dropout(a, rate: float, rng: np.random.Generator | None, training: bool = True) -> Tensor:
    """Inverted dropout: the kept activations are scaled by ``1/(1-rate)``."""
    a = as_tensor(a)
    if not training or rate <= 0.0 or rng is None:
        return a
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    mask = (rng.random(a.shape, dtype=np.float32) >= rate) * (1.0 / (1.0 - rate))
    return _emit("dropout", (a,), a.value * mask, lambda g: (g * mask,))


# ---------------------------------------------------------------- linear algebra


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", [a.shape, b.shape])
    av, bv = a.value, b.value
    if bv.ndim == 2:
        k, m = bv.shape
        lead = av.shape[:-1]
        a2 = av.reshape(-1, k)
        out = (a2 @ bv).reshape(*lead, m)

        def _bw(g):
            g2 = g.reshape(-1, m)
            return (g2 @ bv.T).reshape(av.shape), a2.T @ g2

        return _emit("matmul", (a, b), out, _bw)
    try:
        out = np.matmul(av, bv)
    except ValueError:
        raise ShapeError("matmul", [a.shape, b.shape]) from None

    def _bw(g):
        ga = np.matmul(g, np.swapaxes(bv, -1, -2))
        gb = np.matmul(np.swapaxes(av, -1, -2), g)
        return _unbroadcast(ga, av.shape), _unbroadcast(gb, bv.shape)

    return _emit("matmul", (a, b), out, _bw)


def conv1d(x, w, b=None) -> Tensor:
    """'Same'-padded 1D convolution over time.

    ``x`` is (batch, time, in_channels), ``w`` is (kernel, in_channels,
    out_channels) with odd ``kernel``; ``b`` is (out_channels,).
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 3 or w.ndim != 3 or x.shape[2] != w.shape[1]:
        raise ShapeError("conv1d", [x.shape, w.shape])
    kernel, cin, cout = w.shape
    if kernel % 2 == 0:
        raise ShapeError("conv1d", [x.shape, w.shape], "kernel must be odd")
    batch, steps, _ = x.shape
    if kernel > steps:
        raise ShapeError("conv1d", [x.shape, w.shape], "kernel longer than time axis")
    pad = kernel // 2
    xp = np.pad(x.value, ((0, 0), (pad, pad), (0, 0)))
    # (batch, time, kernel, cin) im2col view
    cols = np.lib.stride_tricks.sliding_window_view(xp, kernel, axis=1)
    cols = np.ascontiguousarray(cols.transpose(0, 1, 3, 2)).reshape(batch * steps, kernel * cin)
    wmat = w.value.reshape(kernel * cin, cout)
    out = (cols @ wmat).reshape(batch, steps, cout)
    inputs = (x, w)
    if b is not None:
        b = as_tensor(b)
        if b.shape != (cout,):
            raise ShapeError("conv1d", [x.shape, w.shape, b.shape], "bias shape")
        out = out + b.value
        inputs = (x, w, b)

    def _bw(g):
        g2 = g.reshape(batch * steps, cout)
        gw = (cols.T @ g2).reshape(kernel, cin, cout)
        gcols = (g2 @ wmat.T).reshape(batch, steps, kernel, cin)
        gxp = np.zeros_like(xp)
        for k in range(kernel):
            gxp[:, k:k + steps, :] += gcols[:, :, k, :]
        gx = gxp[:, pad:pad + steps, :]
        if b is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    return _emit("conv1d", inputs, out, _bw)


# ---------------------------------------------------------------- reductions / normalisation


def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    axes = _norm_axes(axis, a.ndim)
    out = a.value.sum(axis=axes, keepdims=keepdims)
    if out.ndim == 0:
        out = out.reshape(1)

    def _bw(g):
        if not keepdims:
            g = g.reshape([1 if i in axes else s for i, s in enumerate(shape)])
        return (np.broadcast_to(g, shape),)

    return _emit("sum", (a,), out, _bw)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    axes = _norm_axes(axis, a.ndim)
    count = int(np.prod([shape[i] for i in axes])) if axes else 1
    out = a.value.mean(axis=axes, keepdims=keepdims)
    if out.ndim == 0:
        out = out.reshape(1)

    def _bw(g):
        if not keepdims:
            g = g.reshape([1 if i in axes else s for i, s in enumerate(shape)])
        return (np.broadcast_to(g / count, shape),)

    return _emit("mean", (a,), out, _bw)


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    z = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)
    return _emit("softmax", (a,), out,
                 lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),))


def layer_norm(x, gamma, beta, eps: float = 1e-8) -> Tensor:
    """Normalise over the last axis then apply the affine ``gamma``/``beta``."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError("layer_norm", [x.shape, gamma.shape, beta.shape])
    xv = x.value
    mu = xv.mean(axis=-1, keepdims=True)
    xc = xv - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    gv = gamma.value

    def _bw(g):
        gx_hat = g * gv
        gx = inv * (gx_hat - gx_hat.mean(axis=-1, keepdims=True)
                    - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _emit("layer_norm", (x, gamma, beta), xhat * gv + beta.value, _bw)


# ---------------------------------------------------------------- structural


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.value for t in ts], axis=axis)
    except ValueError:
        raise ShapeError("concat", [t.shape for t in ts]) from None
    ax = axis % out.ndim
    bounds = np.cumsum([t.shape[ax] for t in ts])[:-1]
    return _emit("concat", ts, out, lambda g: tuple(np.split(g, bounds, axis=ax)))


def slice_(a, index) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.value[index]
    except IndexError:
        raise ShapeError("slice", [a.shape], f"bad index {index!r}") from None
    shape = a.shape
    basic = not isinstance(index, (list, np.ndarray)) and not (
        isinstance(index, tuple) and any(isinstance(i, (list, np.ndarray)) for i in index))

    def _bw(g):
        gx = np.zeros(shape)
        if basic:
            gx[index] = g
        else:
            np.add.at(gx, index, g)
        return (gx,)

    if out.ndim == 0:
        out = out.reshape(1)
        return _emit("slice", (a,), out, lambda g: _bw(g.reshape(())))
    return _emit("slice", (a,), out, _bw)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.value.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", [a.shape], f"target {tuple(shape)}") from None
    src = a.shape
    return _emit("reshape", (a,), out, lambda g: (g.reshape(src),))


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = np.argsort(axes)
    return _emit("transpose", (a,), a.value.transpose(axes), lambda g: (g.transpose(inv),))


def linear_scan(u, decay, init) -> Tensor:
    """First-order recurrence ``s[t] = u[t] + decay * s[t-1]`` with ``s[-1] = init``.

    ``u`` is 1-D; ``decay`` and ``init`` are single-element tensors.
    """
    u, decay, init = as_tensor(u), as_tensor(decay), as_tensor(init)
    if u.ndim != 1 or decay.size != 1 or init.size != 1:
        raise ShapeError("linear_scan", [u.shape, decay.shape, init.shape])
    beta = float(decay.value.reshape(()))
    s0 = float(init.value.reshape(()))
    s = lfilter([1.0], [1.0, -beta], u.value, zi=[beta * s0])[0]

    def _bw(g):
        gs = lfilter([1.0], [1.0, -beta], g[::-1])[::-1]
        prev = np.concatenate(([s0], s[:-1]))
        return gs, np.array([gs @ prev]).reshape(decay.shape), (beta * gs[:1]).reshape(init.shape)

    return _emit("linear_scan", (u, decay, init), s, _bw)


_OPS: dict[str, Callable[..., Tensor]] = {
    "add": add, "sub": sub, "mul": mul, "div": div, "neg": neg,
    "exp": exp, "log": log, "sigmoid": sigmoid, "tanh": tanh, "relu": relu,
    "clip": clip, "dropout": dropout, "matmul": matmul, "conv1d": conv1d,
    "sum": sum_, "mean": mean, "softmax": softmax, "layer_norm": layer_norm,
    "concat": lambda *ts, **kw: concat(ts, **kw), "slice": slice_,
    "reshape": reshape, "transpose": transpose, "linear_scan": linear_scan,
}

OP_KINDS = tuple(_OPS)


def forward_op(kind: str, inputs: Sequence, **kwargs) -> Tensor:
    """Dispatch an operation by name, e.g. ``forward_op("softmax", [x], axis=-1)``."""
    try:
        fn = _OPS[kind]
    except KeyError:
        raise ValueError(f"unknown op kind {kind!r}") from None
    return fn(*inputs, **kwargs)


def lstm(x, w, u, b) -> Tensor:
    """Fused LSTM recurrence returning every hidden state.

    ``x`` is (batch, time, d); ``w`` (d, 4*units) input kernel, ``u``
    (units, 4*units) recurrent kernel and ``b`` (4*units,) bias. Gate blocks are
    ordered input, forget, output, candidate. Initial hidden and cell states
    are zero. Output is (batch, time, units). Backward is backprop through
    time over the stored gate activations.
    """
    x, w, u, b = as_tensor(x), as_tensor(w), as_tensor(u), as_tensor(b)
    if x.ndim != 3 or w.ndim != 2 or u.ndim != 2 or x.shape[2] != w.shape[0]:
        raise ShapeError("lstm", [x.shape, w.shape, u.shape, b.shape])
    units = u.shape[0]
    if u.shape != (units, 4 * units) or w.shape[1] != 4 * units or b.shape != (4 * units,):
        raise ShapeError("lstm", [x.shape, w.shape, u.shape, b.shape])
    batch, steps, d = x.shape
    wv, uv = w.value, u.value
    # time-major internally so per-step slices are contiguous
    xt = np.ascontiguousarray(x.value.transpose(1, 0, 2)).reshape(-1, d)
    z_in = (xt @ wv + b.value).reshape(steps, batch, 4 * units)
    sig = np.empty((steps, batch, 3 * units))
    cand = np.empty((steps, batch, units))
    cells = np.empty((steps, batch, units))
    tanh_c = np.empty((steps, batch, units))
    hs = np.empty((steps, batch, units))
    h = np.zeros((batch, units))
    c = np.zeros((batch, units))
    for t in range(steps):
        z = z_in[t]
        if t:
            z += h @ uv
        s = expit(z[:, :3 * units], out=sig[t])
        g = np.tanh(z[:, 3 * units:], out=cand[t])
        c = np.multiply(s[:, units:2 * units], c, out=cells[t])
        c += s[:, :units] * g
        tc = np.tanh(c, out=tanh_c[t])
        h = np.multiply(s[:, 2 * units:], tc, out=hs[t])

    def _bw(gh):
        gh = gh.transpose(1, 0, 2)
        dz = np.empty((steps, batch, 4 * units))
        dh_next = np.zeros((batch, units))
        dc_next = np.zeros((batch, units))
        for t in range(steps - 1, -1, -1):
            s, g, tc = sig[t], cand[t], tanh_c[t]
            i, f, o = s[:, :units], s[:, units:2 * units], s[:, 2 * units:]
            dh = gh[t] + dh_next
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dzt = dz[t]
            dzt[:, :units] = dc * g * i * (1.0 - i)
            if t:
                dzt[:, units:2 * units] = dc * cells[t - 1] * f * (1.0 - f)
            else:
                dzt[:, units:2 * units] = 0.0
            dzt[:, 2 * units:3 * units] = dh * tc * o * (1.0 - o)
            dzt[:, 3 * units:] = dc * i * (1.0 - g * g)
            dc_next = dc * f
            if t:
                dh_next = dzt @ uv.T
        dz2 = dz.reshape(-1, 4 * units)
        gx = (dz2 @ wv.T).reshape(steps, batch, d).transpose(1, 0, 2)
        gw = xt.T @ dz2
        gu = hs[:-1].reshape(-1, units).T @ dz[1:].reshape(-1, 4 * units)
        return gx, gw, gu, dz2.sum(axis=0)

    hs_bm = hs.transpose(1, 0, 2)
    return _emit("lstm", (x, w, u, b), hs_bm, _bw)


_OPS["lstm"] = lstm
OP_KINDS = tuple(_OPS)
