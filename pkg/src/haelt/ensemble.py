"""Rolling-loss softmax ensemble over model members.

Each member's recent performance is its mean per-step binary cross-entropy
over the last ``k`` realised steps; weights are a softmax of ``-loss / tau``;
the ensemble probability is the weighted average of member probabilities.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import ConfigError

PROB_CLIP = 1e-7


def step_bce(y, p) -> np.ndarray:
    """Per-sample binary cross-entropy with probabilities clipped to ``[1e-7, 1-1e-7]``."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_CLIP, 1.0 - PROB_CLIP)
    y = np.asarray(y, dtype=np.float64)
    return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))


def softmax_weights(losses, tau: float) -> np.ndarray:
    if tau <= 0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    z = -np.asarray(losses, dtype=np.float64) / tau
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def combine(weights, probabilities) -> float | np.ndarray:
    """Convex combination ``sum_i w_i p_i``; ``probabilities`` may carry a trailing batch axis."""
    w = np.asarray(weights, dtype=np.float64)
    p = np.asarray(probabilities, dtype=np.float64)
    if p.shape[0] != w.shape[0]:
        raise ValueError(f"combine: {w.shape[0]} weights for {p.shape[0]} members")
    out = np.tensordot(w, p, axes=(0, 0))
    lo, hi = p.min(axis=0), p.max(axis=0)
    return np.clip(out, lo, hi)  # guard against last-ulp drift outside the hull


@dataclass
class EnsembleState:
    """Per-member ring buffers of recent losses plus the current weights."""

    members: tuple[str, ...]
    k: int = 24
    tau: float = 1.0
    loss_window: dict[str, deque] = field(default_factory=dict)
    weights: np.ndarray | None = None
    steps_seen: int = 0

    def __post_init__(self):
        self.members = tuple(self.members)
        if not self.members:
            raise ConfigError("ensemble needs at least one member")
        if self.k < 1:
            raise ConfigError(f"window length k must be >= 1, got {self.k}")
        if self.tau <= 0:
            raise ConfigError(f"temperature must be positive, got {self.tau}")
        if not self.loss_window:
            self.loss_window = {m: deque(maxlen=self.k) for m in self.members}
        if self.weights is None:
            self.weights = np.full(len(self.members), 1.0 / len(self.members))

    @property
    def has_history(self) -> bool:
        return self.steps_seen > 0

    def record(self, losses: Sequence[float]) -> None:
        """Append one realised step (one loss per member, in member order)."""
        if len(losses) != len(self.members):
            raise ValueError(f"expected {len(self.members)} losses, got {len(losses)}")
        for m, value in zip(self.members, losses):
            self.loss_window[m].append(float(value))
        self.steps_seen += 1

    def rolling_loss(self, member: str) -> float:
        """Mean loss over the most recent ``min(k, available)`` recorded steps."""
        window = self.loss_window[member]
        if not window:
            raise ValueError(f"no loss history for member {member!r}")
        return float(np.mean(window))

    def update_weights(self) -> np.ndarray:
        """Recompute weights from the buffers; uniform before any history."""
        if not self.has_history:
            self.weights = np.full(len(self.members), 1.0 / len(self.members))
        else:
            self.weights = softmax_weights([self.rolling_loss(m) for m in self.members], self.tau)
        return self.weights

    def copy(self) -> "EnsembleState":
        return EnsembleState(self.members, self.k, self.tau,
                             {m: deque(v, maxlen=self.k) for m, v in self.loss_window.items()},
                             self.weights.copy(), self.steps_seen)

    def to_dict(self) -> dict:
        return {"members": list(self.members), "k": self.k, "tau": self.tau,
                "loss_window": {m: list(v) for m, v in self.loss_window.items()},
                "weights": self.weights.tolist(), "steps_seen": self.steps_seen}

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleState":
        return cls(tuple(d["members"]), d["k"], d["tau"],
                   {m: deque(v, maxlen=d["k"]) for m, v in d["loss_window"].items()},
                   np.asarray(d["weights"], float), d.get("steps_seen", 0))


def walk_forward(state: EnsembleState, member_probs: dict[str, np.ndarray] | np.ndarray,
                 labels=None, update: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Score steps in time order.

    At step ``t`` the weights come from losses of steps strictly before ``t``;
    the realised label of step ``t`` is recorded only after its prediction.
    With ``update=False`` (or no labels) the current weights stay fixed.
    Returns ``(final_probabilities, weight_trajectory)``; ``state`` is mutated.
    """
    if isinstance(member_probs, dict):
        probs = np.vstack([np.asarray(member_probs[m], dtype=np.float64) for m in state.members])
    else:
        probs = np.asarray(member_probs, dtype=np.float64)
    n = probs.shape[1]
    if labels is not None and len(labels) != n:
        raise ValueError("labels and member probabilities differ in length")
    final = np.empty(n)
    traj = np.empty((n, len(state.members)))
    learn = update and labels is not None
    if not learn:
        w = state.weights.copy()
        traj[:] = w
        return combine(w, probs), traj
    state.update_weights()
    for t in range(n):
        traj[t] = state.weights
        final[t] = combine(state.weights, probs[:, t])
        state.record(step_bce(labels[t], probs[:, t]))
        state.update_weights()
    return final, traj
