from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import ShapeError


def clip_gradients(grads: Sequence[np.ndarray], threshold: float = 0.5) -> list[np.ndarray]:
    """Clamp every gradient component into [-threshold, threshold]."""
    if threshold <= 0:
        raise ValueError("clip threshold must be positive")
    return [np.clip(g, -threshold, threshold) for g in grads]


@dataclass
class AdamState:
    """Moment accumulators and step counter for :func:`adam_step`."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], **hyper) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params], **hyper)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              state: AdamState) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update.

    Returns fresh parameter arrays; ``state`` is advanced in place and also
    returned for convenience.
    """
    if state.lr <= 0:
        raise ValueError("learning rate must be positive")
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeError("adam_step", (len(params),), (len(grads),), (len(state.m),))
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError("adam_step", p.shape, g.shape, m.shape)

    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        updated.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return updated, state
