"""Adam with bias correction, operating on named tensor dicts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(tensors: dict) -> AdamState:
    state = AdamState()
    for name, t in tensors.items():
        state.m[name] = np.zeros_like(t)
        state.v[name] = np.zeros_like(t)
    return state


def adam_step(tensors: dict, grads: dict, state: AdamState, lr: float):
    """One update, in place on the tensors. Returns (tensors, state)."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name, t in tensors.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        t -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return tensors, state
