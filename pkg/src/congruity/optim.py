"""Adam with bias correction and decoupled weight decay.

Weight decay is applied directly to the parameters (theta <- theta -
lr*wd*theta) before the moment update rather than folded into the
gradient; set ``decoupled_weight_decay=False`` to fold it in instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .tensor import Tensor


@dataclass
class AdamState:
    """Per-parameter moment buffers plus hyperparameters and step count."""

    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decoupled_weight_decay: bool = True
    step_count: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict[str, Tensor], lr: float, weight_decay: float = 0.0,
                   **kwargs) -> "AdamState":
        state = cls(lr=lr, weight_decay=weight_decay, **kwargs)
        for name, p in params.items():
            state.first_moment[name] = np.zeros_like(p.data)
            state.second_moment[name] = np.zeros_like(p.data)
        return state


def adam_step(params: dict[str, Tensor], state: AdamState) -> None:
    """One optimizer step over all parameters; gradients must be populated."""
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = p.grad
        if g is None:
            raise ContractError(f"adam_step: parameter {name!r} has no gradient")
        m = state.first_moment[name]
        v = state.second_moment[name]
        if m.shape != p.data.shape:
            raise ContractError(f"adam_step: moment shape mismatch for {name!r}")
        if state.weight_decay != 0.0:
            if state.decoupled_weight_decay:
                p.data -= state.lr * state.weight_decay * p.data
            else:
                g = g + state.weight_decay * p.data
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        if not np.isfinite(p.data.sum()):
            raise ContractError(f"adam_step: parameter {name!r} became non-finite")
