"""Adam optimizer over named parameter tensors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from minibert import _kernels as K


@dataclass
class AdamState:
    """Moment buffers for exactly the registered parameters."""

    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params, beta1=0.9, beta2=0.999, epsilon=1e-8):
        state = cls(beta1=beta1, beta2=beta2, epsilon=epsilon)
        for name, p in params.items():
            state.first_moment[name] = np.zeros_like(p.data)
            state.second_moment[name] = np.zeros_like(p.data)
        return state


def adam_step(params, state, lr):
    """One bias-corrected Adam update, in place, over all parameters.

    params is a dict name -> Tensor whose .grad buffers hold the current
    gradients. A parameter without a gradient is a contract violation.
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if set(params) != set(state.first_moment):
        raise ValueError("optimizer state does not match the registered parameters")
    for name, p in params.items():
        if p.grad is None:
            raise ValueError(f"parameter '{name}' has no gradient; run backward() first")
    state.step_count += 1
    for name, p in params.items():
        K.adam_update(
            p.data,
            p.grad,
            state.first_moment[name],
            state.second_moment[name],
            state.step_count,
            lr,
            state.beta1,
            state.beta2,
            state.epsilon,
        )


def zero_grads(params):
    for p in params.values():
        p.grad = None
