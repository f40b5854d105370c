"""Adaptive-moment optimizer with decoupled weight decay."""
from collections.abc import Iterable, Mapping

import numpy as np

from pairedit.numerics.tensor import Param


class AdamW:
    """AdamW optimizer.

    Parameter values are replaced (never mutated in place) on every step, so tensors produced
    by earlier forward passes keep their values.
    """

    def __init__(
        self,
        params: Mapping[str, Param] | Iterable[Param],
        lr: float = 5e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 1e-2,
    ):
        """Construct the optimizer.

        Parameters
        ----------
        params
            Parameters to optimize
        lr, optional
            Learning rate, by default 5e-4
        betas, optional
            Decay rates of the first and second moment estimates, by default (0.9, 0.999)
        eps, optional
            Denominator offset, by default 1e-8
        weight_decay, optional
            Decoupled weight decay factor, by default 1e-2

        Raises
        ------
        ValueError
            Invalid hyperparameter.
        """
        if lr <= 0 or not 0 <= betas[0] < 1 or not 0 <= betas[1] < 1 or weight_decay < 0:
            raise ValueError(f"Invalid AdamW hyperparameters: lr={lr}, betas={betas}, weight_decay={weight_decay}")
        self.params: list[Param] = list(params.values() if isinstance(params, Mapping) else params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        """Reset the gradient buffers of all parameters."""
        for param in self.params:
            param.zero_grad()

    def step(self, grad_scale: float = 1.0) -> None:
        """Apply one update from the accumulated gradients.

        Parameters
        ----------
        grad_scale, optional
            Factor applied to the accumulated gradients, e.g. ``1 / accumulation_steps``, by default 1.0
        """
        self.step_count += 1
        beta1, beta2 = self.betas
        correction1 = 1.0 - beta1**self.step_count
        correction2 = 1.0 - beta2**self.step_count
        for k, param in enumerate(self.params):
            grad = param.gradient * grad_scale
            self._m[k] = beta1 * self._m[k] + (1.0 - beta1) * grad
            self._v[k] = beta2 * self._v[k] + (1.0 - beta2) * grad * grad
            update = (self._m[k] / correction1) / (np.sqrt(self._v[k] / correction2) + self.eps)
            decayed = param.data * (1.0 - self.lr * self.weight_decay)
            param.assign(decayed - self.lr * update)
