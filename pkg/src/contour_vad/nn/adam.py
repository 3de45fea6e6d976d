"""In-place Adam with bias correction."""

from __future__ import annotations

import numpy as np


class Adam:
    """Updates the given parameter arrays in place.

    Layers hand out live references to their parameters and gradient
    accumulators, so stepping here immediately affects the model.
    Moments are allocated per parameter in the parameter's dtype to keep
    the footprint predictable for the large models.
    """

    def __init__(self, params, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        if len(params) != len(grads):
            raise ValueError("params/grads length mismatch")
        self.params = params
        self.grads = grads
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self):
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(self.params, self.grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            upd = m / bc1
            upd /= np.sqrt(v / bc2) + self.eps
            upd *= self.lr
            p -= upd

    def zero_grads(self):
        for g in self.grads:
            g[...] = 0.0
