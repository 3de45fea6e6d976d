"""Losses returning (value, gradient) pairs."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from .layers import softmax


def mse_loss(pred, target):
    """Mean squared difference over all elements; grad w.r.t. pred."""
    if pred.shape != target.shape:
        raise ShapeMismatch(f"mse on {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, (2.0 / diff.size) * diff


def kl_loss(mu, logvar):
    """KL(q(z|x) || N(0, I)) averaged per batch element.

    Per element: -1/2 sum_j (1 + logvar - mu^2 - exp(logvar)).
    Returns (value, grad_mu, grad_logvar).
    """
    if mu.shape != logvar.shape:
        raise ShapeMismatch(f"kl on {mu.shape} vs {logvar.shape}")
    bsz = mu.shape[0]
    ev = np.exp(logvar)
    loss = float(-0.5 * np.sum(1.0 + logvar - mu * mu - ev) / bsz)
    return loss, mu / bsz, 0.5 * (ev - 1.0) / bsz


def cross_entropy_logits(logits, labels):
    """Categorical cross-entropy via log-softmax, mean over the batch.

    labels are integer class ids. Returns (value, grad w.r.t. logits).
    """
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeMismatch(
            f"cross entropy on logits {logits.shape}, labels {labels.shape}")
    bsz = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(bsz), labels]))
    grad = softmax(logits, axis=1)
    grad[np.arange(bsz), labels] -= 1.0
    return loss, grad / bsz
