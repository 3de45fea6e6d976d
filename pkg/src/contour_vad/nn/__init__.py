"""Minimal from-scratch neural toolkit used by the anomaly models.

Dense, strided 2-D convolution and transposed convolution, a tanh
recurrent cell with backpropagation through time, elementwise
activations, the three losses (MSE, KL, categorical cross-entropy) and
an in-place Adam optimizer. Analytic gradients throughout, validated by
finite differences in the test suite.
"""

from .adam import Adam
from .image import resize_bilinear, rows_to_frames
from .layers import (Dense, Conv2D, Deconv2D, RnnTanh, Relu, Sigmoid, Tanh,
                     Sequential, softmax)
from .losses import cross_entropy_logits, kl_loss, mse_loss
from .serial import load_model, save_model

__all__ = [
    "Adam", "Conv2D", "Deconv2D", "Dense", "Relu", "RnnTanh", "Sequential",
    "Sigmoid", "Tanh", "cross_entropy_logits", "kl_loss", "load_model",
    "mse_loss", "resize_bilinear", "rows_to_frames", "save_model", "softmax",
]
