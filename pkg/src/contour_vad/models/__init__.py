"""Shallow anomaly models trained on contour descriptors.

Three reconstruction models (convolutional variational, linear, and
tabular autoencoders), a next-contour regressor, and a next-cluster
classifier. Training functions return model objects that carry their
spec and loss trace; `save_trained`/`load_trained` move them through the
binary checkpoint container.
"""

from .autoencoders import (
    LaeModel,
    LaeSpec,
    TaeModel,
    TaeSpec,
    VaeModel,
    VaeSpec,
    prepare_track_images,
    score_ae,
    train_lae,
    train_tae,
    train_vae,
)
from .io import load_trained, save_trained
from .recurrent import (
    MIN_PREFIX,
    AugmentConfig,
    CrnnModel,
    CrnnSpec,
    RrnnModel,
    RrnnSpec,
    extract_windows,
    predict_crnn,
    score_rrnn,
    train_crnn,
    train_rrnn,
)

__all__ = [
    "AugmentConfig",
    "CrnnModel",
    "CrnnSpec",
    "LaeModel",
    "LaeSpec",
    "MIN_PREFIX",
    "RrnnModel",
    "RrnnSpec",
    "TaeModel",
    "TaeSpec",
    "VaeModel",
    "VaeSpec",
    "extract_windows",
    "load_trained",
    "predict_crnn",
    "prepare_track_images",
    "save_trained",
    "score_ae",
    "score_rrnn",
    "train_crnn",
    "train_lae",
    "train_rrnn",
    "train_tae",
    "train_vae",
]
