"""Persisting trained models through the binary checkpoint container.

Parameter arrays are stored in construction order under positional
names; the spec needed to rebuild the architecture travels in the
metadata block together with the training loss trace.
"""

from __future__ import annotations

from dataclasses import asdict

import numpy as np

from ..errors import ParseError
from ..nn import load_model, save_model
from .autoencoders import (
    LaeModel,
    LaeSpec,
    TaeModel,
    TaeSpec,
    VaeModel,
    VaeSpec,
)
from .recurrent import CrnnModel, CrnnSpec, RrnnModel, RrnnSpec


def _build_vae(d):
    return VaeModel(VaeSpec(**{**d, "channels": tuple(d["channels"])}),
                    np.random.default_rng(0))


def _build_lae(d):
    return LaeModel(LaeSpec(**{**d, "widths": tuple(d["widths"])}),
                    np.random.default_rng(0))


def _build_tae(d):
    return TaeModel(TaeSpec(**{**d, "widths": tuple(d["widths"])}),
                    np.random.default_rng(0))


def _build_rrnn(d):
    return RrnnModel(RrnnSpec(**d), np.random.default_rng(0))


def _build_crnn(d):
    return CrnnModel(CrnnSpec(**d), np.random.default_rng(0))


_BUILDERS = {
    "vae": _build_vae,
    "lae": _build_lae,
    "tae": _build_tae,
    "rrnn": _build_rrnn,
    "crnn": _build_crnn,
}


def save_trained(model, path) -> None:
    """Write a trained model's spec, loss trace and parameters."""
    meta = {
        "spec": asdict(model.spec),
        "loss_trace": [float(v) for v in model.loss_trace],
    }
    arrays = {f"p{i:03d}": p for i, p in enumerate(model.params())}
    save_model(path, model.kind, meta, arrays)


def load_trained(path):
    """Rebuild a trained model from a checkpoint file."""
    kind, meta, arrays = load_model(path)
    if kind not in _BUILDERS:
        raise ParseError(f"unknown model kind {kind!r}")
    try:
        model = _BUILDERS[kind](meta["spec"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad model metadata: {exc}") from exc
    params = model.params()
    if len(params) != len(arrays):
        raise ParseError(f"checkpoint has {len(arrays)} arrays, "
                         f"model wants {len(params)}")
    for i, p in enumerate(params):
        name = f"p{i:03d}"
        if name not in arrays:
            raise ParseError(f"checkpoint missing array {name}")
        if arrays[name].shape != p.shape:
            raise ParseError(f"array {name} has shape {arrays[name].shape}, "
                             f"model wants {p.shape}")
        p[...] = arrays[name]
    model.loss_trace = list(meta.get("loss_trace", []))
    return model
