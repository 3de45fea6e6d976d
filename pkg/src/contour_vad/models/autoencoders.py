"""Reconstruction-based anomaly models over track images and radii rows.

A track's radii descriptors stack into an (H, 256) matrix; the image
models resize it to a square and reconstruct the whole track at once,
the tabular model reconstructs one row at a time. Anomaly evidence is
the per-frame reconstruction error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, EmptyTrainingSet, ShapeMismatch
from ..nn import (
    Adam,
    Conv2D,
    Deconv2D,
    Dense,
    Relu,
    Sequential,
    Sigmoid,
    kl_loss,
    mse_loss,
    resize_bilinear,
    rows_to_frames,
)

VAE_SEED_PURPOSE = 101
LAE_SEED_PURPOSE = 102
TAE_SEED_PURPOSE = 103


def _rng_for(seed, purpose):
    return np.random.default_rng(np.random.SeedSequence((seed, purpose)))


@dataclass(frozen=True)
class VaeSpec:
    """Convolutional variational autoencoder over square track images.

    Four stride-2 conv layers down, dense mean/logvar heads, four
    transposed convs back up to a sigmoid output. Channel widths are
    kept modest so training fits a small CPU budget.
    """

    latent_dim: int = 128
    channels: tuple = (8, 16, 32, 64)
    input_hw: int = 256
    epochs: int = 100
    batch: int = 16
    lr: float = 1e-4

    def validate(self):
        if len(self.channels) != 4 or any(c < 1 for c in self.channels):
            raise ConfigError("encoder takes exactly 4 positive channel "
                              "widths")
        if self.input_hw < 16 or self.input_hw % 16 != 0:
            raise ConfigError("input side must be a positive multiple of 16")
        if min(self.latent_dim, self.epochs, self.batch) < 1:
            raise ConfigError("latent_dim, epochs and batch must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")


@dataclass(frozen=True)
class LaeSpec:
    """Two-dense-layer autoencoder over flattened track images."""

    widths: tuple = (1024, 256)
    input_hw: int = 256
    epochs: int = 100
    batch: int = 8
    lr: float = 1e-4

    def validate(self):
        if len(self.widths) != 2 or any(w < 1 for w in self.widths):
            raise ConfigError("encoder takes exactly 2 positive widths")
        if min(self.input_hw, self.epochs, self.batch) < 1:
            raise ConfigError("input side, epochs and batch must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")


@dataclass(frozen=True)
class TaeSpec:
    """Four-dense-layer autoencoder over single 256-element radii rows."""

    widths: tuple = (128, 64, 32, 16)
    n_features: int = 256
    epochs: int = 50
    batch: int = 16
    lr: float = 2e-4

    def validate(self):
        if len(self.widths) != 4 or any(w < 1 for w in self.widths):
            raise ConfigError("encoder takes exactly 4 positive widths")
        if min(self.n_features, self.epochs, self.batch) < 1:
            raise ConfigError("n_features, epochs and batch must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")


class VaeModel:
    kind = "vae"

    def __init__(self, spec: VaeSpec, rng):
        spec.validate()
        self.spec = spec
        dt = np.float32
        c = spec.channels
        self.encoder = Sequential(
            Conv2D(1, c[0], rng, dtype=dt), Relu(),
            Conv2D(c[0], c[1], rng, dtype=dt), Relu(),
            Conv2D(c[1], c[2], rng, dtype=dt), Relu(),
            Conv2D(c[2], c[3], rng, dtype=dt), Relu(),
        )
        self.side = spec.input_hw // 16
        self.flat = c[3] * self.side * self.side
        self.mu_head = Dense(self.flat, spec.latent_dim, rng, dtype=dt)
        self.logvar_head = Dense(self.flat, spec.latent_dim, rng, dtype=dt)
        self.expand = Dense(spec.latent_dim, self.flat, rng, dtype=dt)
        self.decoder = Sequential(
            Relu(),
            Deconv2D(c[3], c[2], rng, dtype=dt), Relu(),
            Deconv2D(c[2], c[1], rng, dtype=dt), Relu(),
            Deconv2D(c[1], c[0], rng, dtype=dt), Relu(),
            Deconv2D(c[0], 1, rng, dtype=dt), Sigmoid(),
        )
        self.loss_trace = []

    def _pieces(self):
        return [self.encoder, self.mu_head, self.logvar_head, self.expand,
                self.decoder]

    def params(self):
        return [p for piece in self._pieces() for p in piece.params()]

    def grads(self):
        return [g for piece in self._pieces() for g in piece.grads()]

    def zero_grads(self):
        for piece in self._pieces():
            piece.zero_grads()

    def _encode(self, x, train):
        h = self.encoder.forward(x, train=train)
        hf = h.reshape(x.shape[0], self.flat)
        mu = self.mu_head.forward(hf, train=train)
        logvar = self.logvar_head.forward(hf, train=train)
        return mu, logvar

    def _decode(self, z, train):
        d = self.expand.forward(z, train=train)
        d = d.reshape(z.shape[0], self.spec.channels[3], self.side,
                      self.side)
        return self.decoder.forward(d, train=train)

    def reconstruct(self, images):
        """Deterministic reconstruction using the posterior mean."""
        x = np.ascontiguousarray(images, dtype=np.float32)[:, None]
        mu, _ = self._encode(x, train=False)
        return self._decode(mu, train=False)[:, 0]

    def train_step(self, images, noise):
        """Forward and backward for one batch; returns the batch loss."""
        x = images[:, None]
        bsz = x.shape[0]
        mu, logvar = self._encode(x, train=True)
        z = mu + np.exp(0.5 * logvar) * noise
        y = self._decode(z, train=True)
        rec, g_y = mse_loss(y, x)
        kl, g_mu_kl, g_lv_kl = kl_loss(mu, logvar)
        g_d = self.decoder.backward(g_y)
        g_z = self.expand.backward(g_d.reshape(bsz, self.flat))
        # z = mu + exp(logvar/2) * noise, so dz/dlogvar = (z - mu) / 2
        g_mu = g_z + g_mu_kl
        g_lv = g_z * (0.5 * (z - mu)) + g_lv_kl
        g_hf = self.mu_head.backward(g_mu) + self.logvar_head.backward(g_lv)
        shape = (bsz, self.spec.channels[3], self.side, self.side)
        self.encoder.backward(np.ascontiguousarray(g_hf).reshape(shape))
        return rec + kl


class LaeModel:
    kind = "lae"

    def __init__(self, spec: LaeSpec, rng):
        spec.validate()
        self.spec = spec
        dt = np.float32
        n_in = spec.input_hw * spec.input_hw
        w1, w2 = spec.widths
        self.net = Sequential(
            Dense(n_in, w1, rng, dtype=dt), Relu(),
            Dense(w1, w2, rng, dtype=dt), Relu(),
            Dense(w2, w1, rng, dtype=dt), Relu(),
            Dense(w1, n_in, rng, dtype=dt), Sigmoid(),
        )
        self.loss_trace = []

    def params(self):
        return self.net.params()

    def grads(self):
        return self.net.grads()

    def zero_grads(self):
        self.net.zero_grads()

    def reconstruct(self, images):
        images = np.ascontiguousarray(images, dtype=np.float32)
        x = images.reshape(images.shape[0], -1)
        y = self.net.forward(x, train=False)
        return y.reshape(images.shape)


class TaeModel:
    kind = "tae"

    def __init__(self, spec: TaeSpec, rng):
        spec.validate()
        self.spec = spec
        sizes = ([spec.n_features] + list(spec.widths)
                 + list(reversed(spec.widths[:-1])) + [spec.n_features])
        layers = []
        for i in range(len(sizes) - 1):
            layers.append(Dense(sizes[i], sizes[i + 1], rng))
            layers.append(Sigmoid() if i == len(sizes) - 2 else Relu())
        self.net = Sequential(*layers)
        self.loss_trace = []

    def params(self):
        return self.net.params()

    def grads(self):
        return self.net.grads()

    def zero_grads(self):
        self.net.zero_grads()

    def reconstruct_rows(self, rows):
        rows = np.asarray(rows, dtype=np.float64)
        return self.net.forward(rows, train=False)


def prepare_track_images(tracks, side: int = 256):
    """Resize per-track (H, side) radii matrices into a (N, side, side)
    training array for the image autoencoders."""
    if len(tracks) == 0:
        raise EmptyTrainingSet("no tracks to train on")
    out = np.empty((len(tracks), side, side), dtype=np.float64)
    for i, t in enumerate(tracks):
        t = np.asarray(t, dtype=np.float64)
        if t.ndim != 2 or t.shape[1] != side:
            raise ShapeMismatch(f"track matrix must be (H, {side}), "
                                f"got {t.shape}")
        out[i] = resize_bilinear(t, side)
    return out


def _check_images(images, side):
    images = np.ascontiguousarray(images, dtype=np.float32)
    if images.ndim != 3:
        raise ShapeMismatch(f"expected (N, H, W) images, got {images.shape}")
    if images.shape[0] == 0:
        raise EmptyTrainingSet("no track images to train on")
    if images.shape[1] != side or images.shape[2] != side:
        raise ShapeMismatch(f"expected {side}x{side} images, "
                            f"got {images.shape[1]}x{images.shape[2]}")
    return images


def _fit_reconstruction(net, data, epochs, batch, lr, rng, trace):
    """Minibatch MSE autoencoder training; appends per-epoch mean loss."""
    opt = Adam(net.params(), net.grads(), lr=lr)
    n = data.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, batch):
            idx = order[s:s + batch]
            x = data[idx]
            y = net.forward(x)
            loss, g = mse_loss(y, x)
            net.backward(g)
            opt.step()
            opt.zero_grads()
            total += loss * idx.size
        trace.append(total / n)


def train_vae(track_images, spec: VaeSpec = VaeSpec(), seed: int = 0):
    """Train the variational model on (N, side, side) images in [0, 1]."""
    spec.validate()
    images = _check_images(track_images, spec.input_hw)
    rng = _rng_for(seed, VAE_SEED_PURPOSE)
    model = VaeModel(spec, rng)
    opt = Adam(model.params(), model.grads(), lr=spec.lr)
    n = images.shape[0]
    for _ in range(spec.epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, spec.batch):
            idx = order[s:s + spec.batch]
            noise = rng.standard_normal(
                (idx.size, spec.latent_dim)).astype(np.float32)
            loss = model.train_step(images[idx], noise)
            opt.step()
            opt.zero_grads()
            total += loss * idx.size
        model.loss_trace.append(total / n)
    return model


def train_lae(track_images, spec: LaeSpec = LaeSpec(), seed: int = 0):
    """Train the dense image autoencoder on (N, side, side) images."""
    spec.validate()
    images = _check_images(track_images, spec.input_hw)
    flat = images.reshape(images.shape[0], -1)
    rng = _rng_for(seed, LAE_SEED_PURPOSE)
    model = LaeModel(spec, rng)
    _fit_reconstruction(model.net, flat, spec.epochs, spec.batch, spec.lr,
                        rng, model.loss_trace)
    return model


def train_tae(rows, spec: TaeSpec = TaeSpec(), seed: int = 0):
    """Train the tabular autoencoder on an (N, n_features) row matrix."""
    spec.validate()
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != spec.n_features:
        raise ShapeMismatch(f"expected (N, {spec.n_features}) rows, "
                            f"got {rows.shape}")
    if rows.shape[0] == 0:
        raise EmptyTrainingSet("no descriptor rows to train on")
    rng = _rng_for(seed, TAE_SEED_PURPOSE)
    model = TaeModel(spec, rng)
    _fit_reconstruction(model.net, rows, spec.epochs, spec.batch, spec.lr,
                        rng, model.loss_trace)
    return model


def score_ae(model, track):
    """Per-frame reconstruction errors for one track's (H, F) matrix.

    Image models reconstruct the temporally resized square and the
    per-row errors are mapped back onto the H frames; the tabular model
    scores each frame's row directly.
    """
    track = np.asarray(track, dtype=np.float64)
    if track.ndim != 2:
        raise ShapeMismatch(f"track matrix must be 2-D, got {track.shape}")
    h = track.shape[0]
    if model.kind == "tae":
        if track.shape[1] != model.spec.n_features:
            raise ShapeMismatch(f"track rows have {track.shape[1]} features, "
                                f"model expects {model.spec.n_features}")
        recon = np.asarray(model.reconstruct_rows(track), dtype=np.float64)
        return np.mean((recon - track) ** 2, axis=1)
    side = model.spec.input_hw
    if track.shape[1] != side:
        raise ShapeMismatch(f"track rows have {track.shape[1]} features, "
                            f"model expects {side}")
    img = resize_bilinear(track, side)
    recon = np.asarray(model.reconstruct(img[None])[0], dtype=np.float64)
    row_err = np.mean((recon - img) ** 2, axis=1)
    return rows_to_frames(row_err, h)
