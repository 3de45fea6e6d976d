"""Sequence anomaly models: next-contour regression and next-cluster
classification.

The regressor watches three consecutive radii descriptors and predicts
the fourth; its prediction error is the anomaly evidence. The
classifier watches a prefix of cluster labels and predicts the next
label's distribution, which downstream scoring combines with novelty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import (
    ConfigError,
    EmptyTrainingSet,
    PrefixTooShort,
    ShapeMismatch,
    TrackTooShort,
    ValidationError,
)
from ..nn import Adam, Dense, RnnTanh, cross_entropy_logits, mse_loss, softmax

RRNN_SEED_PURPOSE = 104
CRNN_SEED_PURPOSE = 105

# shortest cluster-label prefix the classifier accepts
MIN_PREFIX = 3


def _rng_for(seed, purpose):
    return np.random.default_rng(np.random.SeedSequence((seed, purpose)))


@dataclass(frozen=True)
class RrnnSpec:
    """Recurrent regressor: 3 radii rows in, the 4th predicted."""

    hidden: int = 8
    n_features: int = 256
    window: int = 3
    epochs: int = 200
    batch: int = 64
    lr: float = 1e-5

    def validate(self):
        if min(self.hidden, self.n_features, self.window, self.epochs,
               self.batch) < 1:
            raise ConfigError("all size fields must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")


@dataclass(frozen=True)
class CrnnSpec:
    """Recurrent classifier over one-hot cluster label sequences."""

    n_clusters: int
    hidden: int = 8
    epochs: int = 200
    lr: float = 1e-3

    def validate(self):
        if self.n_clusters < 2:
            raise ConfigError("need at least 2 clusters to classify")
        if min(self.hidden, self.epochs) < 1:
            raise ConfigError("hidden and epochs must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")


@dataclass(frozen=True)
class AugmentConfig:
    """Per-epoch sequence slicing for classifier training."""

    slice_prob: float = 0.8
    min_range: int = 3
    shuffle: bool = True

    def validate(self):
        if not 0.0 <= self.slice_prob <= 1.0:
            raise ConfigError("slice_prob must be in [0, 1]")
        if self.min_range < 3:
            raise ConfigError("min_range must be >= 3")


class RrnnModel:
    kind = "rrnn"

    def __init__(self, spec: RrnnSpec, rng):
        spec.validate()
        self.spec = spec
        self.rnn = RnnTanh(spec.n_features, spec.hidden, rng)
        self.head = Dense(spec.hidden, spec.n_features, rng)
        self.loss_trace = []

    def params(self):
        return self.rnn.params() + self.head.params()

    def grads(self):
        return self.rnn.grads() + self.head.grads()

    def zero_grads(self):
        self.rnn.zero_grads()
        self.head.zero_grads()

    def predict(self, windows):
        """Predict the next row for each (window, F) input block."""
        windows = np.asarray(windows, dtype=np.float64)
        h = self.rnn.forward(windows, train=False)
        return self.head.forward(h, train=False)


class CrnnModel:
    kind = "crnn"

    def __init__(self, spec: CrnnSpec, rng):
        spec.validate()
        self.spec = spec
        self.rnn = RnnTanh(spec.n_clusters, spec.hidden, rng)
        self.head = Dense(spec.hidden, spec.n_clusters, rng)
        self.loss_trace = []

    def params(self):
        return self.rnn.params() + self.head.params()

    def grads(self):
        return self.rnn.grads() + self.head.grads()

    def zero_grads(self):
        self.rnn.zero_grads()
        self.head.zero_grads()

    def logits(self, onehot, train=False):
        h = self.rnn.forward(onehot, train=train)
        return self.head.forward(h, train=train)


def extract_windows(tracks, window: int = 3):
    """Stride-1 sliding (window rows -> next row) pairs from each track.

    A track of H rows contributes max(0, H - window) pairs; shorter
    tracks simply contribute none.
    """
    xs, ys = [], []
    n_features = 0
    for t in tracks:
        t = np.asarray(t, dtype=np.float64)
        if t.ndim != 2:
            raise ShapeMismatch(f"track matrix must be 2-D, got {t.shape}")
        n_features = t.shape[1]
        for i in range(t.shape[0] - window):
            xs.append(t[i:i + window])
            ys.append(t[i + window])
    if not xs:
        return (np.zeros((0, window, n_features)),
                np.zeros((0, n_features)))
    return np.stack(xs), np.stack(ys)


def train_rrnn(tracks, spec: RrnnSpec = RrnnSpec(), seed: int = 0):
    """Train the next-contour regressor on per-track radii matrices."""
    spec.validate()
    x, y = extract_windows(tracks, spec.window)
    if x.shape[0] == 0:
        raise EmptyTrainingSet("no track is long enough to yield a window")
    if x.shape[2] != spec.n_features:
        raise ShapeMismatch(f"tracks have {x.shape[2]} features, "
                            f"spec expects {spec.n_features}")
    rng = _rng_for(seed, RRNN_SEED_PURPOSE)
    model = RrnnModel(spec, rng)
    # starting the output at the average target keeps early errors small
    model.head.b[...] = y.mean(axis=0)
    opt = Adam(model.params(), model.grads(), lr=spec.lr)
    n = x.shape[0]
    for _ in range(spec.epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, spec.batch):
            idx = order[s:s + spec.batch]
            h = model.rnn.forward(x[idx])
            pred = model.head.forward(h)
            loss, g = mse_loss(pred, y[idx])
            model.rnn.backward(model.head.backward(g))
            opt.step()
            opt.zero_grads()
            total += loss * idx.size
        model.loss_trace.append(total / n)
    return model


def score_rrnn(model, track):
    """Per-frame prediction errors for one track's (H, F) matrix.

    Frame t >= window is scored by the error of predicting it from the
    window before it; the first window frames, which have no history,
    take the track's minimum score.
    """
    track = np.asarray(track, dtype=np.float64)
    if track.ndim != 2:
        raise ShapeMismatch(f"track matrix must be 2-D, got {track.shape}")
    w = model.spec.window
    h = track.shape[0]
    if h < w + 1:
        raise TrackTooShort(f"need at least {w + 1} frames, got {h}")
    windows = np.stack([track[t - w:t] for t in range(w, h)])
    preds = model.predict(windows)
    errs = np.mean((preds - track[w:]) ** 2, axis=1)
    scores = np.empty(h, dtype=np.float64)
    scores[w:] = errs
    scores[:w] = errs.min()
    return scores


def _one_hot(labels, n):
    return np.eye(n, dtype=np.float64)[labels]


def _check_sequences(sequences, n_clusters):
    seqs = []
    for s in sequences:
        s = np.asarray(s, dtype=np.int64)
        if s.ndim != 1:
            raise ShapeMismatch(f"label sequence must be 1-D, got {s.shape}")
        if s.size and (s.min() < 0 or s.max() >= n_clusters):
            raise ValidationError(f"cluster label out of range "
                                  f"[0, {n_clusters})")
        seqs.append(s)
    return seqs


def train_crnn(cluster_sequences, spec: CrnnSpec,
               augment: AugmentConfig = AugmentConfig(), seed: int = 0):
    """Train the next-cluster classifier on per-track label sequences.

    Each epoch re-draws the augmentation: a sequence is replaced, with
    probability slice_prob, by a uniformly random contiguous slice of
    length in [min_range, len]. Every surviving sequence contributes the
    single pair (all labels but the last, last label); slices shorter
    than MIN_PREFIX + 1 contribute nothing that epoch.
    """
    spec.validate()
    augment.validate()
    seqs = _check_sequences(cluster_sequences, spec.n_clusters)
    if not any(s.size >= MIN_PREFIX + 1 for s in seqs):
        raise EmptyTrainingSet("no sequence long enough to form a "
                               "prefix/target pair")
    rng = _rng_for(seed, CRNN_SEED_PURPOSE)
    model = CrnnModel(spec, rng)
    opt = Adam(model.params(), model.grads(), lr=spec.lr)
    for epoch in range(spec.epochs):
        ep_rng = np.random.default_rng(
            np.random.SeedSequence((seed, CRNN_SEED_PURPOSE, epoch)))
        pairs = []
        for s in seqs:
            r = s
            if s.size >= augment.min_range and ep_rng.random() < augment.slice_prob:
                length = int(ep_rng.integers(augment.min_range, s.size + 1))
                start = int(ep_rng.integers(0, s.size - length + 1))
                r = s[start:start + length]
            if r.size >= MIN_PREFIX + 1:
                pairs.append(r)
        if augment.shuffle and pairs:
            pairs = [pairs[i] for i in ep_rng.permutation(len(pairs))]
        if not pairs:
            model.loss_trace.append(model.loss_trace[-1]
                                    if model.loss_trace else 0.0)
            continue
        total = 0.0
        for r in pairs:
            x = _one_hot(r[:-1], spec.n_clusters)[None]
            logits = model.logits(x, train=True)
            loss, g = cross_entropy_logits(logits, r[-1:])
            model.rnn.backward(model.head.backward(g))
            opt.step()
            opt.zero_grads()
            total += loss
        model.loss_trace.append(total / len(pairs))
    return model


def predict_crnn(model, prefix):
    """Distribution over the next cluster label given a label prefix."""
    prefix = np.asarray(prefix, dtype=np.int64)
    if prefix.ndim != 1:
        raise ShapeMismatch(f"prefix must be 1-D, got {prefix.shape}")
    if prefix.size < MIN_PREFIX:
        raise PrefixTooShort(f"need at least {MIN_PREFIX} labels, "
                             f"got {prefix.size}")
    n = model.spec.n_clusters
    if prefix.min() < 0 or prefix.max() >= n:
        raise ValidationError(f"cluster label out of range [0, {n})")
    logits = model.logits(_one_hot(prefix, n)[None], train=False)
    return softmax(logits, axis=1)[0]
