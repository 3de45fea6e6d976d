"""Per-frame anomaly timelines assembled from object-level evidence.

Model outputs arrive as per-track score series (higher = more
anomalous). Reconstruction and prediction errors pass straight
through; cluster-transition probabilities are flipped to 1 - p here.
Frames are scored by the worst object present, then smoothed along
time with a truncated Gaussian.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParseError, TrackTooShort, ValidationError
from .models import MIN_PREFIX, predict_crnn
from .shapecluster import novelty_proximity

DEFAULT_SIGMA = 5.0


@dataclass
class ObjectScoreSeries:
    """Anomaly scores of one tracked object, one entry per frame."""

    video_id: str
    track_id: int
    frame_indices: np.ndarray
    scores: np.ndarray
    regions: list

    def __post_init__(self):
        self.frame_indices = np.asarray(self.frame_indices, dtype=np.int64)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if not (self.frame_indices.shape[0] == self.scores.shape[0]
                == len(self.regions)):
            raise ValidationError(
                f"track {self.track_id}: frame, score and region counts "
                f"differ")
        if self.scores.size and self.scores.min() < 0.0:
            raise ValidationError(
                f"track {self.track_id}: negative anomaly score")


@dataclass
class ScoreTimeline:
    """Raw and smoothed per-frame scores of one video."""

    video_id: str
    raw: np.ndarray
    smoothed: np.ndarray
    sigma: float

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=np.float64)
        self.smoothed = np.asarray(self.smoothed, dtype=np.float64)
        if self.raw.shape != self.smoothed.shape:
            raise ValidationError(
                f"video {self.video_id}: raw and smoothed lengths differ")

    @property
    def frame_count(self):
        return self.raw.shape[0]


def series_from_track(track, scores) -> ObjectScoreSeries:
    """Wrap per-frame model errors for one track into a score series."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape[0] != len(track.contours):
        raise ValidationError(
            f"track {track.track_id}: {scores.shape[0]} scores for "
            f"{len(track.contours)} contours")
    return ObjectScoreSeries(video_id=track.video_id,
                             track_id=track.track_id,
                             frame_indices=np.asarray(track.frame_indices),
                             scores=scores,
                             regions=[c.bbox for c in track.contours])


def crnn_track_score(track, labels, descriptors, crnn,
                     ocsvm) -> ObjectScoreSeries:
    """Transition-probability anomaly scores for one labeled track.

    Each transition i in 1..N-1 scores 1 - p_i, where p_i multiplies
    the predictor's probability of the observed label by the novelty
    proximity of the contour at i; the score lands on the transition's
    target frame. The first two transitions have no usable prefix, so
    their predictor factor is 1 and only novelty speaks.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    if n < 2:
        raise TrackTooShort(
            f"track {track.track_id}: {n} labels, need at least 2")
    if len(track.contours) != n:
        raise ValidationError(
            f"track {track.track_id}: {n} labels for "
            f"{len(track.contours)} contours")
    descriptors = np.asarray(descriptors, dtype=np.float64)
    if descriptors.shape[0] != n:
        raise ValidationError(
            f"track {track.track_id}: {descriptors.shape[0]} descriptors "
            f"for {n} labels")
    prox = np.atleast_1d(novelty_proximity(ocsvm, descriptors[1:]))
    scores = np.empty(n - 1)
    for i in range(1, n):
        p = prox[i - 1]
        if i >= MIN_PREFIX:
            probs = predict_crnn(crnn, labels[:i])
            p = probs[int(labels[i])] * p
        scores[i - 1] = 1.0 - p
    return ObjectScoreSeries(video_id=track.video_id,
                             track_id=track.track_id,
                             frame_indices=np.asarray(
                                 track.frame_indices[1:]),
                             scores=scores,
                             regions=[c.bbox for c in track.contours[1:]])


def frame_aggregate(series, frame_count: int):
    """Per-frame raw scores: the max over objects present, 0 elsewhere."""
    raw = np.zeros(int(frame_count))
    vid = None
    for s in series:
        if vid is None:
            vid = s.video_id
        elif s.video_id != vid:
            raise ValidationError(
                f"series from {s.video_id!r} mixed into {vid!r}")
        if s.frame_indices.size == 0:
            continue
        if s.frame_indices.min() < 0 or s.frame_indices.max() >= frame_count:
            raise ValidationError(
                f"track {s.track_id}: frame index outside 0..{frame_count}")
        np.maximum.at(raw, s.frame_indices, s.scores)
    return raw


def gaussian_smooth(raw, sigma: float = DEFAULT_SIGMA):
    """Convolve with a unit-mass Gaussian cut at 4 sigma.

    Ends are mirror-padded with the edge sample included, which keeps
    the total mass of any signal unchanged.
    """
    if sigma <= 0.0:
        raise ConfigError("sigma must be positive")
    raw = np.asarray(raw, dtype=np.float64)
    n = raw.shape[0]
    if n == 0:
        return raw.copy()
    radius = int(np.ceil(4.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    kernel /= kernel.sum()
    idx = np.mod(np.arange(-radius, n + radius), 2 * n)
    idx = np.where(idx >= n, 2 * n - 1 - idx, idx)
    return np.convolve(raw[idx], kernel, mode="valid")


def assemble_timeline(video_id, series, frame_count: int,
                      sigma: float = DEFAULT_SIGMA) -> ScoreTimeline:
    """Aggregate one video's object series and smooth the result."""
    for s in series:
        if s.video_id != video_id:
            raise ValidationError(
                f"series from {s.video_id!r} mixed into {video_id!r}")
    raw = frame_aggregate(series, frame_count)
    return ScoreTimeline(video_id=video_id, raw=raw,
                         smoothed=gaussian_smooth(raw, sigma), sigma=sigma)


NORMALIZE_MODES = ("per-video-minmax", "global-minmax", "none")


def _minmax(a, lo, hi):
    # constant signals carry no ranking information; map them to zero
    if hi - lo <= 0.0:
        return np.zeros_like(a)
    return (a - lo) / (hi - lo)


def normalize_scores(timelines, mode: str = "per-video-minmax"):
    """Rescale timelines into [0, 1]; raw and smoothed each use their
    own range. Returns new timelines, inputs untouched."""
    if mode not in NORMALIZE_MODES:
        raise ConfigError(f"unknown normalization mode {mode!r}")
    timelines = list(timelines)
    if mode == "none":
        return [ScoreTimeline(t.video_id, t.raw.copy(), t.smoothed.copy(),
                              t.sigma) for t in timelines]
    if mode == "per-video-minmax":
        return [ScoreTimeline(t.video_id,
                              _minmax(t.raw, t.raw.min(), t.raw.max()),
                              _minmax(t.smoothed, t.smoothed.min(),
                                      t.smoothed.max()),
                              t.sigma)
                for t in timelines]
    all_raw = np.concatenate([t.raw for t in timelines])
    all_smooth = np.concatenate([t.smoothed for t in timelines])
    rlo, rhi = all_raw.min(), all_raw.max()
    slo, shi = all_smooth.min(), all_smooth.max()
    return [ScoreTimeline(t.video_id, _minmax(t.raw, rlo, rhi),
                          _minmax(t.smoothed, slo, shi), t.sigma)
            for t in timelines]


def save_scores(path, bundle) -> None:
    """Write {video_id: (timeline, [series, ...])} as one JSON file."""
    doc = {}
    for vid, (timeline, series) in bundle.items():
        doc[vid] = {
            "raw": timeline.raw.tolist(),
            "smoothed": timeline.smoothed.tolist(),
            "sigma": timeline.sigma,
            "objects": [
                {
                    "track_id": int(s.track_id),
                    "frames": s.frame_indices.tolist(),
                    "scores": s.scores.tolist(),
                    "bboxes": [None if b is None else list(b)
                               for b in s.regions],
                }
                for s in series
            ],
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_scores(path):
    """Read a scores file back into {video_id: (timeline, [series])}."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        bundle = {}
        for vid, entry in doc.items():
            timeline = ScoreTimeline(
                video_id=vid,
                raw=np.asarray(entry["raw"], dtype=np.float64),
                smoothed=np.asarray(entry["smoothed"], dtype=np.float64),
                sigma=float(entry["sigma"]))
            series = [
                ObjectScoreSeries(
                    video_id=vid,
                    track_id=int(o["track_id"]),
                    frame_indices=np.asarray(o["frames"], dtype=np.int64),
                    scores=np.asarray(o["scores"], dtype=np.float64),
                    regions=[None if b is None else tuple(int(v) for v in b)
                             for b in o["bboxes"]])
                for o in entry["objects"]
            ]
            bundle[vid] = (timeline, series)
    except (OSError, json.JSONDecodeError, KeyError, TypeError,
            ValueError) as exc:
        raise ParseError(f"bad scores file {path}: {exc!r}") from None
    except ValidationError as exc:
        raise ParseError(f"bad scores file {path}: {exc}") from None
    return bundle
