"""Detection quality metrics: frame AUC plus region- and track-based
criteria.

The region/track criteria sweep strictly decreasing unique detection
scores; at each threshold the x axis counts false positives per frame,
capped at 1 with the curve extended rightward at its final height.
Frames can be excluded everywhere through an optional per-video
boolean keep-mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    NoGtRegions,
    NoGtTracks,
    SingleClassLabels,
    ValidationError,
)
from .manifest import decode_rle

DEFAULT_IOU_MIN = 0.1
DEFAULT_TRACK_ALPHA = 0.1

_trapezoid = getattr(np, "trapezoid", None)
if _trapezoid is None:
    _trapezoid = np.trapz


def bbox_iou(a, b) -> float:
    """Intersection over union of two (x, y, w, h) boxes."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = float(iw) * float(ih)
    union = float(aw) * ah + float(bw) * bh - inter
    if union <= 0:
        return 0.0
    return inter / union


def region_iou(bbox, region) -> float:
    """IoU of a detection box against one ground-truth region dict."""
    if "bbox" in region:
        return bbox_iou(bbox, region["bbox"])
    if "rle" in region:
        w = int(region["width"])
        h = int(region["height"])
        mask = decode_rle(region["rle"], w, h)
        x, y, bw, bh = (int(v) for v in bbox)
        x0, y0 = max(x, 0), max(y, 0)
        x1, y1 = min(x + bw, w), min(y + bh, h)
        inter = int(mask[y0:y1, x0:x1].sum()) if (x1 > x0 and y1 > y0) else 0
        union = bw * bh + int(mask.sum()) - inter
        return inter / union if union > 0 else 0.0
    raise ValidationError("ground-truth region carries neither bbox nor rle")


@dataclass
class RocCurve:
    """One ROC sweep: strictly decreasing thresholds with a leading
    (0, 0) point on the rate arrays."""

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float


def roc_curve(scores, labels) -> RocCurve:
    """Threshold sweep over scores; AUC by trapezoidal integration."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValidationError("scores and labels must be equal-length 1-D")
    pos = int(labels.sum())
    neg = labels.size - pos
    if pos == 0 or neg == 0:
        raise SingleClassLabels(
            f"{pos} positive / {neg} negative frames, AUC undefined")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    tpr = np.concatenate([[0.0], tp / pos])
    fpr = np.concatenate([[0.0], fp / neg])
    return RocCurve(thresholds=s[last], tpr=tpr, fpr=fpr,
                    auc=float(_trapezoid(tpr, fpr)))


def _masked(values, mask):
    if mask is None:
        return np.asarray(values)
    mask = np.asarray(mask, dtype=bool)
    values = np.asarray(values)
    if mask.shape != values.shape:
        raise ValidationError("frame mask length does not match video")
    return values[mask]


def _collect_frames(timelines, frame_labels, frame_masks):
    pairs = []
    for t in timelines:
        labels = frame_labels.get(t.video_id)
        if labels is None:
            raise ValidationError(f"no frame labels for {t.video_id!r}")
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape[0] != t.frame_count:
            raise ValidationError(
                f"{t.video_id!r}: {labels.shape[0]} labels for "
                f"{t.frame_count} frames")
        mask = None if frame_masks is None else frame_masks.get(t.video_id)
        pairs.append((t.video_id, _masked(t.smoothed, mask),
                      _masked(labels, mask)))
    return pairs


def frame_auc(timelines, frame_labels, concat: bool = True,
              frame_masks=None) -> float:
    """Frame-level ROC AUC over the smoothed timelines.

    concat=True pools every frame of every video into one sweep;
    concat=False averages the per-video AUCs, skipping videos whose
    labels are single-class.
    """
    pairs = _collect_frames(timelines, frame_labels, frame_masks)
    if concat:
        scores = np.concatenate([p[1] for p in pairs]) if pairs else \
            np.empty(0)
        labels = np.concatenate([p[2] for p in pairs]) if pairs else \
            np.empty(0, dtype=np.int64)
        return roc_curve(scores, labels).auc
    aucs = []
    for _, scores, labels in pairs:
        try:
            aucs.append(roc_curve(scores, labels).auc)
        except SingleClassLabels:
            continue
    if not aucs:
        raise SingleClassLabels("no video has both classes")
    return float(np.mean(aucs))


def per_video_auc(timelines, frame_labels, frame_masks=None) -> dict:
    """Per-video AUC; None where a video's labels are single-class."""
    out = {}
    for vid, scores, labels in _collect_frames(timelines, frame_labels,
                                               frame_masks):
        try:
            out[vid] = roc_curve(scores, labels).auc
        except SingleClassLabels:
            out[vid] = None
    return out


def detections_from_bundle(bundle) -> dict:
    """Flatten a scores bundle into per-video (frame, bbox, score) lists."""
    dets = {}
    for vid, (_, series) in bundle.items():
        out = []
        for s in series:
            for f, sc, b in zip(s.frame_indices, s.scores, s.regions):
                if b is None:
                    raise ValidationError(
                        f"track {s.track_id} in {vid!r} has no region "
                        f"at frame {int(f)}")
                out.append((int(f), tuple(b), float(sc)))
        dets[vid] = out
    return dets


def _keep_frame(frame_masks, vid, frame) -> bool:
    if frame_masks is None:
        return True
    mask = frame_masks.get(vid)
    if mask is None:
        return True
    return bool(np.asarray(mask, dtype=bool)[frame])


def _count_frames(frame_labels, frame_masks) -> int:
    total = 0
    for vid, labels in frame_labels.items():
        if frame_masks is not None and frame_masks.get(vid) is not None:
            total += int(np.asarray(frame_masks[vid], dtype=bool).sum())
        else:
            total += len(labels)
    return total


def _unit_area(xs, ys) -> float:
    """Area of a monotone curve over x in [0, 1], extending the last
    height rightward to 1 and truncating past it."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs[-1] <= 1.0:
        xs = np.append(xs, 1.0)
        ys = np.append(ys, ys[-1])
    else:
        k = int(np.searchsorted(xs, 1.0))
        x0, x1 = xs[k - 1], xs[k]
        y0, y1 = ys[k - 1], ys[k]
        yi = y1 if x1 <= x0 else y0 + (y1 - y0) * ((1.0 - x0) / (x1 - x0))
        xs = np.append(xs[:k], 1.0)
        ys = np.append(ys[:k], yi)
    return float(_trapezoid(ys, xs))


def _grouped_sweep(scored):
    """Yield groups of items sharing one score, scores strictly
    decreasing."""
    scored = sorted(scored, key=lambda e: -e[0])
    i = 0
    while i < len(scored):
        j = i
        while j < len(scored) and scored[j][0] == scored[i][0]:
            j += 1
        yield scored[i:j]
        i = j


def _validate_videos(detections, frame_labels):
    for vid in detections:
        if vid not in frame_labels:
            raise ValidationError(f"detections for unknown video {vid!r}")


def rbdc(detections, gt, iou_min: float = DEFAULT_IOU_MIN,
         frame_masks=None) -> float:
    """Region-based criterion: fraction of ground-truth regions hit
    versus false positives per frame, area over [0, 1]."""
    _validate_videos(detections, gt.frame_labels)
    total_regions = 0
    for vid, per_frame in gt.regions.items():
        for frame, regs in per_frame.items():
            if _keep_frame(frame_masks, vid, frame):
                total_regions += len(regs)
    if total_regions == 0:
        raise NoGtRegions("ground truth contains no regions")
    scored = []
    for vid, dets in detections.items():
        regions_here = gt.regions.get(vid, {})
        for frame, bbox, score in dets:
            if not _keep_frame(frame_masks, vid, frame):
                continue
            regs = regions_here.get(frame, [])
            matched = frozenset(
                (vid, frame, i) for i, r in enumerate(regs)
                if region_iou(bbox, r) >= iou_min)
            scored.append((score, matched))
    n_frames = _count_frames(gt.frame_labels, frame_masks)
    if n_frames == 0:
        raise ValidationError("frame mask excludes every frame")
    covered = set()
    false_pos = 0
    xs, ys = [0.0], [0.0]
    for group in _grouped_sweep(scored):
        for _, matched in group:
            if matched:
                covered.update(matched)
            else:
                false_pos += 1
        xs.append(false_pos / n_frames)
        ys.append(len(covered) / total_regions)
    return _unit_area(xs, ys)


def tbdc(detections, gt, iou_min: float = DEFAULT_IOU_MIN,
         alpha: float = DEFAULT_TRACK_ALPHA, frame_masks=None) -> float:
    """Track-based criterion: a ground-truth track counts once at
    least an alpha fraction of its regions are hit."""
    _validate_videos(detections, gt.frame_labels)
    # cell = one (track, frame) ground-truth region
    cells_by_pos = {}
    track_sizes = []
    for ti, track in enumerate(gt.tracks):
        if track.video_id not in gt.frame_labels:
            raise ValidationError(
                f"ground-truth track for unknown video {track.video_id!r}")
        if len(track.frames) != len(track.regions):
            raise ValidationError(
                f"track {track.track_id} in {track.video_id!r}: frame and "
                f"region counts differ")
        size = 0
        for frame, region in zip(track.frames, track.regions):
            if not _keep_frame(frame_masks, track.video_id, frame):
                continue
            cells_by_pos.setdefault((track.video_id, frame), []).append(
                (ti, size, region))
            size += 1
        track_sizes.append(size)
    n_tracks = sum(1 for s in track_sizes if s > 0)
    if n_tracks == 0:
        raise NoGtTracks("ground truth contains no evaluable tracks")
    scored = []
    for vid, dets in detections.items():
        for frame, bbox, score in dets:
            if not _keep_frame(frame_masks, vid, frame):
                continue
            cells = cells_by_pos.get((vid, frame), [])
            matched = frozenset(
                (ti, ci) for ti, ci, region in cells
                if region_iou(bbox, region) >= iou_min)
            scored.append((score, matched))
    n_frames = _count_frames(gt.frame_labels, frame_masks)
    if n_frames == 0:
        raise ValidationError("frame mask excludes every frame")
    covered = set()
    hit_counts = np.zeros(len(gt.tracks))
    false_pos = 0
    xs, ys = [0.0], [0.0]
    for group in _grouped_sweep(scored):
        for _, matched in group:
            if not matched:
                false_pos += 1
                continue
            for cell in matched:
                if cell not in covered:
                    covered.add(cell)
                    hit_counts[cell[0]] += 1
        detected = sum(
            1 for ti, size in enumerate(track_sizes)
            if size > 0 and hit_counts[ti] / size >= alpha)
        xs.append(false_pos / n_frames)
        ys.append(detected / n_tracks)
    return _unit_area(xs, ys)


def evaluate_scores(bundle, gt, iou_min: float = DEFAULT_IOU_MIN,
                    alpha: float = DEFAULT_TRACK_ALPHA,
                    frame_masks=None) -> dict:
    """The full metrics report for one scores bundle."""
    timelines = [timeline for timeline, _ in bundle.values()]
    dets = detections_from_bundle(bundle)
    return {
        "auc": frame_auc(timelines, gt.frame_labels,
                         frame_masks=frame_masks),
        "rbdc": rbdc(dets, gt, iou_min, frame_masks),
        "tbdc": tbdc(dets, gt, iou_min, alpha, frame_masks),
        "per_video_auc": per_video_auc(timelines, gt.frame_labels,
                                       frame_masks),
    }
