"""From raw boundaries to validated, normalized polar contours.

The processing chain per object mask: trace the outer boundary, check it
is closed and long enough, resample to a fixed point count by arc
length, convert to polar coordinates about the boundary's own mean
point, then scale radii per (video, class) so the largest same-class
object in the video has max radius exactly 1. Contours are finally
grouped into per-track time series; tracks of 5 or fewer contours are
discarded as too short to model.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePerimeter, EmptyMask, ParseError
from .manifest import MaskManifest, VideoEntry
from .tracing import trace_boundary

MAX_ENDPOINT_GAP = 3.0     # pixels between first and last traced point
MIN_TRACK_LEN = 6          # tracks with 5 or fewer contours are dropped


class BoundaryStatus(enum.Enum):
    VALID = "valid"
    OPEN_CONTOUR = "open-contour"
    TOO_FEW_POINTS = "too-few-points"


def validate_boundary(boundary, min_points: int) -> BoundaryStatus:
    """Closed-and-long-enough check for a traced boundary.

    Valid iff the Euclidean gap between the first and last traced points
    is at most 3 pixels and the point count reaches min_points (100 for
    shape-context use, 256 for radii use). The closure check wins when
    both fail.
    """
    pts = np.asarray(boundary, dtype=np.float64)
    gap = float(np.hypot(*(pts[0] - pts[-1])))
    if gap > MAX_ENDPOINT_GAP:
        return BoundaryStatus.OPEN_CONTOUR
    if len(pts) < min_points:
        return BoundaryStatus.TOO_FEW_POINTS
    return BoundaryStatus.VALID


def resample_uniform(boundary, n: int) -> np.ndarray:
    """Resample a closed polyline to n points equally spaced in arc length.

    The polyline is closed by an implicit last-to-first edge. Point 0
    coincides with the boundary's first point. Raises DegeneratePerimeter
    when the total perimeter is zero.
    """
    pts = np.asarray(boundary, dtype=np.float64).reshape(-1, 2)
    if len(pts) > 1:
        # drop consecutive duplicates, including the closing wrap pair
        same = (np.diff(pts[:, 0]) == 0) & (np.diff(pts[:, 1]) == 0)
        pts = pts[np.concatenate(([True], ~same))]
        while len(pts) > 1 and (pts[-1] == pts[0]).all():
            pts = pts[:-1]
    if len(pts) < 2:
        raise DegeneratePerimeter("zero-perimeter boundary")
    closed = np.vstack([pts, pts[:1]])
    seg = np.hypot(np.diff(closed[:, 0]), np.diff(closed[:, 1]))
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    total = cum[-1]
    targets = np.arange(n, dtype=np.float64) * (total / n)
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1,
                  0, len(seg) - 1)
    frac = (targets - cum[idx]) / seg[idx]
    return closed[idx] + frac[:, None] * (closed[idx + 1] - closed[idx])


def to_polar(points):
    """Polar form (r, theta, centroid) about the points' arithmetic mean.

    Angles use the mathematical convention (y up), so the image y axis is
    flipped; the range is [-pi, pi).
    """
    pts = np.asarray(points, dtype=np.float64)
    centroid = pts.mean(axis=0)
    dx = pts[:, 0] - centroid[0]
    dy = centroid[1] - pts[:, 1]
    r = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    theta[theta == np.pi] = -np.pi
    return r, theta, (float(centroid[0]), float(centroid[1]))


@dataclass(eq=False)
class Contour:
    video_id: str
    track_id: int
    class_id: int
    frame_index: int
    centroid: tuple
    r: np.ndarray
    theta: np.ndarray
    bbox: tuple | None = None

    @property
    def n_points(self) -> int:
        return len(self.r)


@dataclass
class SkippedContour:
    video_id: str
    frame_index: int
    track_id: int
    reason: BoundaryStatus


def normalize_video(contours) -> None:
    """Scale radii in place: per class, the video's max radius becomes 1."""
    by_class = {}
    for c in contours:
        by_class.setdefault(c.class_id, []).append(c)
    for group in by_class.values():
        scale = max(float(c.r.max()) for c in group)
        if scale > 0.0:
            for c in group:
                c.r = c.r / scale


def extract_video_contours(video: VideoEntry, n_points: int):
    """All valid, video-normalized contours of one video.

    Returns (contours, skipped) where skipped records each rejected
    object as a SkippedContour.
    """
    contours, skipped = [], []
    for frame in video.frames:
        for obj in frame.objects:
            try:
                boundary = trace_boundary(obj.decode(video.width,
                                                     video.height))
            except EmptyMask:
                skipped.append(SkippedContour(video.video_id,
                                              frame.frame_index,
                                              obj.track_id,
                                              BoundaryStatus.TOO_FEW_POINTS))
                continue
            status = validate_boundary(boundary, n_points)
            if status is not BoundaryStatus.VALID:
                skipped.append(SkippedContour(video.video_id,
                                              frame.frame_index,
                                              obj.track_id, status))
                continue
            sampled = resample_uniform(boundary, n_points)
            r, theta, centroid = to_polar(sampled)
            contours.append(Contour(video_id=video.video_id,
                                    track_id=obj.track_id,
                                    class_id=obj.class_id,
                                    frame_index=frame.frame_index,
                                    centroid=centroid, r=r, theta=theta,
                                    bbox=tuple(obj.bbox)))
    normalize_video(contours)
    return contours, skipped


def extract_contours(manifest: MaskManifest, n_points: int):
    """Extract and normalize contours for every video of a manifest."""
    contours, skipped = [], []
    for video in manifest.videos:
        c, s = extract_video_contours(video, n_points)
        contours.extend(c)
        skipped.extend(s)
    return contours, skipped


@dataclass
class TrackRecord:
    video_id: str
    track_id: int
    class_id: int
    contours: list
    frame_indices: list

    def __len__(self) -> int:
        return len(self.contours)

    @property
    def has_gaps(self) -> bool:
        d = np.diff(self.frame_indices)
        return bool((d > 1).any()) if d.size else False


def assemble_tracks(contours, min_len: int = MIN_TRACK_LEN):
    """Group contours into per-track time series, dropping short tracks.

    Contours are grouped by (video_id, track_id) and ordered by
    frame_index; groups shorter than min_len (default 6) are discarded.
    Frame gaps within a track are kept and visible via has_gaps.
    """
    groups = {}
    for c in contours:
        groups.setdefault((c.video_id, c.track_id), []).append(c)
    tracks = []
    for (video_id, track_id), group in sorted(groups.items()):
        group.sort(key=lambda c: c.frame_index)
        if len(group) < min_len:
            continue
        tracks.append(TrackRecord(video_id=video_id, track_id=track_id,
                                  class_id=group[0].class_id,
                                  contours=group,
                                  frame_indices=[c.frame_index
                                                 for c in group]))
    return tracks


def save_video_contours(video_id, contours, n_points, path) -> None:
    """Write one video's contours as a JSON store file."""
    doc = {
        "video_id": video_id,
        "n_points": int(n_points),
        "contours": [
            {
                "track_id": c.track_id,
                "class_id": c.class_id,
                "frame_index": c.frame_index,
                "centroid": [c.centroid[0], c.centroid[1]],
                "r": c.r.tolist(),
                "theta": c.theta.tolist(),
                "bbox": None if c.bbox is None else list(c.bbox),
            }
            for c in contours
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_video_contours(path):
    """Read a contour store file back into Contour objects."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        video_id = str(doc["video_id"])
        contours = [
            Contour(video_id=video_id,
                    track_id=int(e["track_id"]),
                    class_id=int(e["class_id"]),
                    frame_index=int(e["frame_index"]),
                    centroid=(float(e["centroid"][0]),
                              float(e["centroid"][1])),
                    r=np.asarray(e["r"], dtype=np.float64),
                    theta=np.asarray(e["theta"], dtype=np.float64),
                    bbox=None if e.get("bbox") is None
                    else tuple(int(v) for v in e["bbox"]))
            for e in doc["contours"]
        ]
    except (OSError, json.JSONDecodeError, KeyError, TypeError,
            ValueError) as exc:
        raise ParseError(f"bad contour store {path}: {exc!r}") from None
    return contours
