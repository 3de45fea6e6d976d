"""Mask-manifest input contract: per-frame, per-object binary masks with
track and class identities, plus the ground-truth schema used for
evaluation.

A manifest is one JSON document::

    {"videos": [{"video_id": "...", "width": W, "height": H,
                 "frames": [{"frame_index": i,
                             "objects": [{"track_id": t, "class_id": c,
                                          "bbox": [x, y, w, h],
                                          "rle": "..."}]}]}]}

Masks are run-length encoded row-major as space-separated run lengths,
alternating zero/one runs and always starting with a zero run (which may
be "0"). Ground truth is a second JSON document, see load_ground_truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatch, ParseError, ValidationError

PERSON_CLASS = 0


def decode_rle(rle: str, width: int, height: int) -> np.ndarray:
    """Decode a run-length string into a (height, width) uint8 raster.

    Runs are row-major and alternate zero/one starting with zeros.
    Raises LengthMismatch when the runs do not sum to width*height.
    """
    try:
        runs = [int(tok) for tok in rle.split()] if rle.strip() else []
    except ValueError as exc:
        raise ParseError(f"bad RLE token: {exc}") from None
    if any(r < 0 for r in runs):
        raise ParseError("negative RLE run length")
    total = sum(runs)
    if total != width * height:
        raise LengthMismatch(
            f"RLE covers {total} pixels, raster has {width * height}")
    flat = np.zeros(width * height, dtype=np.uint8)
    pos = 0
    value = 0
    for run in runs:
        if value:
            flat[pos:pos + run] = 1
        pos += run
        value ^= 1
    return flat.reshape(height, width)


def encode_rle(mask: np.ndarray) -> str:
    """Encode a binary raster as the row-major RLE string format."""
    flat = np.asarray(mask, dtype=np.uint8).ravel()
    if flat.size == 0:
        return ""
    # change points between runs, always emit a leading zero-run
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [flat.size]))
    runs = (ends - starts).tolist()
    if flat[0] == 1:
        runs = [0] + runs
    return " ".join(str(r) for r in runs)


def mask_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Tight (x, y, w, h) bounds of the set pixels."""
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        raise ValidationError("bbox of empty mask")
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    return (x0, y0, x1 - x0 + 1, y1 - y0 + 1)


@dataclass
class ObjectMask:
    track_id: int
    class_id: int
    bbox: tuple[int, int, int, int]
    rle: str

    def decode(self, width: int, height: int) -> np.ndarray:
        return decode_rle(self.rle, width, height)


@dataclass
class FrameEntry:
    frame_index: int
    objects: list[ObjectMask] = field(default_factory=list)


@dataclass
class VideoEntry:
    video_id: str
    width: int
    height: int
    frames: list[FrameEntry] = field(default_factory=list)

    @property
    def frame_count(self) -> int:
        return len(self.frames)


@dataclass
class MaskManifest:
    videos: list[VideoEntry] = field(default_factory=list)

    def video(self, video_id: str) -> VideoEntry:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise KeyError(video_id)


def _validate_video(video: VideoEntry) -> None:
    prev = -1
    for frame in video.frames:
        if frame.frame_index <= prev:
            raise ValidationError(
                f"video {video.video_id}: frame_index {frame.frame_index} "
                f"not strictly increasing after {prev}")
        if not 0 <= frame.frame_index < len(video.frames):
            raise ValidationError(
                f"video {video.video_id}: frame_index {frame.frame_index} "
                f"outside [0, {len(video.frames)})")
        prev = frame.frame_index
        seen = set()
        for k, obj in enumerate(frame.objects):
            if obj.track_id in seen:
                raise ValidationError(
                    f"video {video.video_id} frame {frame.frame_index}: "
                    f"duplicate track_id {obj.track_id}")
            seen.add(obj.track_id)
            if obj.track_id < 0 or obj.class_id < 0:
                raise ValidationError(
                    f"video {video.video_id} frame {frame.frame_index} "
                    f"object {k}: negative track/class id")
            mask = decode_rle(obj.rle, video.width, video.height)
            if not mask.any():
                raise ValidationError(
                    f"video {video.video_id} frame {frame.frame_index} "
                    f"track {obj.track_id}: empty mask")
            if tuple(obj.bbox) != mask_bbox(mask):
                raise ValidationError(
                    f"video {video.video_id} frame {frame.frame_index} "
                    f"track {obj.track_id}: bbox {tuple(obj.bbox)} does not "
                    f"tightly bound the mask {mask_bbox(mask)}")


def validate_manifest(manifest: MaskManifest) -> None:
    seen = set()
    for video in manifest.videos:
        if video.video_id in seen:
            raise ValidationError(f"duplicate video_id {video.video_id}")
        seen.add(video.video_id)
        if video.width <= 0 or video.height <= 0:
            raise ValidationError(
                f"video {video.video_id}: non-positive resolution")
        _validate_video(video)


def _manifest_from_obj(doc) -> MaskManifest:
    try:
        videos = []
        for v in doc["videos"]:
            frames = []
            for f in v["frames"]:
                objects = [
                    ObjectMask(track_id=int(o["track_id"]),
                               class_id=int(o["class_id"]),
                               bbox=tuple(int(c) for c in o["bbox"]),
                               rle=str(o["rle"]))
                    for o in f["objects"]
                ]
                frames.append(FrameEntry(frame_index=int(f["frame_index"]),
                                         objects=objects))
            videos.append(VideoEntry(video_id=str(v["video_id"]),
                                     width=int(v["width"]),
                                     height=int(v["height"]),
                                     frames=frames))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"manifest schema violation: {exc!r}") from None
    return MaskManifest(videos=videos)


def load_manifest(path) -> MaskManifest:
    """Load and validate a manifest JSON file.

    Raises ParseError on malformed JSON/schema, ValidationError on
    invariant violations (with video/frame/object coordinates).
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot parse manifest {path}: {exc}") from None
    manifest = _manifest_from_obj(doc)
    validate_manifest(manifest)
    return manifest


def manifest_to_obj(manifest: MaskManifest) -> dict:
    return {
        "videos": [
            {
                "video_id": v.video_id,
                "width": v.width,
                "height": v.height,
                "frames": [
                    {
                        "frame_index": f.frame_index,
                        "objects": [
                            {
                                "track_id": o.track_id,
                                "class_id": o.class_id,
                                "bbox": list(o.bbox),
                                "rle": o.rle,
                            }
                            for o in f.objects
                        ],
                    }
                    for f in v.frames
                ],
            }
            for v in manifest.videos
        ]
    }


def save_manifest(manifest: MaskManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest_to_obj(manifest), fh, sort_keys=True)


@dataclass
class GtTrack:
    video_id: str
    track_id: int
    frames: list[int]
    regions: list  # one region dict per frame, {"bbox": [x,y,w,h]} or {"rle": ...}


@dataclass
class GroundTruth:
    frame_labels: dict  # video_id -> list of 0/1
    regions: dict       # video_id -> {frame_index: [region dict, ...]}
    tracks: list[GtTrack] = field(default_factory=list)


def validate_ground_truth(gt: GroundTruth) -> None:
    # a frame holding >= 1 region must be labeled anomalous
    for video_id, per_frame in gt.regions.items():
        labels = gt.frame_labels.get(video_id)
        if labels is None:
            raise ValidationError(f"regions for unlabeled video {video_id}")
        for frame_index, regs in per_frame.items():
            if regs and not labels[frame_index]:
                raise ValidationError(
                    f"video {video_id} frame {frame_index} has regions "
                    f"but frame_label 0")


def load_ground_truth(path) -> GroundTruth:
    """Load the ground-truth JSON document.

    Schema: {"frame_labels": {video_id: [0/1, ...]},
             "regions": {video_id: {frame_index: [region, ...]}},
             "tracks": [{"video_id", "track_id", "frames", "regions"}]}
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot parse ground truth {path}: {exc}") from None
    try:
        frame_labels = {str(k): [int(x) for x in v]
                        for k, v in doc["frame_labels"].items()}
        regions = {
            str(vid): {int(fi): list(regs) for fi, regs in per.items()}
            for vid, per in doc.get("regions", {}).items()
        }
        tracks = [
            GtTrack(video_id=str(t["video_id"]),
                    track_id=int(t.get("track_id", -1)),
                    frames=[int(f) for f in t["frames"]],
                    regions=list(t["regions"]))
            for t in doc.get("tracks", [])
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"ground-truth schema violation: {exc!r}") from None
    gt = GroundTruth(frame_labels=frame_labels, regions=regions, tracks=tracks)
    validate_ground_truth(gt)
    return gt


def ground_truth_to_obj(gt: GroundTruth) -> dict:
    return {
        "frame_labels": {k: list(map(int, v))
                         for k, v in gt.frame_labels.items()},
        "regions": {
            vid: {str(fi): regs for fi, regs in per.items()}
            for vid, per in gt.regions.items()
        },
        "tracks": [
            {"video_id": t.video_id, "track_id": t.track_id,
             "frames": t.frames, "regions": t.regions}
            for t in gt.tracks
        ],
    }


def save_ground_truth(gt: GroundTruth, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ground_truth_to_obj(gt), fh, sort_keys=True)
