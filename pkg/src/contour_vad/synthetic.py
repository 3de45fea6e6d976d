"""Synthetic desk-scale dataset generator.

Scenes contain "walkers": star-convex blobs (ellipse- or polygon-based)
that translate across a fixed 640x480 frame while their silhouette
deforms through an asymmetric periodic gait cycle. The gait is
quantized: every walker steps through the same grid of N_POSES phases,
one pose per frame, and body proportions come from a small set of
discrete type presets, so the normal shape vocabulary is a finite
archetype set and normal shape sequences are predictable cycles. A
limb-like protrusion swings around the body once per cycle, keeping
the pose-to-silhouette map one-to-one where the gait elongation alone
would fold mirrored poses onto each other.
Per-track size draws stay continuous, and apparent size is mildly
coupled to the vertical position (a flat perspective proxy), so
per-video normalization has real work to do. Objects are deliberately
large: the traced outer boundary of the smallest configuration stays
above 300 pixels, which keeps every contour valid for the 256-point
radii representation.

Anomalies are injected into the test split only, one anomalous track per
test video, as one contiguous window (or a set of short break events)
sized so the anomalous-frame count per video matches
``anomaly_fraction * frames_per_video`` up to block rounding:

- deformation: high-frequency radial wobble on top of the normal shape;
- novel-shape: the silhouette is swapped for a 6-spike star, a family
  never present in training;
- motion-break: the walker teleports and its gait cycle jumps to a
  distant pose and runs backwards for the labeled span; each break
  labels a 6-frame vicinity. Per-frame shapes stay in-distribution, so
  only sequence-aware models can see these.
- mixed: kinds are assigned to anomalous tracks in the fixed cycle
  (deformation, novel-shape, deformation, novel-shape, motion-break).
  Motion breaks are deliberately the rarest kind: they are invisible to
  per-frame shape models by construction, and an even split would let
  them dominate the error budget of the reconstruction models on small
  datasets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .manifest import (FrameEntry, GroundTruth, GtTrack, MaskManifest,
                       ObjectMask, VideoEntry, encode_rle, mask_bbox)

SCENE_W = 640
SCENE_H = 480
MARGIN = 175          # keeps the largest anomalous silhouette inside the frame
PERSPECTIVE = (0.85, 0.30)   # scale(y) = 0.85 + 0.30 * y / SCENE_H

SHAPE_FAMILIES = ("ellipse-walker", "polygon-walker")
ANOMALY_KINDS = ("deformation", "novel-shape", "motion-break", "mixed")
MIXED_KIND_CYCLE = ("deformation", "novel-shape", "deformation",
                    "novel-shape", "motion-break")

BREAK_SPAN = 6        # labeled frames per motion break
N_POSES = 16          # shared gait grid; one pose step per frame

# discrete body types: (aspect, gait_amp, tilt_amp, poly_amp, limb_amp).
# With the pose grid this makes the normal shape vocabulary a finite
# archetype set (types x poses), small enough that clustering recovers
# it whole
WALKER_TYPES = (
    (0.58, 0.14, 0.06, 0.085, 0.10),
    (0.74, 0.11, 0.11, 0.115, 0.13),
)


@dataclass
class SynthConfig:
    seed: int
    n_videos: int = 4
    frames_per_video: int = 40
    tracks_per_video: int = 2
    anomaly_fraction: float = 0.2
    shape_family: str = "ellipse-walker"
    anomaly_kind: str = "mixed"
    n_test_videos: int | None = None

    def validate(self) -> None:
        if self.n_videos < 1 or self.frames_per_video < 8 \
                or self.tracks_per_video < 1:
            raise ConfigError("n_videos/frames_per_video/tracks_per_video "
                              "must be positive (frames >= 8)")
        if not 0.0 <= self.anomaly_fraction <= 1.0:
            raise ConfigError("anomaly_fraction must lie in [0, 1]")
        if self.shape_family not in SHAPE_FAMILIES:
            raise ConfigError(f"unknown shape_family {self.shape_family!r}")
        if self.anomaly_kind not in ANOMALY_KINDS:
            raise ConfigError(f"unknown anomaly_kind {self.anomaly_kind!r}")
        if self.n_test_videos is not None and self.n_test_videos < 1:
            raise ConfigError("n_test_videos must be positive")

    @property
    def test_videos(self) -> int:
        if self.n_test_videos is not None:
            return self.n_test_videos
        return max(1, (2 * self.n_videos) // 5)


def _gait_wave(phase):
    # asymmetric periodic waveform: fast rise, slow fall, so that a
    # time-reversed cycle is distributionally different from a forward one
    return np.sin(phase + 0.55 * np.sin(phase))


def _silhouette_radius(theta, family, a, b, tilt, poly_amp):
    """Radius of the star-convex silhouette at polar angles theta."""
    t = theta - tilt
    r = a * b / np.sqrt((b * np.cos(t)) ** 2 + (a * np.sin(t)) ** 2)
    if family == "polygon-walker":
        r = r * (1.0 + poly_amp * np.cos(5.0 * t))
    return r


def _star_radius(theta, scale, tilt):
    # novel family: 6-spike star, never used for normal walkers
    return 0.72 * scale * (1.0 + 0.45 * np.cos(6.0 * (theta - tilt)))


class _Walker:
    """One track's kinematic and silhouette state.

    The gait is quantized to a shared grid of N_POSES phases, one step
    per frame, so a walker's shape sequence is a clean repeating cycle:
    sequence models can learn normal transitions, and a reversed or
    jumped cycle is a visible sequence anomaly.
    """

    def __init__(self, rng, family, frames):
        self.family = family
        self.frames = frames
        self.size = rng.uniform(95.0, 115.0)
        (self.aspect, self.gait_amp, self.tilt_amp,
         self.poly_amp, self.limb_amp) = \
            WALKER_TYPES[rng.integers(0, len(WALKER_TYPES))]
        self.pose = int(rng.integers(0, N_POSES))
        self.pose_dir = 1
        self.x = rng.uniform(MARGIN, SCENE_W - MARGIN)
        self.y = rng.uniform(MARGIN, SCENE_H - MARGIN)
        speed = rng.uniform(2.0, 4.0)
        heading = rng.uniform(0.0, 2.0 * np.pi)
        self.vx = speed * np.cos(heading)
        self.vy = 0.45 * speed * np.sin(heading)

    @property
    def phase(self):
        return self.pose * (2.0 * np.pi / N_POSES)

    def step(self):
        self.x += self.vx
        self.y += self.vy
        if not MARGIN <= self.x <= SCENE_W - MARGIN:
            self.vx = -self.vx
            self.x = np.clip(self.x, MARGIN, SCENE_W - MARGIN)
        if not MARGIN <= self.y <= SCENE_H - MARGIN:
            self.vy = -self.vy
            self.y = np.clip(self.y, MARGIN, SCENE_H - MARGIN)
        self.pose = (self.pose + self.pose_dir) % N_POSES

    def teleport(self, rng):
        # mirror vertically inside the walkable band, kick horizontally,
        # reverse the trajectory, and break the gait: jump to a distant
        # pose and run the cycle backwards until resume_gait()
        self.y = (SCENE_H - MARGIN) + MARGIN - self.y
        self.x = float(np.clip(self.x + rng.uniform(-120.0, 120.0),
                               MARGIN, SCENE_W - MARGIN))
        self.vx, self.vy = -self.vx, -self.vy
        self.pose = (self.pose + int(rng.integers(2, N_POSES - 1))) \
            % N_POSES
        self.pose_dir = -1

    def resume_gait(self):
        self.pose_dir = 1

    def silhouette(self, rng, deformed=False, novel=False):
        """Current silhouette as (center, radius_fn)."""
        scale = self.size * (PERSPECTIVE[0] + PERSPECTIVE[1] * self.y / SCENE_H)
        g = _gait_wave(self.phase)
        a = scale * (1.0 + self.gait_amp * g)
        b = scale * self.aspect * (1.0 - self.gait_amp * g)
        tilt = self.tilt_amp * np.sin(self.phase)
        if novel:
            star_tilt = tilt
            return (self.x, self.y), \
                lambda th: _star_radius(th, scale, star_tilt)
        # a protrusion that swings around the body once per gait cycle;
        # the gait's elongation alone is mirror-symmetric in the pose,
        # the limb angle is not, so every pose has a distinct silhouette
        limb, phase = self.limb_amp, self.phase
        base = lambda th: _silhouette_radius(th, self.family, a, b, tilt,
                                             self.poly_amp) \
            * (1.0 + limb * np.cos(3.0 * (th - phase)))
        if not deformed:
            return (self.x, self.y), base
        # high-frequency radial wobble, re-drawn each frame
        m = rng.integers(7, 10)
        psi = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(0.16, 0.22)
        return (self.x, self.y), \
            lambda th: base(th) * (1.0 + amp * np.cos(m * th - psi))


def _rasterize(center, radius_fn):
    """Fill the star-convex silhouette into a full-scene uint8 raster."""
    cx, cy = center
    rmax = MARGIN
    x0 = max(0, int(np.floor(cx - rmax)))
    x1 = min(SCENE_W, int(np.ceil(cx + rmax)) + 1)
    y0 = max(0, int(np.floor(cy - rmax)))
    y1 = min(SCENE_H, int(np.ceil(cy + rmax)) + 1)
    ys, xs = np.mgrid[y0:y1, x0:x1]
    dx = xs - cx
    dy = cy - ys            # image rows grow downwards; angles use y-up
    dist = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    patch = (dist <= radius_fn(theta))
    mask = np.zeros((SCENE_H, SCENE_W), dtype=np.uint8)
    mask[y0:y1, x0:x1] = patch
    return mask


@dataclass
class _AnomalyPlan:
    track_idx: int
    kind: str
    window: list        # sorted labeled frame indices
    breaks: list        # break frames (motion-break only)


def _plan_anomaly(rng, cfg, kind, frames):
    """Pick the labeled window for one anomalous track."""
    target = int(round(cfg.anomaly_fraction * frames))
    track_idx = int(rng.integers(0, cfg.tracks_per_video))
    if kind == "motion-break":
        span = min(BREAK_SPAN, max(3, target))
        n_breaks = max(1, int(round(target / BREAK_SPAN)))
        breaks, labeled = [], []
        lo = 4
        for _ in range(n_breaks):
            hi = frames - span - 2
            if lo > hi:
                break
            b = int(rng.integers(lo, hi + 1))
            breaks.append(b)
            labeled.extend(range(b - 1, b - 1 + span))
            lo = b + span + 6
        return _AnomalyPlan(track_idx, kind, sorted(set(labeled)), breaks)
    length = min(max(1, target), frames - 8)
    start = int(rng.integers(4, frames - length - 3))
    return _AnomalyPlan(track_idx, kind, list(range(start, start + length)), [])


def _synth_video(rng, cfg, video_id, plan=None):
    """Render one video; returns (VideoEntry, regions_per_frame)."""
    walkers = [_Walker(rng, cfg.shape_family, cfg.frames_per_video)
               for _ in range(cfg.tracks_per_video)]
    window = set(plan.window) if plan else set()
    breaks = set(plan.breaks) if plan else set()
    frames = []
    regions = {}
    for t in range(cfg.frames_per_video):
        objects = []
        for k, w in enumerate(walkers):
            anomalous_now = plan is not None and k == plan.track_idx \
                and t in window
            if plan is not None and k == plan.track_idx:
                if t in breaks:
                    w.teleport(rng)
                elif t not in window:
                    # the backwards gait run must not outlive the
                    # labeled span, or unlabeled frames stay anomalous
                    w.resume_gait()
            deformed = anomalous_now and plan.kind == "deformation"
            novel = anomalous_now and plan.kind == "novel-shape"
            center, radius_fn = w.silhouette(rng, deformed=deformed,
                                             novel=novel)
            mask = _rasterize(center, radius_fn)
            bbox = mask_bbox(mask)
            objects.append(ObjectMask(track_id=k, class_id=0, bbox=bbox,
                                      rle=encode_rle(mask)))
            if anomalous_now:
                regions.setdefault(t, []).append({"bbox": list(bbox)})
            w.step()
        frames.append(FrameEntry(frame_index=t, objects=objects))
    return VideoEntry(video_id=video_id, width=SCENE_W, height=SCENE_H,
                      frames=frames), regions


def generate_synthetic(cfg: SynthConfig):
    """Build (train manifest, test manifest, ground truth) from cfg.

    Deterministic given cfg.seed: two calls with equal configs produce
    equal manifests bit for bit. The train split contains no anomalies.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)

    train_videos = []
    for i in range(cfg.n_videos):
        video, _ = _synth_video(rng, cfg, f"train_{i:03d}")
        train_videos.append(video)

    test_videos = []
    frame_labels = {}
    regions = {}
    tracks = []
    anom_index = 0
    for i in range(cfg.test_videos):
        video_id = f"test_{i:03d}"
        plan = None
        if cfg.anomaly_fraction > 0.0:
            if cfg.anomaly_kind == "mixed":
                kind = MIXED_KIND_CYCLE[anom_index % len(MIXED_KIND_CYCLE)]
            else:
                kind = cfg.anomaly_kind
            plan = _plan_anomaly(rng, cfg, kind, cfg.frames_per_video)
            anom_index += 1
        video, vid_regions = _synth_video(rng, cfg, video_id, plan)
        test_videos.append(video)
        labels = [0] * cfg.frames_per_video
        for t in vid_regions:
            labels[t] = 1
        frame_labels[video_id] = labels
        if vid_regions:
            regions[video_id] = vid_regions
            frames_sorted = sorted(vid_regions)
            tracks.append(GtTrack(
                video_id=video_id,
                track_id=plan.track_idx,
                frames=frames_sorted,
                regions=[vid_regions[t][0] for t in frames_sorted]))

    gt = GroundTruth(frame_labels=frame_labels, regions=regions,
                     tracks=tracks)
    return MaskManifest(videos=train_videos), \
        MaskManifest(videos=test_videos), gt
