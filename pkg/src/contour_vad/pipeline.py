"""End-to-end orchestration: mask manifests in, metric reports out.

The pipeline runs a fixed stage graph

    synth -> extract -> describe -> cluster -> train -> score -> eval

where extract/describe run once per split (train, test) and
cluster/train/score/eval run per selected model where applicable. Every
stage writes its outputs into ``workdir/cache/<stage>-<key>`` where
``key`` is a content hash of the stage's inputs plus the configuration
slice it depends on; upstream keys are folded into downstream ones, so
editing one knob recomputes exactly the stages below it and a rerun
with nothing changed is all cache hits.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .contours import (MIN_TRACK_LEN, assemble_tracks, extract_video_contours,
                       load_video_contours, save_video_contours)
from .descriptors import (RADII_POINTS, SC_POINTS, load_descriptor_matrix,
                          save_descriptor_matrix, shape_context, track_image)
from .errors import (ConfigError, ParseError, TrackTooShort,
                     ValidationError)
from .manifest import (load_ground_truth, load_manifest, save_ground_truth,
                       save_manifest)
from .metrics import DEFAULT_IOU_MIN, DEFAULT_TRACK_ALPHA, evaluate_scores
from .models.autoencoders import (LaeSpec, TaeSpec, VaeSpec,
                                  prepare_track_images, score_ae, train_lae,
                                  train_tae, train_vae)
from .models.io import load_trained, save_trained
from .models.recurrent import (AugmentConfig, CrnnSpec, RrnnSpec, score_rrnn,
                               train_crnn, train_rrnn)
from .scoring import (DEFAULT_SIGMA, ObjectScoreSeries, assemble_timeline,
                      crnn_track_score, load_scores, normalize_scores,
                      save_scores)
from .shapecluster.cluster import (DEFAULT_DISCARD, DEFAULT_K, DEFAULT_SAMPLE,
                                   assign_clusters, build_shape_model,
                                   load_shape_model, save_shape_model)
from .shapecluster.svm import DEFAULT_C, DEFAULT_GAMMA, DEFAULT_NU
from .synthetic import SynthConfig, generate_synthetic

log = logging.getLogger("contour_vad.pipeline")

MODEL_NAMES = ("vae", "lae", "tae", "rrnn", "crnn")
DEFAULT_MODELS = ("tae", "rrnn", "crnn")
STAGES = ("synth", "extract", "describe", "cluster", "train", "score", "eval")


@dataclass(frozen=True)
class DataConfig:
    """Where the pipeline's inputs come from.

    Either ``synth`` describes a dataset to generate, or the two
    manifest paths (plus ``gt`` for evaluation) point at existing files.
    """

    train_manifest: str | None = None
    test_manifest: str | None = None
    gt: str | None = None
    synth: SynthConfig | None = None


@dataclass(frozen=True)
class DescriptorConfig:
    radii_points: int = RADII_POINTS
    sc_points: int = SC_POINTS
    min_track_len: int = MIN_TRACK_LEN


@dataclass(frozen=True)
class ClusterConfig:
    k: int = DEFAULT_K
    sample: int = DEFAULT_SAMPLE
    discard_threshold: float = DEFAULT_DISCARD
    svm_c: float = DEFAULT_C
    svm_gamma: float = DEFAULT_GAMMA
    ocsvm_nu: float = DEFAULT_NU
    cv_folds: int = 0


@dataclass(frozen=True)
class ScoringConfig:
    sigma: float = DEFAULT_SIGMA
    normalization: str = "per-video-minmax"


@dataclass(frozen=True)
class MetricConfig:
    iou_min: float = DEFAULT_IOU_MIN
    track_alpha: float = DEFAULT_TRACK_ALPHA
    frame_mask: str | None = None


@dataclass(frozen=True)
class CrnnParams:
    """Classifier hyperparameters minus n_clusters, which the cluster
    stage decides."""

    hidden: int = 8
    epochs: int = 200
    lr: float = 1e-3
    slice_prob: float = 0.8
    min_range: int = 3
    shuffle: bool = True

    def spec_for(self, n_clusters: int) -> CrnnSpec:
        return CrnnSpec(n_clusters=n_clusters, hidden=self.hidden,
                        epochs=self.epochs, lr=self.lr)

    def augment(self) -> AugmentConfig:
        return AugmentConfig(slice_prob=self.slice_prob,
                             min_range=self.min_range, shuffle=self.shuffle)


@dataclass(frozen=True)
class PipelineConfig:
    """Full pipeline configuration; one JSON file round-trips to this."""

    workdir: str
    data: DataConfig = field(default_factory=DataConfig)
    models: tuple = DEFAULT_MODELS
    vae: VaeSpec = field(default_factory=VaeSpec)
    lae: LaeSpec = field(default_factory=LaeSpec)
    tae: TaeSpec = field(default_factory=TaeSpec)
    rrnn: RrnnSpec = field(default_factory=RrnnSpec)
    crnn: CrnnParams = field(default_factory=CrnnParams)
    descriptors: DescriptorConfig = field(default_factory=DescriptorConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    seed: int = 0
    jobs: int = 1


def validate_config(cfg: PipelineConfig, through: str = "eval") -> None:
    """Reject a bad configuration before any stage runs."""
    if through not in STAGES:
        raise ConfigError(f"unknown stage {through!r}")
    if not cfg.workdir:
        raise ConfigError("workdir must be a non-empty path")
    if not cfg.models:
        raise ConfigError("select at least one model")
    for m in cfg.models:
        if m not in MODEL_NAMES:
            raise ConfigError(f"unknown model name {m!r}; "
                              f"choose from {MODEL_NAMES}")
    if len(set(cfg.models)) != len(cfg.models):
        raise ConfigError("duplicate model names in selection")
    cfg.vae.validate()
    cfg.lae.validate()
    cfg.tae.validate()
    cfg.rrnn.validate()
    cfg.crnn.spec_for(2).validate()
    cfg.crnn.augment().validate()
    d = cfg.descriptors
    if d.radii_points < 3 or d.sc_points < 3:
        raise ConfigError("contours need at least 3 sample points")
    if d.min_track_len < 1:
        raise ConfigError("min_track_len must be >= 1")
    c = cfg.cluster
    if c.k < 2:
        raise ConfigError("cluster k must be >= 2")
    if c.sample < c.k:
        raise ConfigError("cluster sample size must be >= k")
    if not 0.0 <= c.discard_threshold < 1.0:
        raise ConfigError("discard_threshold must be in [0, 1)")
    if c.svm_c <= 0 or c.svm_gamma <= 0:
        raise ConfigError("svm_c and svm_gamma must be positive")
    if not 0.0 < c.ocsvm_nu <= 1.0:
        raise ConfigError("ocsvm_nu must be in (0, 1]")
    if c.cv_folds != 0 and c.cv_folds < 2:
        raise ConfigError("cv_folds must be 0 (off) or >= 2")
    if cfg.scoring.sigma <= 0:
        raise ConfigError("smoothing sigma must be positive")
    if cfg.scoring.normalization not in ("per-video-minmax",
                                         "global-minmax", "none"):
        raise ConfigError(
            f"unknown normalization {cfg.scoring.normalization!r}")
    mt = cfg.metrics
    if not 0.0 < mt.iou_min <= 1.0:
        raise ConfigError("iou_min must be in (0, 1]")
    if not 0.0 < mt.track_alpha <= 1.0:
        raise ConfigError("track_alpha must be in (0, 1]")
    if cfg.seed < 0:
        raise ConfigError("seed must be >= 0")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if cfg.data.synth is not None:
        cfg.data.synth.validate()
    else:
        if through == "synth":
            raise ConfigError("synth stage requested but the config has "
                              "no data.synth section")
        need_data = STAGES.index(through) >= STAGES.index("extract")
        if need_data and not (cfg.data.train_manifest
                              and cfg.data.test_manifest):
            raise ConfigError("data needs either a synth section or both "
                              "train_manifest and test_manifest")
        if through == "eval" and not cfg.data.gt:
            raise ConfigError("evaluation needs data.gt (or a synth "
                              "section, which generates it)")


# ---------------------------------------------------------------------------
# configuration <-> JSON

def _spec_from_obj(cls, obj, where, tuple_fields=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    kw = dict(obj)
    for name in tuple_fields:
        if name in kw:
            kw[name] = tuple(kw[name])
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"bad {where}: {exc}") from None


def _resolve(base: Path | None, value):
    if value is None or base is None:
        return value
    return str((base / value).resolve()) if not Path(value).is_absolute() \
        else value


def config_from_obj(obj, base: Path | None = None) -> PipelineConfig:
    """Build a PipelineConfig from a parsed JSON document.

    Relative paths are resolved against ``base`` when given (the config
    file's directory).
    """
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    known = {"workdir", "data", "models", "model_params", "descriptors",
             "cluster", "scoring", "metrics", "seed", "jobs"}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    if "workdir" not in obj:
        raise ConfigError("config needs a workdir")

    data_obj = dict(obj.get("data", {}))
    synth = None
    if data_obj.get("synth") is not None:
        synth = _spec_from_obj(SynthConfig, data_obj["synth"], "data.synth")
    data_obj.pop("synth", None)
    data = _spec_from_obj(DataConfig, {**data_obj, "synth": None}, "data")
    data = dataclasses.replace(
        data,
        train_manifest=_resolve(base, data.train_manifest),
        test_manifest=_resolve(base, data.test_manifest),
        gt=_resolve(base, data.gt),
        synth=synth)

    params = obj.get("model_params", {})
    if not isinstance(params, dict):
        raise ConfigError("model_params must be an object")
    unknown = set(params) - set(MODEL_NAMES)
    if unknown:
        raise ConfigError(f"model_params for unknown models: "
                          f"{sorted(unknown)}")
    metrics = _spec_from_obj(MetricConfig, obj.get("metrics", {}), "metrics")
    metrics = dataclasses.replace(
        metrics, frame_mask=_resolve(base, metrics.frame_mask))

    models = obj.get("models", list(DEFAULT_MODELS))
    if not isinstance(models, (list, tuple)):
        raise ConfigError("models must be a list of model names")

    return PipelineConfig(
        workdir=_resolve(base, str(obj["workdir"])),
        data=data,
        models=tuple(models),
        vae=_spec_from_obj(VaeSpec, params.get("vae", {}),
                           "model_params.vae", ("channels",)),
        lae=_spec_from_obj(LaeSpec, params.get("lae", {}),
                           "model_params.lae", ("widths",)),
        tae=_spec_from_obj(TaeSpec, params.get("tae", {}),
                           "model_params.tae", ("widths",)),
        rrnn=_spec_from_obj(RrnnSpec, params.get("rrnn", {}),
                            "model_params.rrnn"),
        crnn=_spec_from_obj(CrnnParams, params.get("crnn", {}),
                            "model_params.crnn"),
        descriptors=_spec_from_obj(DescriptorConfig,
                                   obj.get("descriptors", {}),
                                   "descriptors"),
        cluster=_spec_from_obj(ClusterConfig, obj.get("cluster", {}),
                               "cluster"),
        scoring=_spec_from_obj(ScoringConfig, obj.get("scoring", {}),
                               "scoring"),
        metrics=metrics,
        seed=int(obj.get("seed", 0)),
        jobs=int(obj.get("jobs", 1)),
    )


def config_to_obj(cfg: PipelineConfig) -> dict:
    """The JSON document form of a config, every knob spelled out."""
    data = {"train_manifest": cfg.data.train_manifest,
            "test_manifest": cfg.data.test_manifest,
            "gt": cfg.data.gt,
            "synth": None if cfg.data.synth is None
            else dataclasses.asdict(cfg.data.synth)}
    params = {"vae": dataclasses.asdict(cfg.vae),
              "lae": dataclasses.asdict(cfg.lae),
              "tae": dataclasses.asdict(cfg.tae),
              "rrnn": dataclasses.asdict(cfg.rrnn),
              "crnn": dataclasses.asdict(cfg.crnn)}
    for spec in params.values():
        for k, v in spec.items():
            if isinstance(v, tuple):
                spec[k] = list(v)
    return {"workdir": cfg.workdir,
            "data": data,
            "models": list(cfg.models),
            "model_params": params,
            "descriptors": dataclasses.asdict(cfg.descriptors),
            "cluster": dataclasses.asdict(cfg.cluster),
            "scoring": dataclasses.asdict(cfg.scoring),
            "metrics": dataclasses.asdict(cfg.metrics),
            "seed": cfg.seed,
            "jobs": cfg.jobs}


def load_config(path) -> PipelineConfig:
    """Read a JSON config file; relative paths resolve against it."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") \
            from None
    return config_from_obj(obj, base=path.parent)


def save_config(cfg: PipelineConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_obj(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# stage cache

def _digest_obj(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _digest_file(path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    except OSError as exc:
        raise ConfigError(f"cannot read input file {path}: {exc}") from None
    return h.hexdigest()[:16]


@dataclass
class StageResult:
    name: str
    status: str            # "computed" or "cached"
    key: str
    path: Path
    seconds: float


class _Cache:
    """Content-addressed stage directories under workdir/cache."""

    def __init__(self, workdir):
        self.root = Path(workdir) / "cache"

    def run(self, name: str, key: str, build):
        d = self.root / f"{name.replace(':', '-')}-{key}"
        marker = d / "ok"
        if marker.exists():
            log.info("stage %-12s cached    %s", name, d.name)
            return d, StageResult(name, "cached", key, d, 0.0)
        if d.exists():
            shutil.rmtree(d)   # leftover from an interrupted build
        d.mkdir(parents=True)
        t0 = time.perf_counter()
        try:
            build(d)
        except BaseException:
            shutil.rmtree(d, ignore_errors=True)
            raise
        marker.write_text(key, encoding="utf-8")
        dt = time.perf_counter() - t0
        log.info("stage %-12s computed  %s (%.1fs)", name, d.name, dt)
        return d, StageResult(name, "computed", key, d, dt)


# ---------------------------------------------------------------------------
# stage bodies

def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)


def _read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _build_synth(scfg: SynthConfig):
    def build(d: Path):
        train, test, gt = generate_synthetic(scfg)
        save_manifest(train, d / "train.json")
        save_manifest(test, d / "test.json")
        save_ground_truth(gt, d / "gt.json")
    return build


def _build_extract(manifest_path, dcfg: DescriptorConfig):
    def build(d: Path):
        manifest = load_manifest(manifest_path)
        counts = {v.video_id: v.frame_count for v in manifest.videos}
        skipped = {}
        for sub, points in (("radii", dcfg.radii_points),
                            ("sc", dcfg.sc_points)):
            (d / sub).mkdir()
            for video in manifest.videos:
                contours, skip = extract_video_contours(video, points)
                save_video_contours(video.video_id, contours, points,
                                    d / sub / f"{video.video_id}.json")
                skipped[f"{sub}/{video.video_id}"] = len(skip)
        _write_json(d / "summary.json",
                    {"frame_counts": counts, "skipped": skipped})
    return build


def _load_split_tracks(extract_dir: Path, sub: str, min_len: int):
    contours = []
    for p in sorted((extract_dir / sub).glob("*.json")):
        contours.extend(load_video_contours(p))
    return assemble_tracks(contours, min_len=min_len)


def _build_describe(extract_dir: Path, dcfg: DescriptorConfig):
    def build(d: Path):
        summary = _read_json(extract_dir / "summary.json")
        for sub, describe in (("radii", track_image),
                              ("sc", lambda t: np.stack(
                                  [shape_context(c).ravel()
                                   for c in t.contours]))):
            tracks = _load_split_tracks(extract_dir, sub, dcfg.min_track_len)
            index, mats, start = [], [], 0
            for t in tracks:
                mat = describe(t)
                index.append({
                    "video_id": t.video_id,
                    "track_id": t.track_id,
                    "class_id": t.class_id,
                    "frames": [int(f) for f in t.frame_indices],
                    "bboxes": [None if c.bbox is None else list(c.bbox)
                               for c in t.contours],
                    "start": start,
                })
                mats.append(mat)
                start += mat.shape[0]
            width = {"radii": dcfg.radii_points,
                     "sc": dcfg.sc_points * 60}[sub]
            full = np.vstack(mats) if mats else np.empty((0, width))
            save_descriptor_matrix(full, d / f"{sub}.bin")
            _write_json(d / f"{sub}_index.json", {"tracks": index,
                                                  "rows": start})
        _write_json(d / "summary.json",
                    {"frame_counts": summary["frame_counts"]})
    return build


def _load_described(describe_dir: Path, sub: str):
    """(rows float64, track index entries) for one representation."""
    rows = load_descriptor_matrix(describe_dir / f"{sub}.bin")
    index = _read_json(describe_dir / f"{sub}_index.json")["tracks"]
    return np.asarray(rows, dtype=np.float64), index


def _track_slices(index):
    for entry in index:
        s = entry["start"]
        yield entry, slice(s, s + len(entry["frames"]))


def _build_cluster(cfg: PipelineConfig, describe_dir: Path):
    def build(d: Path):
        X, _ = _load_described(describe_dir, "sc")
        c = cfg.cluster
        labels, model = build_shape_model(
            X, m=c.sample, k=c.k, threshold=c.discard_threshold,
            seed=cfg.seed, C=c.svm_c, gamma=c.svm_gamma, nu=c.ocsvm_nu,
            cv_folds=c.cv_folds)
        save_shape_model(model, d / "shape.bin")
        _write_json(d / "labels.json", {"labels": labels.tolist()})
        _write_json(d / "summary.json", {
            "n_clusters": int(model.n_clusters),
            "kept_cluster_ids": [int(i)
                                 for i in model.cluster.kept_cluster_ids],
            "tv_distance": model.cluster.tv_distance,
            "cv_accuracy": model.svm.cv_accuracy,
        })
    return build


def _build_train(cfg: PipelineConfig, name: str, describe_dir: Path,
                 cluster_dir: Path | None):
    def build(d: Path):
        if name in ("vae", "lae", "tae", "rrnn"):
            rows, index = _load_described(describe_dir, "radii")
            mats = [rows[sl] for _, sl in _track_slices(index)]
            if name == "vae":
                images = prepare_track_images(mats, side=cfg.vae.input_hw)
                model = train_vae(images, cfg.vae, seed=cfg.seed)
            elif name == "lae":
                images = prepare_track_images(mats, side=cfg.lae.input_hw)
                model = train_lae(images, cfg.lae, seed=cfg.seed)
            elif name == "tae":
                model = train_tae(rows, cfg.tae, seed=cfg.seed)
            else:
                model = train_rrnn(mats, cfg.rrnn, seed=cfg.seed)
        else:
            shape = load_shape_model(cluster_dir / "shape.bin")
            labels = np.asarray(_read_json(cluster_dir / "labels.json")
                                ["labels"], dtype=np.int64)
            _, index = _load_described(describe_dir, "sc")
            seqs = [labels[sl] for _, sl in _track_slices(index)]
            model = train_crnn(seqs, cfg.crnn.spec_for(shape.n_clusters),
                               augment=cfg.crnn.augment(), seed=cfg.seed)
        save_trained(model, d / "model.bin")
        _write_json(d / "summary.json",
                    {"final_loss": model.loss_trace[-1]
                     if model.loss_trace else None})
    return build


def _series_for_track(entry, scores) -> ObjectScoreSeries:
    regions = [None if b is None else tuple(b) for b in entry["bboxes"]]
    return ObjectScoreSeries(video_id=entry["video_id"],
                             track_id=entry["track_id"],
                             frame_indices=np.asarray(entry["frames"],
                                                      dtype=np.int64),
                             scores=np.asarray(scores, dtype=np.float64),
                             regions=regions)


def _build_score(cfg: PipelineConfig, name: str, train_dir: Path,
                 describe_dir: Path, extract_dir: Path,
                 cluster_dir: Path | None):
    def build(d: Path):
        model = load_trained(train_dir / "model.bin")
        frame_counts = _read_json(describe_dir / "summary.json")
        frame_counts = frame_counts["frame_counts"]
        by_video: dict[str, list[ObjectScoreSeries]] = \
            {vid: [] for vid in frame_counts}
        if name == "crnn":
            shape = load_shape_model(cluster_dir / "shape.bin")
            X, index = _load_described(describe_dir, "sc")
            labels = assign_clusters(shape, X)
            tracks = _load_split_tracks(extract_dir, "sc",
                                        cfg.descriptors.min_track_len)
            if len(tracks) != len(index):
                raise ValidationError(
                    "contour stores and descriptor index disagree on the "
                    "track list; clear the cache and rerun")
            for track, (entry, sl) in zip(tracks, _track_slices(index)):
                try:
                    series = crnn_track_score(track, labels[sl], X[sl],
                                              model, shape.ocsvm)
                except TrackTooShort:
                    continue
                by_video[series.video_id].append(series)
        else:
            rows, index = _load_described(describe_dir, "radii")
            for entry, sl in _track_slices(index):
                mat = rows[sl]
                try:
                    if name == "rrnn":
                        scores = score_rrnn(model, mat)
                    else:
                        scores = score_ae(model, mat)
                except TrackTooShort:
                    continue
                by_video[entry["video_id"]].append(
                    _series_for_track(entry, scores))
        vids = sorted(by_video)
        timelines = [assemble_timeline(vid, by_video[vid],
                                       int(frame_counts[vid]),
                                       sigma=cfg.scoring.sigma)
                     for vid in vids]
        timelines = normalize_scores(timelines, cfg.scoring.normalization)
        bundle = {t.video_id: (t, by_video[t.video_id]) for t in timelines}
        save_scores(d / "scores.json", bundle)
    return build


def load_frame_masks(path) -> dict:
    """JSON {video_id: [0/1 per frame]} -> boolean keep arrays."""
    try:
        obj = _read_json(path)
        if not isinstance(obj, dict):
            raise ValueError("top level must be an object")
        return {str(vid): np.asarray(flags, dtype=bool).ravel()
                for vid, flags in obj.items()}
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ParseError(f"bad frame mask file {path}: {exc!r}") from None


def _build_eval(cfg: PipelineConfig, score_dir: Path, gt_path):
    def build(d: Path):
        bundle = load_scores(score_dir / "scores.json")
        gt = load_ground_truth(gt_path)
        masks = None
        if cfg.metrics.frame_mask:
            masks = load_frame_masks(cfg.metrics.frame_mask)
        report = evaluate_scores(bundle, gt, iou_min=cfg.metrics.iou_min,
                                 alpha=cfg.metrics.track_alpha,
                                 frame_masks=masks)
        with open(d / "metrics.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return build


# ---------------------------------------------------------------------------
# the pipeline driver

@dataclass
class PipelineRun:
    """What a pipeline invocation produced and where it lives."""

    workdir: Path
    stages: list
    artifacts: dict
    metrics: dict | None = None


def run_pipeline(cfg: PipelineConfig, through: str = "eval") -> PipelineRun:
    """Execute the stage graph up to and including ``through``.

    Stages whose inputs and config slice are unchanged are reported as
    cache hits. Returns the per-model metric reports when evaluation
    ran.
    """
    validate_config(cfg, through)
    stop = STAGES.index(through)
    wd = Path(cfg.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    cache = _Cache(wd)
    stages: list[StageResult] = []
    artifacts: dict[str, Path] = {}

    if cfg.data.synth is not None:
        key = _digest_obj({"stage": "synth",
                           **dataclasses.asdict(cfg.data.synth)})
        sdir, res = cache.run("synth", key, _build_synth(cfg.data.synth))
        stages.append(res)
        train_path = sdir / "train.json"
        test_path = sdir / "test.json"
        gt_path = sdir / "gt.json"
        artifacts.update({"train_manifest": train_path,
                          "test_manifest": test_path, "gt": gt_path})
    else:
        train_path = Path(cfg.data.train_manifest) \
            if cfg.data.train_manifest else None
        test_path = Path(cfg.data.test_manifest) \
            if cfg.data.test_manifest else None
        gt_path = Path(cfg.data.gt) if cfg.data.gt else None
    if stop <= STAGES.index("synth"):
        return PipelineRun(wd, stages, artifacts)

    dcfg = cfg.descriptors
    extract_dirs, extract_keys = {}, {}
    describe_dirs, describe_keys = {}, {}
    for split, mpath in (("train", train_path), ("test", test_path)):
        key = _digest_obj({"stage": "extract",
                           "manifest": _digest_file(mpath),
                           "radii_points": dcfg.radii_points,
                           "sc_points": dcfg.sc_points})
        extract_dirs[split], res = cache.run(
            f"extract:{split}", key, _build_extract(mpath, dcfg))
        extract_keys[split] = key
        stages.append(res)
    if stop <= STAGES.index("extract"):
        return PipelineRun(wd, stages, artifacts)

    for split in ("train", "test"):
        key = _digest_obj({"stage": "describe",
                           "extract": extract_keys[split],
                           "min_track_len": dcfg.min_track_len})
        describe_dirs[split], res = cache.run(
            f"describe:{split}", key,
            _build_describe(extract_dirs[split], dcfg))
        describe_keys[split] = key
        stages.append(res)
    if stop <= STAGES.index("describe"):
        return PipelineRun(wd, stages, artifacts)

    cluster_dir = cluster_key = None
    need_cluster = "crnn" in cfg.models or through == "cluster"
    if need_cluster:
        cluster_key = _digest_obj({"stage": "cluster",
                                   "describe": describe_keys["train"],
                                   "cluster": dataclasses.asdict(cfg.cluster),
                                   "seed": cfg.seed})
        cluster_dir, res = cache.run(
            "cluster", cluster_key,
            _build_cluster(cfg, describe_dirs["train"]))
        stages.append(res)
        artifacts["shape_model"] = cluster_dir / "shape.bin"
    if stop <= STAGES.index("cluster"):
        return PipelineRun(wd, stages, artifacts)

    spec_by_model = {"vae": cfg.vae, "lae": cfg.lae, "tae": cfg.tae,
                     "rrnn": cfg.rrnn, "crnn": cfg.crnn}
    train_dirs, train_keys = {}, {}
    for name in cfg.models:
        parts = {"stage": "train", "model": name,
                 "spec": dataclasses.asdict(spec_by_model[name]),
                 "seed": cfg.seed,
                 "describe": describe_keys["train"]}
        if name == "crnn":
            parts["cluster"] = cluster_key
        key = _digest_obj(parts)
        train_dirs[name], res = cache.run(
            f"train:{name}", key,
            _build_train(cfg, name, describe_dirs["train"],
                         cluster_dir))
        train_keys[name] = key
        stages.append(res)
        artifacts[f"model:{name}"] = train_dirs[name] / "model.bin"
    if stop <= STAGES.index("train"):
        return PipelineRun(wd, stages, artifacts)

    score_dirs, score_keys = {}, {}
    for name in cfg.models:
        parts = {"stage": "score", "model": name,
                 "train": train_keys[name],
                 "describe": describe_keys["test"],
                 "scoring": dataclasses.asdict(cfg.scoring)}
        if name == "crnn":
            parts["cluster"] = cluster_key
        key = _digest_obj(parts)
        score_dirs[name], res = cache.run(
            f"score:{name}", key,
            _build_score(cfg, name, train_dirs[name],
                         describe_dirs["test"], extract_dirs["test"],
                         cluster_dir))
        score_keys[name] = key
        stages.append(res)
        src = score_dirs[name] / "scores.json"
        dst = wd / f"scores-{name}.json"
        shutil.copyfile(src, dst)
        artifacts[f"scores:{name}"] = dst
    if stop <= STAGES.index("score"):
        return PipelineRun(wd, stages, artifacts)

    mask_digest = None
    if cfg.metrics.frame_mask:
        mask_digest = _digest_file(cfg.metrics.frame_mask)
    metrics = {}
    for name in cfg.models:
        key = _digest_obj({"stage": "eval", "score": score_keys[name],
                           "gt": _digest_file(gt_path),
                           "iou_min": cfg.metrics.iou_min,
                           "track_alpha": cfg.metrics.track_alpha,
                           "frame_mask": mask_digest})
        edir, res = cache.run(
            f"eval:{name}", key,
            _build_eval(cfg, score_dirs[name], gt_path))
        stages.append(res)
        dst = wd / f"metrics-{name}.json"
        shutil.copyfile(edir / "metrics.json", dst)
        artifacts[f"metrics:{name}"] = dst
        metrics[name] = _read_json(edir / "metrics.json")

    report_path = wd / "report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump({"models": metrics}, fh, sort_keys=True, indent=2)
        fh.write("\n")
    artifacts["report"] = report_path
    return PipelineRun(wd, stages, artifacts, metrics=metrics)
