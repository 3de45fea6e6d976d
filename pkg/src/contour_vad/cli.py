"""Command line front end for the detection pipeline.

Every stage subcommand takes the same single JSON configuration file
and runs the pipeline up to that stage, reusing cached stage outputs;
``run`` goes all the way to metrics. ``synth`` can alternatively
generate a dataset from flags alone, and ``eval`` works directly on a
scores file plus ground truth without a config.

Exit codes: 0 on success, 2 on a validation problem (bad config, bad
flags, unreadable or malformed inputs), 3 on a runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import traceback
from pathlib import Path

from .errors import ConfigError, ContourVadError, ParseError, ValidationError
from .manifest import load_ground_truth, save_ground_truth, save_manifest
from .metrics import DEFAULT_IOU_MIN, DEFAULT_TRACK_ALPHA, evaluate_scores
from .pipeline import (load_config, load_frame_masks, run_pipeline)
from .scoring import load_scores
from .synthetic import ANOMALY_KINDS, SHAPE_FAMILIES, SynthConfig, \
    generate_synthetic

log = logging.getLogger("contour_vad.cli")

_STAGE_COMMANDS = ("synth", "extract", "describe", "cluster", "train",
                   "score", "run")


def _load_cli_config(args):
    if not args.config:
        raise ConfigError("this subcommand needs --config")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.jobs is not None:
        cfg = dataclasses.replace(cfg, jobs=args.jobs)
    return cfg


def _print_artifacts(run) -> None:
    for name in sorted(run.artifacts):
        print(f"{name}: {run.artifacts[name]}")


def _cmd_stage(args) -> int:
    through = "eval" if args.command == "run" else args.command
    cfg = _load_cli_config(args)
    run = run_pipeline(cfg, through=through)
    if run.metrics is not None:
        for name in cfg.models:
            r = run.metrics[name]
            print(f"{name:5s}  auc={r['auc']:.4f}  rbdc={r['rbdc']:.4f}  "
                  f"tbdc={r['tbdc']:.4f}")
    _print_artifacts(run)
    return 0


def _cmd_synth(args) -> int:
    if args.config:
        return _cmd_stage(args)
    if not args.out:
        raise ConfigError("synth needs --out (or --config)")
    cfg = SynthConfig(seed=args.seed if args.seed is not None else 0,
                      n_videos=args.videos,
                      frames_per_video=args.frames,
                      tracks_per_video=args.tracks,
                      anomaly_fraction=args.anomaly_fraction,
                      shape_family=args.family,
                      anomaly_kind=args.kind,
                      n_test_videos=args.test_videos)
    cfg.validate()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train, test, gt = generate_synthetic(cfg)
    save_manifest(train, out / "train.json")
    save_manifest(test, out / "test.json")
    save_ground_truth(gt, out / "gt.json")
    for name in ("train.json", "test.json", "gt.json"):
        print(out / name)
    return 0


def _cmd_eval(args) -> int:
    bundle = load_scores(args.scores)
    gt = load_ground_truth(args.gt)
    masks = load_frame_masks(args.frame_mask) if args.frame_mask else None
    report = evaluate_scores(bundle, gt, iou_min=args.iou_min,
                             alpha=args.alpha, frame_masks=masks)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"auc={report['auc']:.4f}  rbdc={report['rbdc']:.4f}  "
          f"tbdc={report['tbdc']:.4f}")
    print(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline configuration JSON file")
    common.add_argument("--seed", type=int, default=None,
                        help="override the config's master seed")
    common.add_argument("--jobs", type=int, default=None,
                        help="cap worker count (stages are currently "
                             "single-process)")

    p = argparse.ArgumentParser(
        prog="contour-vad",
        description="Contour-based video anomaly detection pipeline.")
    sub = p.add_subparsers(dest="command", required=True)

    synth = sub.add_parser(
        "synth", parents=[common],
        help="generate a synthetic mask dataset (config or flags)")
    synth.add_argument("--out", help="directory for train/test/gt JSON")
    synth.add_argument("--videos", type=int, default=4)
    synth.add_argument("--test-videos", type=int, default=None)
    synth.add_argument("--frames", type=int, default=40)
    synth.add_argument("--tracks", type=int, default=2)
    synth.add_argument("--anomaly-fraction", type=float, default=0.2)
    synth.add_argument("--kind", choices=ANOMALY_KINDS, default="mixed")
    synth.add_argument("--family", choices=SHAPE_FAMILIES,
                       default="ellipse-walker")
    synth.set_defaults(func=_cmd_synth)

    for name, blurb in (
            ("extract", "trace, resample and normalize contours"),
            ("describe", "compute radii and shape context descriptors"),
            ("cluster", "cluster training shapes and fit the classifier"),
            ("train", "train the selected models"),
            ("score", "score the test split per model"),
            ("run", "run the full pipeline through evaluation")):
        sp = sub.add_parser(name, parents=[common], help=blurb)
        sp.set_defaults(func=_cmd_stage)

    ev = sub.add_parser("eval", parents=[common],
                        help="evaluate a scores file against ground truth")
    ev.add_argument("--scores", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--frame-mask", default=None,
                    help="JSON {video_id: [0/1 per frame]}; 1 keeps the "
                         "frame in the evaluation")
    ev.add_argument("--iou-min", type=float, default=DEFAULT_IOU_MIN)
    ev.add_argument("--alpha", type=float, default=DEFAULT_TRACK_ALPHA)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=_cmd_eval)
    return p


def main(argv=None) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                            format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ContourVadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
