import numpy as np
import pytest

from contour_vad.errors import ConfigError
from contour_vad.manifest import (ground_truth_to_obj, manifest_to_obj,
                                  validate_manifest)
from contour_vad.synthetic import SynthConfig, generate_synthetic

SMALL = dict(n_videos=2, frames_per_video=20, tracks_per_video=2,
             n_test_videos=2)


class TestSynthConfig:
    def test_bad_fraction(self):
        with pytest.raises(ConfigError):
            SynthConfig(seed=1, anomaly_fraction=1.5).validate()

    def test_bad_family(self):
        with pytest.raises(ConfigError):
            SynthConfig(seed=1, shape_family="cube").validate()

    def test_bad_kind(self):
        with pytest.raises(ConfigError):
            SynthConfig(seed=1, anomaly_kind="alien").validate()


class TestGenerate:
    def test_outputs_validate(self):
        cfg = SynthConfig(seed=5, anomaly_fraction=0.2, **SMALL)
        train, test, gt = generate_synthetic(cfg)
        validate_manifest(train)
        validate_manifest(test)
        assert len(train.videos) == 2
        assert len(test.videos) == 2
        for v in train.videos + test.videos:
            assert v.frame_count == 20
            for f in v.frames:
                assert len(f.objects) == 2

    def test_deterministic(self):
        cfg = SynthConfig(seed=11, anomaly_fraction=0.2, **SMALL)
        a = generate_synthetic(cfg)
        b = generate_synthetic(SynthConfig(seed=11, anomaly_fraction=0.2,
                                           **SMALL))
        assert manifest_to_obj(a[0]) == manifest_to_obj(b[0])
        assert manifest_to_obj(a[1]) == manifest_to_obj(b[1])
        assert ground_truth_to_obj(a[2]) == ground_truth_to_obj(b[2])

    def test_seed_changes_content(self):
        a = generate_synthetic(SynthConfig(seed=1, **SMALL))
        b = generate_synthetic(SynthConfig(seed=2, **SMALL))
        assert manifest_to_obj(a[0]) != manifest_to_obj(b[0])

    def test_zero_fraction_all_labels_zero(self):
        cfg = SynthConfig(seed=3, anomaly_fraction=0.0, **SMALL)
        _, test, gt = generate_synthetic(cfg)
        assert set(gt.frame_labels) == {v.video_id for v in test.videos}
        for labels in gt.frame_labels.values():
            assert sum(labels) == 0
        assert gt.regions == {}
        assert gt.tracks == []

    def test_fraction_bookkeeping(self):
        # 0.2 of 100 frames: 20 anomalous frames up to block rounding
        cfg = SynthConfig(seed=9, n_videos=1, frames_per_video=100,
                          tracks_per_video=1, anomaly_fraction=0.2,
                          n_test_videos=3, anomaly_kind="mixed")
        _, _, gt = generate_synthetic(cfg)
        for labels in gt.frame_labels.values():
            assert abs(sum(labels) - 20) <= 6

    def test_train_split_anomaly_free(self):
        cfg = SynthConfig(seed=7, anomaly_fraction=0.5, **SMALL)
        train, _, gt = generate_synthetic(cfg)
        train_ids = {v.video_id for v in train.videos}
        assert not (train_ids & set(gt.frame_labels))
        assert not (train_ids & set(gt.regions))

    def test_regions_imply_labels_and_carry_bboxes(self):
        cfg = SynthConfig(seed=13, anomaly_fraction=0.3, **SMALL)
        _, test, gt = generate_synthetic(cfg)
        assert gt.regions, "expected anomalies at fraction 0.3"
        for video_id, per_frame in gt.regions.items():
            video = test.video(video_id)
            for fi, regs in per_frame.items():
                assert gt.frame_labels[video_id][fi] == 1
                for reg in regs:
                    x, y, w, h = reg["bbox"]
                    assert 0 <= x and 0 <= y
                    assert x + w <= video.width and y + h <= video.height

    def test_gt_tracks_cover_labeled_frames(self):
        cfg = SynthConfig(seed=21, anomaly_fraction=0.25, **SMALL)
        _, _, gt = generate_synthetic(cfg)
        covered = {}
        for t in gt.tracks:
            assert len(t.frames) == len(t.regions)
            covered.setdefault(t.video_id, set()).update(t.frames)
        for video_id, labels in gt.frame_labels.items():
            labeled = {i for i, l in enumerate(labels) if l}
            assert covered.get(video_id, set()) == labeled

    def test_every_kind_appears_in_mixed(self):
        cfg = SynthConfig(seed=2, n_videos=1, frames_per_video=30,
                          tracks_per_video=1, anomaly_fraction=0.2,
                          n_test_videos=5, anomaly_kind="mixed")
        # 5 anomalous tracks walk the full kind cycle; all windows labeled
        _, _, gt = generate_synthetic(cfg)
        assert len(gt.tracks) == 5


class TestBoundaryBudget:
    def test_smallest_silhouette_boundary_long_enough(self):
        # every normal silhouette must trace to >= 256 boundary pixels;
        # probe many frames and count 8-connected boundary pixels directly
        cfg = SynthConfig(seed=17, n_videos=3, frames_per_video=30,
                          tracks_per_video=2, anomaly_fraction=0.0,
                          n_test_videos=1)
        train, _, _ = generate_synthetic(cfg)
        min_boundary = np.inf
        for v in train.videos:
            for f in v.frames:
                for o in f.objects:
                    mask = o.decode(v.width, v.height)
                    inner = mask[1:-1, 1:-1] \
                        & mask[:-2, 1:-1] & mask[2:, 1:-1] \
                        & mask[1:-1, :-2] & mask[1:-1, 2:]
                    boundary = int(mask.sum()) - int(inner.sum())
                    min_boundary = min(min_boundary, boundary)
        assert min_boundary >= 280
