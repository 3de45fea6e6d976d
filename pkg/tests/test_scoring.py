"""Timeline assembly checks: transition scores, frame maxima,
smoothing and normalization.

Novelty is held constant through a hand-built one-class stub whose
decision value is exactly 1 (or exactly 0) on every test descriptor,
so closed-form score values can be asserted.
"""

import json

import numpy as np
import pytest

from contour_vad.contours import Contour, TrackRecord
from contour_vad.errors import (
    ConfigError,
    ParseError,
    TrackTooShort,
    ValidationError,
)
from contour_vad.models import CrnnSpec, predict_crnn, train_crnn
from contour_vad.scoring import (
    ObjectScoreSeries,
    ScoreTimeline,
    assemble_timeline,
    crnn_track_score,
    frame_aggregate,
    gaussian_smooth,
    load_scores,
    normalize_scores,
    save_scores,
    series_from_track,
)
from contour_vad.shapecluster import OcSvmModel

# one support vector equal to every test descriptor: decision f = 1
SV_ROW = np.full(6, 10.0)
# logistic of f/scale at f=1, scale=1
PROX_ONE = 1.0 / (1.0 + np.exp(-1.0))


def flat_ocsvm(rho=0.0, scale=1.0):
    return OcSvmModel(nu=0.1, gamma=1e-3, sv_x=SV_ROW[None].copy(),
                      alpha=np.array([1.0]), rho=rho, scale=scale,
                      train_fraction_inside=0.9)


def make_track(video_id, track_id, n, start=0):
    contours = [Contour(video_id=video_id, track_id=track_id, class_id=0,
                        frame_index=start + i, centroid=(0.0, 0.0),
                        r=np.ones(4), theta=np.linspace(-3.0, 3.0, 4),
                        bbox=(i, 2 * i, 5, 7))
                for i in range(n)]
    return TrackRecord(video_id=video_id, track_id=track_id, class_id=0,
                       contours=contours,
                       frame_indices=[c.frame_index for c in contours])


def cycle_model(epochs=200, seed=1):
    rng = np.random.default_rng(60)
    seqs = []
    for _ in range(12):
        start = int(rng.integers(0, 3))
        seqs.append((start + np.arange(15)) % 3)
    return train_crnn(seqs, CrnnSpec(n_clusters=3, epochs=epochs), seed=seed)


class TestObjectScoreSeries:
    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            ObjectScoreSeries("v", 0, [1, 2], [0.5], [None, None])
        with pytest.raises(ValidationError):
            ObjectScoreSeries("v", 0, [1, 2], [0.5, 0.5], [None])

    def test_negative_score_rejected(self):
        with pytest.raises(ValidationError):
            ObjectScoreSeries("v", 0, [1], [-0.1], [None])

    def test_arrays_coerced(self):
        s = ObjectScoreSeries("v", 3, [0, 1], [0.2, 0.4], [None, (1, 2, 3, 4)])
        assert s.frame_indices.dtype == np.int64
        assert s.scores.dtype == np.float64


class TestSeriesFromTrack:
    def test_wraps_track(self):
        track = make_track("v", 4, 5, start=10)
        s = series_from_track(track, np.arange(5) / 10.0)
        assert s.video_id == "v" and s.track_id == 4
        assert s.frame_indices.tolist() == [10, 11, 12, 13, 14]
        assert s.regions[2] == (2, 4, 5, 7)

    def test_wrong_length_rejected(self):
        with pytest.raises(ValidationError):
            series_from_track(make_track("v", 0, 5), np.ones(4))


class TestCrnnTrackScore:
    def test_short_track_novelty_only(self):
        # three frames: both transitions have prefixes below the
        # predictor minimum, so scores are exactly 1 - proximity
        model = cycle_model(epochs=5)
        track = make_track("v", 1, 3, start=20)
        desc = np.tile(SV_ROW, (3, 1))
        s = crnn_track_score(track, [0, 1, 2], desc, model, flat_ocsvm())
        assert s.frame_indices.tolist() == [21, 22]
        np.testing.assert_allclose(s.scores, 1.0 - PROX_ONE, atol=1e-12)
        assert len(s.regions) == 2

    def test_product_formula(self):
        model = cycle_model(epochs=5)
        labels = np.array([0, 1, 2, 0, 1, 2])
        track = make_track("v", 2, 6)
        desc = np.tile(SV_ROW, (6, 1))
        s = crnn_track_score(track, labels, desc, model, flat_ocsvm())
        want = np.empty(5)
        for i in range(1, 6):
            p = PROX_ONE
            if i >= 3:
                p *= predict_crnn(model, labels[:i])[labels[i]]
            want[i - 1] = 1.0 - p
        np.testing.assert_allclose(s.scores, want, atol=1e-12)

    def test_boundary_proximity_gives_half_floor(self):
        # rho = decision -> f = 0 -> proximity exactly 0.5; with the
        # predictor factor <= 1 every score sits at or above 0.5
        model = cycle_model(epochs=30)
        labels = np.array([0, 1, 2, 0, 1, 2, 0])
        track = make_track("v", 3, 7)
        desc = np.tile(SV_ROW, (7, 1))
        s = crnn_track_score(track, labels, desc, model, flat_ocsvm(rho=1.0))
        assert (s.scores >= 0.5 - 1e-12).all()
        np.testing.assert_allclose(s.scores[:2], 0.5, atol=1e-12)

    def test_learned_cycle_scores_low(self):
        # a sharp squash pushes proximity to 1, isolating the predictor:
        # a well-learned transition should score near 0
        model = cycle_model(epochs=200)
        labels = (np.arange(10)) % 3
        track = make_track("v", 4, 10)
        desc = np.tile(SV_ROW, (10, 1))
        s = crnn_track_score(track, labels, desc, model,
                             flat_ocsvm(scale=0.01))
        assert s.scores[2:].max() < 0.15

    def test_injected_label_peaks(self):
        model = cycle_model(epochs=200)
        labels = (np.arange(12)) % 3
        labels[7] = (labels[7] + 1) % 3
        track = make_track("v", 5, 12)
        desc = np.tile(SV_ROW, (12, 1))
        s = crnn_track_score(track, labels, desc, model,
                             flat_ocsvm(scale=0.01))
        peak = int(np.argmax(s.scores))
        assert s.frame_indices[peak] == track.frame_indices[7]

    def test_too_short(self):
        model = cycle_model(epochs=5)
        with pytest.raises(TrackTooShort):
            crnn_track_score(make_track("v", 6, 1), [0], SV_ROW[None],
                             model, flat_ocsvm())

    def test_mismatched_inputs(self):
        model = cycle_model(epochs=5)
        track = make_track("v", 7, 4)
        with pytest.raises(ValidationError):
            crnn_track_score(track, [0, 1, 2], np.tile(SV_ROW, (3, 1)),
                             model, flat_ocsvm())
        with pytest.raises(ValidationError):
            crnn_track_score(track, [0, 1, 2, 0], np.tile(SV_ROW, (3, 1)),
                             model, flat_ocsvm())


def series(vid, track_id, frames, scores, bbox=(0, 0, 2, 2)):
    return ObjectScoreSeries(vid, track_id, frames, scores,
                             [bbox] * len(frames))


class TestFrameAggregate:
    def test_single_object_passthrough(self):
        raw = frame_aggregate([series("v", 0, [2, 3, 4], [0.1, 0.7, 0.3])],
                              7)
        assert raw.tolist() == [0.0, 0.0, 0.1, 0.7, 0.3, 0.0, 0.0]

    def test_max_wins(self):
        raw = frame_aggregate([series("v", 0, [1], [0.2]),
                               series("v", 1, [1], [0.9])], 3)
        assert raw[1] == 0.9

    def test_below_max_object_irrelevant(self):
        a = [series("v", 0, [0, 1], [0.5, 0.8]),
             series("v", 1, [0, 1], [0.4, 0.2])]
        with_b = frame_aggregate(a, 2)
        without_b = frame_aggregate(a[:1], 2)
        assert (with_b == without_b).all()

    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        objs = [series("v", i, rng.choice(20, 6, replace=False),
                       rng.uniform(0, 1, 6)) for i in range(5)]
        a = frame_aggregate(objs, 20)
        b = frame_aggregate(objs[::-1], 20)
        assert (a == b).all()

    def test_monotone_in_object_scores(self):
        rng = np.random.default_rng(1)
        objs = [series("v", i, rng.choice(15, 5, replace=False),
                       rng.uniform(0, 1, 5)) for i in range(4)]
        base = frame_aggregate(objs, 15)
        bumped = [series("v", s.track_id, s.frame_indices,
                         np.minimum(s.scores + 0.3, 2.0))
                  if s.track_id == 2 else s for s in objs]
        assert (frame_aggregate(bumped, 15) >= base).all()

    def test_no_objects_is_zero(self):
        assert frame_aggregate([], 4).tolist() == [0.0] * 4

    def test_frame_out_of_range(self):
        with pytest.raises(ValidationError):
            frame_aggregate([series("v", 0, [5], [0.1])], 5)

    def test_mixed_videos_rejected(self):
        with pytest.raises(ValidationError):
            frame_aggregate([series("a", 0, [0], [0.1]),
                             series("b", 1, [0], [0.1])], 2)


class TestGaussianSmooth:
    def test_constant_unchanged(self):
        out = gaussian_smooth(np.full(40, 3.25), 5.0)
        np.testing.assert_allclose(out, 3.25, atol=1e-12)

    def test_impulse_matches_closed_form(self):
        raw = np.zeros(101)
        raw[50] = 1.0
        out = gaussian_smooth(raw, 5.0)
        d = np.arange(-20, 21)
        kernel = np.exp(-0.5 * (d / 5.0) ** 2)
        kernel /= kernel.sum()
        np.testing.assert_allclose(out[30:71], kernel, atol=1e-12)
        assert out[29] == 0.0 and out[71] == 0.0

    def test_truncation_radius_tracks_sigma(self):
        raw = np.zeros(41)
        raw[20] = 1.0
        out = gaussian_smooth(raw, 2.0)
        assert out[20 - 8] > 0.0 and out[20 + 8] > 0.0
        assert out[20 - 9] == 0.0 and out[20 + 9] == 0.0

    def test_mass_preserved(self):
        rng = np.random.default_rng(2)
        for n in (3, 10, 64, 257):
            raw = rng.uniform(0, 5, n)
            raw[0] = 4.0
            out = gaussian_smooth(raw, 5.0)
            assert abs(out.sum() - raw.sum()) < 1e-9

    def test_linear_superposition(self):
        a = np.zeros(60)
        b = np.zeros(60)
        a[25] = 1.0
        b[33] = 2.0
        both = gaussian_smooth(a + b, 5.0)
        np.testing.assert_allclose(
            both, gaussian_smooth(a, 5.0) + gaussian_smooth(b, 5.0),
            atol=1e-12)

    def test_shift_equivariant_interior(self):
        a = np.zeros(80)
        b = np.zeros(80)
        a[30] = 1.0
        b[41] = 1.0
        sa = gaussian_smooth(a, 5.0)
        sb = gaussian_smooth(b, 5.0)
        np.testing.assert_allclose(sa[10:51], sb[21:62], atol=1e-12)

    def test_tiny_signals(self):
        assert gaussian_smooth(np.array([2.0]), 5.0).tolist() == [2.0]
        out = gaussian_smooth(np.array([1.0, 3.0]), 5.0)
        assert out.shape == (2,)
        assert abs(out.sum() - 4.0) < 1e-9

    def test_bad_sigma(self):
        with pytest.raises(ConfigError):
            gaussian_smooth(np.ones(5), 0.0)


class TestAssembleTimeline:
    def test_parts_consistent(self):
        objs = [series("v", 0, [2, 3], [0.4, 0.8])]
        tl = assemble_timeline("v", objs, 10, sigma=3.0)
        assert tl.frame_count == 10
        assert (tl.raw == frame_aggregate(objs, 10)).all()
        np.testing.assert_allclose(tl.smoothed,
                                   gaussian_smooth(tl.raw, 3.0))
        assert tl.sigma == 3.0

    def test_video_mismatch(self):
        with pytest.raises(ValidationError):
            assemble_timeline("a", [series("b", 0, [0], [0.1])], 5)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            ScoreTimeline("v", np.zeros(4), np.zeros(5), 5.0)


def tl(vid, raw, sigma=5.0):
    raw = np.asarray(raw, dtype=np.float64)
    return ScoreTimeline(vid, raw, gaussian_smooth(raw, sigma), sigma)


class TestNormalizeScores:
    def test_affine_invariance_per_video(self):
        rng = np.random.default_rng(3)
        base = rng.uniform(0, 1, 30)
        a = normalize_scores([tl("v", base)])[0]
        b = normalize_scores([tl("v", 2.5 * base + 7.0)])[0]
        np.testing.assert_allclose(a.raw, b.raw, atol=1e-12)
        np.testing.assert_allclose(a.smoothed, b.smoothed, atol=1e-12)

    def test_unit_range_unchanged(self):
        raw = np.array([0.0, 0.25, 1.0, 0.5])
        out = normalize_scores([tl("v", raw)])[0]
        assert (out.raw == raw).all()

    def test_constant_maps_to_zero(self):
        out = normalize_scores([tl("v", np.full(8, 0.7))])[0]
        assert (out.raw == 0.0).all()
        assert (out.smoothed == 0.0).all()

    def test_argmax_preserved(self):
        rng = np.random.default_rng(4)
        raw = rng.uniform(0, 3, 50)
        t = tl("v", raw)
        out = normalize_scores([t])[0]
        assert np.argmax(out.raw) == np.argmax(t.raw)
        assert np.argmax(out.smoothed) == np.argmax(t.smoothed)

    def test_global_mode_shares_range(self):
        a = tl("a", np.array([0.0, 2.0]), sigma=0.1)
        b = tl("b", np.array([0.0, 4.0]), sigma=0.1)
        na, nb = normalize_scores([a, b], mode="global-minmax")
        assert na.raw.max() == pytest.approx(0.5)
        assert nb.raw.max() == pytest.approx(1.0)

    def test_none_mode_copies(self):
        t = tl("v", np.array([1.0, 2.0]))
        out = normalize_scores([t], mode="none")[0]
        assert (out.raw == t.raw).all()
        out.raw[0] = 99.0
        assert t.raw[0] == 1.0

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            normalize_scores([], mode="percentile")


class TestScoresStore:
    def _bundle(self):
        objs_v = [series("v", 0, [1, 2], [0.3, 0.6]),
                  ObjectScoreSeries("v", 1, [0], [0.2], [None])]
        objs_w = [series("w", 5, [0, 1, 2], [0.1, 0.9, 0.4])]
        return {
            "v": (tl("v", np.array([0.0, 0.3, 0.6, 0.0])), objs_v),
            "w": (tl("w", np.array([0.1, 0.9, 0.4])), objs_w),
        }

    def test_round_trip(self, tmp_path):
        path = tmp_path / "scores.json"
        bundle = self._bundle()
        save_scores(path, bundle)
        back = load_scores(path)
        assert sorted(back) == ["v", "w"]
        for vid in bundle:
            t0, s0 = bundle[vid]
            t1, s1 = back[vid]
            assert (t0.raw == t1.raw).all()
            np.testing.assert_allclose(t0.smoothed, t1.smoothed, atol=1e-15)
            assert t0.sigma == t1.sigma
            assert len(s0) == len(s1)
            for a, b in zip(s0, s1):
                assert a.track_id == b.track_id
                assert (a.frame_indices == b.frame_indices).all()
                assert (a.scores == b.scores).all()
                assert list(a.regions) == list(b.regions)

    def test_insertion_order_irrelevant(self, tmp_path):
        bundle = self._bundle()
        flipped = {k: bundle[k] for k in reversed(list(bundle))}
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        save_scores(p1, bundle)
        save_scores(p2, flipped)
        assert p1.read_bytes() == p2.read_bytes()

    def test_malformed_rejected(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("not json at all")
        with pytest.raises(ParseError):
            load_scores(p)
        p.write_text(json.dumps({"v": {"raw": [1.0]}}))
        with pytest.raises(ParseError):
            load_scores(p)
