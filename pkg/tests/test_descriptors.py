import numpy as np
import pytest

from contour_vad.contours import Contour, resample_uniform, to_polar
from contour_vad.descriptors import (BinLayout, chi2_distance, chi2_pairwise,
                                     load_descriptor_matrix, radii_descriptor,
                                     save_descriptor_matrix, sc_to_vector,
                                     shape_context, track_image)
from contour_vad.errors import (NegativeEntry, ParseError, ShapeMismatch,
                                WrongPointCount)


def polar_contour(r, theta, track_id=0, frame_index=0):
    return Contour(video_id="v", track_id=track_id, class_id=0,
                   frame_index=frame_index, centroid=(0.0, 0.0),
                   r=np.asarray(r, dtype=np.float64),
                   theta=np.asarray(theta, dtype=np.float64))


def random_contour(rng, n):
    r = rng.uniform(0.2, 1.0, n)
    theta = np.sort(rng.uniform(-np.pi, np.pi, n))
    return polar_contour(r, theta)


class FakeTrack:
    def __init__(self, contours):
        self.contours = contours


class TestRadii:
    def test_circle_constant(self):
        c = polar_contour(np.full(256, 0.5),
                          np.linspace(-np.pi, np.pi, 256, endpoint=False))
        d = radii_descriptor(c)
        assert d.shape == (256,)
        np.testing.assert_array_equal(d, 0.5)

    def test_wrong_count(self):
        c = random_contour(np.random.default_rng(0), 100)
        with pytest.raises(WrongPointCount):
            radii_descriptor(c)

    def test_rotation_preserves_multiset(self):
        rng = np.random.default_rng(4)
        ang = np.sort(rng.uniform(0.0, 2.0 * np.pi, 12))
        rad = rng.uniform(5.0, 12.0, 12)
        poly = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        pts = resample_uniform(poly, 256)
        phi = 1.1
        rot = np.column_stack([
            pts[:, 0] * np.cos(phi) - pts[:, 1] * np.sin(phi),
            pts[:, 0] * np.sin(phi) + pts[:, 1] * np.cos(phi)])
        r1, t1, _ = to_polar(pts)
        r2, t2, _ = to_polar(rot)
        d1 = radii_descriptor(polar_contour(r1, t1))
        d2 = radii_descriptor(polar_contour(r2, t2))
        np.testing.assert_allclose(np.sort(d1), np.sort(d2), atol=1e-9)

    def test_returns_copy(self):
        c = random_contour(np.random.default_rng(1), 256)
        d = radii_descriptor(c)
        d[0] = -99.0
        assert c.r[0] != -99.0


class TestTrackImage:
    def test_identical_rows(self):
        c = polar_contour(np.full(256, 0.3),
                          np.linspace(-np.pi, np.pi, 256, endpoint=False))
        img = track_image(FakeTrack([c] * 6))
        assert img.shape == (6, 256)
        assert (img == img[0]).all()

    def test_rows_match_descriptors(self):
        rng = np.random.default_rng(7)
        contours = [random_contour(rng, 256) for _ in range(9)]
        img = track_image(FakeTrack(contours))
        assert img.shape == (9, 256)
        for i, c in enumerate(contours):
            np.testing.assert_array_equal(img[i], radii_descriptor(c))


def brute_force_shape_context(contour):
    """Direct bin arithmetic, plain Python loops."""
    x = contour.r * np.cos(contour.theta)
    y = contour.r * np.sin(contour.theta)
    n = len(x)
    dists = []
    for i in range(n):
        for j in range(n):
            if i != j:
                dists.append(np.hypot(x[j] - x[i], y[j] - y[i]))
    mean_d = float(np.mean(dists))
    edges = [0.125 * mean_d, 0.25 * mean_d, 0.5 * mean_d,
             1.0 * mean_d, 2.0 * mean_d]
    hist = np.zeros((n, 60), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = np.hypot(x[j] - x[i], y[j] - y[i])
            rb = 0
            for k, e in enumerate(edges):
                if d >= e:
                    rb = k
            ang = np.arctan2(y[j] - y[i], x[j] - x[i]) % (2.0 * np.pi)
            ab = min(int(ang / (np.pi / 6.0)), 11)
            hist[i, rb * 12 + ab] += 1
    return hist


class TestShapeContext:
    def test_row_sums_99(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            h = shape_context(random_contour(rng, 100))
            assert h.shape == (100, 60)
            np.testing.assert_array_equal(h.sum(axis=1), 99)
            assert (h >= 0).all()

    def test_matches_brute_force(self):
        rng = np.random.default_rng(23)
        for _ in range(3):
            c = random_contour(rng, 100)
            np.testing.assert_array_equal(shape_context(c),
                                          brute_force_shape_context(c))

    def test_clamping_catches_outliers(self):
        # one point far away and a tight pair: distances beyond the span
        # land in the end bins, nothing is lost
        rng = np.random.default_rng(2)
        r = rng.uniform(0.45, 0.55, 100)
        r[7] = 60.0          # far outlier: most distances to it clamp high
        theta = np.sort(rng.uniform(-np.pi, np.pi, 100))
        c = polar_contour(r, theta)
        h = shape_context(c)
        np.testing.assert_array_equal(h.sum(axis=1), 99)
        np.testing.assert_array_equal(h, brute_force_shape_context(c))

    def test_wrong_count(self):
        with pytest.raises(WrongPointCount):
            shape_context(random_contour(np.random.default_rng(0), 256))

    def test_deterministic(self):
        c = random_contour(np.random.default_rng(3), 100)
        np.testing.assert_array_equal(shape_context(c), shape_context(c))

    def test_explicit_layout_respected(self):
        c = random_contour(np.random.default_rng(5), 100)
        layout = BinLayout(radial_edges=np.array([0.1, 0.2, 0.4, 0.8, 1.6]))
        h1 = shape_context(c, layout)
        h2 = shape_context(c, layout)
        np.testing.assert_array_equal(h1, h2)
        np.testing.assert_array_equal(h1.sum(axis=1), 99)


class TestChi2:
    def test_identity(self):
        rng = np.random.default_rng(1)
        x = rng.random(60)
        assert chi2_distance(x, x) == 0.0

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a, b = rng.random(60), rng.random(60)
            assert chi2_distance(a, b) == chi2_distance(b, a)

    def test_disjoint_support_is_one(self):
        a = np.zeros(60)
        b = np.zeros(60)
        a[:30] = np.random.default_rng(3).random(30)
        b[30:] = np.random.default_rng(4).random(30)
        a /= a.sum()
        b /= b.sum()
        # direct summation: 0.5 * (sum a + sum b) over disjoint support
        direct = 0.5 * (a.sum() + b.sum())
        assert abs(chi2_distance(a, b) - direct) < 1e-15
        assert abs(chi2_distance(a, b) - 1.0) < 1e-12

    def test_identical_contours_distance_zero(self):
        c = random_contour(np.random.default_rng(6), 100)
        va = sc_to_vector(shape_context(c))
        vb = sc_to_vector(shape_context(c))
        assert chi2_distance(va, vb) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(NegativeEntry):
            chi2_distance(np.array([-0.1, 1.0]), np.array([0.5, 0.5]))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            chi2_distance(np.ones(5), np.ones(6))

    def test_pairwise_matches_scalar(self):
        rng = np.random.default_rng(9)
        A = rng.random((7, 40))
        B = rng.random((5, 40))
        M = chi2_pairwise(A, B, chunk=3)
        for i in range(7):
            for j in range(5):
                assert abs(M[i, j] - chi2_distance(A[i], B[j])) < 1e-12
        S = chi2_pairwise(A, chunk=2)
        assert np.allclose(S, S.T)
        assert np.allclose(np.diag(S), 0.0)


class TestDescriptorCache:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(12)
        m = rng.random((17, 23)).astype(np.float32)
        p = tmp_path / "d.bin"
        save_descriptor_matrix(m, p)
        back = load_descriptor_matrix(p)
        np.testing.assert_array_equal(back, m)
        assert back.dtype == np.float32

    def test_header_layout(self, tmp_path):
        p = tmp_path / "d.bin"
        save_descriptor_matrix(np.zeros((3, 5), dtype=np.float32), p)
        blob = p.read_bytes()
        assert blob[:8] == b"CVADDESC"
        assert blob[8:12] == (3).to_bytes(4, "little")
        assert blob[12:16] == (5).to_bytes(4, "little")
        assert len(blob) == 16 + 3 * 5 * 4

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "d.bin"
        p.write_bytes(b"NOTMAGIC" + bytes(8))
        with pytest.raises(ParseError):
            load_descriptor_matrix(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "d.bin"
        save_descriptor_matrix(np.zeros((4, 4), dtype=np.float32), p)
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(ParseError):
            load_descriptor_matrix(p)
