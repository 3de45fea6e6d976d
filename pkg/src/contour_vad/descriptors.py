"""Per-contour feature descriptors and the distance between them.

Two descriptors are derived from a polar contour:

- the radii descriptor: the 256 normalized radii in traversal order,
  a one-to-one encoding of the shape; per track these rows stack into an
  H x 256 "track image" whose y axis is time;
- the Shape Context descriptor: for each of 100 sampled points, a
  5 (log-radial) x 12 (angular) histogram of the 99 remaining points,
  stacked into a 100 x 60 count matrix (6000-vector when flat).

Shape Contexts are compared with the chi-squared histogram distance on
L1-normalized vectors, which makes disjoint-support descriptors exactly
distance 1 apart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DegeneratePerimeter, NegativeEntry, ParseError,
                     ShapeMismatch, WrongPointCount)

SC_POINTS = 100
RADII_POINTS = 256
N_RADIAL = 5
N_ANGULAR = 12
SC_TOTAL = SC_POINTS * (SC_POINTS - 1)    # L1 mass of one raw descriptor

# radial span in units of the contour's mean pairwise distance
RADIAL_SPAN = (0.125, 2.0)

DESC_MAGIC = b"CVADDESC"

# cap on elements per broadcast temporary in chi2_pairwise (~256 MB float64)
CHI2_CHUNK_BUDGET = 1 << 25


@dataclass
class BinLayout:
    radial_edges: np.ndarray      # 5 log-spaced edges, strictly increasing
    n_angular: int = N_ANGULAR

    @classmethod
    def for_mean_distance(cls, mean_distance: float) -> "BinLayout":
        if mean_distance <= 0.0:
            raise DegeneratePerimeter("mean pairwise distance is zero")
        edges = np.geomspace(RADIAL_SPAN[0], RADIAL_SPAN[1], N_RADIAL)
        return cls(radial_edges=edges * mean_distance)


def radii_descriptor(contour) -> np.ndarray:
    """The 256 normalized radii in boundary traversal order."""
    if contour.n_points != RADII_POINTS:
        raise WrongPointCount(
            f"radii descriptor needs {RADII_POINTS} points, "
            f"got {contour.n_points}")
    return np.asarray(contour.r, dtype=np.float64).copy()


def track_image(track) -> np.ndarray:
    """Stack a track's radii descriptors into an H x 256 matrix.

    Row t is the descriptor of the track's t-th contour; the vertical
    axis is time.
    """
    return np.stack([radii_descriptor(c) for c in track.contours])


def shape_context(contour, layout: BinLayout | None = None) -> np.ndarray:
    """100 x 60 Shape Context count matrix of a 100-point contour.

    Each point in turn is the origin; the other 99 points are binned by
    log-radial distance (5 bins spanning [0.125, 2] x the mean pairwise
    distance, out-of-span distances clamped into the end bins) and by
    angle from the positive x axis (12 uniform bins over [0, 2pi)).
    Every row therefore sums to exactly 99.
    """
    if contour.n_points != SC_POINTS:
        raise WrongPointCount(
            f"shape context needs {SC_POINTS} points, "
            f"got {contour.n_points}")
    r = np.asarray(contour.r, dtype=np.float64)
    theta = np.asarray(contour.theta, dtype=np.float64)
    x = r * np.cos(theta)
    y = r * np.sin(theta)
    dx = x[None, :] - x[:, None]      # [i, j]: origin i, target j
    dy = y[None, :] - y[:, None]
    dist = np.hypot(dx, dy)
    off = ~np.eye(SC_POINTS, dtype=bool)
    if layout is None:
        layout = BinLayout.for_mean_distance(float(dist[off].mean()))
    radial = np.clip(
        np.searchsorted(layout.radial_edges, dist, side="right") - 1,
        0, N_RADIAL - 1)
    ang = np.arctan2(dy, dx) % (2.0 * np.pi)
    angular = np.minimum((ang / (2.0 * np.pi / layout.n_angular)).astype(
        np.int64), layout.n_angular - 1)
    flat_bin = radial * layout.n_angular + angular
    hist = np.zeros((SC_POINTS, N_RADIAL * layout.n_angular), dtype=np.int64)
    for i in range(SC_POINTS):
        hist[i] = np.bincount(flat_bin[i][off[i]],
                              minlength=N_RADIAL * layout.n_angular)
    return hist


def sc_to_vector(hist: np.ndarray) -> np.ndarray:
    """Flatten a Shape Context to the L1-normalized 6000-vector."""
    return hist.reshape(-1).astype(np.float64) / SC_TOTAL


def chi2_distance(a, b) -> float:
    """Chi-squared histogram distance: half the sum of (a-b)^2/(a+b).

    Zero-mass bins contribute zero. On L1-normalized inputs the distance
    of disjoint-support histograms is exactly 1.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"chi2 on shapes {a.shape} vs {b.shape}")
    if (a < 0).any() or (b < 0).any():
        raise NegativeEntry("chi2 requires non-negative entries")
    num = (a - b) ** 2
    den = a + b
    mask = den > 0.0
    return float(0.5 * (num[mask] / den[mask]).sum())


def chi2_pairwise(A, B=None, chunk: int = 256) -> np.ndarray:
    """All chi-squared distances between rows of A and rows of B.

    Row-chunked so the (n, m, d) intermediate never materializes whole;
    ``chunk`` is an upper bound, shrunk further so each temporary stays
    within a fixed element budget even for wide descriptors.
    With B omitted, computes the symmetric self-distance matrix.
    """
    A = np.asarray(A, dtype=np.float64)
    sym = B is None
    B = A if sym else np.asarray(B, dtype=np.float64)
    if (A < 0).any() or (not sym and (B < 0).any()):
        raise NegativeEntry("chi2 requires non-negative entries")
    plane = max(1, B.shape[0] * (A.shape[1] if A.ndim == 2 else 1))
    chunk = max(1, min(chunk, CHI2_CHUNK_BUDGET // plane))
    out = np.empty((A.shape[0], B.shape[0]), dtype=np.float64)
    for lo in range(0, A.shape[0], chunk):
        hi = min(lo + chunk, A.shape[0])
        num = (A[lo:hi, None, :] - B[None, :, :]) ** 2
        den = A[lo:hi, None, :] + B[None, :, :]
        np.divide(num, den, out=num, where=den > 0.0)
        out[lo:hi] = 0.5 * num.sum(axis=2)
    return out


def save_descriptor_matrix(matrix, path) -> None:
    """Write a little-endian float32 matrix with the 16-byte header."""
    m = np.ascontiguousarray(matrix, dtype="<f4")
    if m.ndim != 2:
        raise ShapeMismatch("descriptor cache stores 2-D matrices")
    with open(path, "wb") as fh:
        fh.write(DESC_MAGIC)
        fh.write(np.array(m.shape, dtype="<u4").tobytes())
        fh.write(m.tobytes())


def load_descriptor_matrix(path) -> np.ndarray:
    """Read a descriptor cache file back as float32."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:8] != DESC_MAGIC:
        raise ParseError(f"bad descriptor cache header in {path}")
    rows = int(np.frombuffer(blob, dtype="<u4", count=1, offset=8)[0])
    cols = int(np.frombuffer(blob, dtype="<u4", count=1, offset=12)[0])
    data = np.frombuffer(blob, dtype="<f4", offset=16)
    if data.size != rows * cols:
        raise ParseError(
            f"descriptor cache {path}: payload {data.size} != "
            f"{rows}x{cols}")
    return data.reshape(rows, cols).copy()
