"""Temporal resizing between track images and the fixed 256-row form."""

from __future__ import annotations

import numpy as np

OUT_ROWS = 256


def resize_bilinear(m, out_h: int = OUT_ROWS):
    """Resize an (H, W) matrix to (out_h, W) along the temporal axis.

    Align-corners bilinear: output row j samples the input at position
    j * (H - 1) / (out_h - 1). Width is left untouched. H = 1 repeats
    the single row.
    """
    m = np.asarray(m)
    h = m.shape[0]
    if h == out_h:
        return m.copy()
    pos = np.arange(out_h, dtype=np.float64) * ((h - 1) / (out_h - 1))
    lo = np.floor(pos).astype(np.int64)
    lo = np.minimum(lo, h - 1)
    hi = np.minimum(lo + 1, h - 1)
    w = (pos - lo).astype(m.dtype if m.dtype.kind == "f" else np.float64)
    return (1.0 - w)[:, None] * m[lo] + w[:, None] * m[hi]


def rows_to_frames(row_values, n_frames: int):
    """Invert the temporal resize for per-row scores.

    Resized row j maps back to frame round(j * (H - 1) / 255); rows
    landing on the same frame are averaged. For H > 256 the uncovered
    frames take the value of the nearest covered frame.
    """
    row_values = np.asarray(row_values, dtype=np.float64)
    n_rows = row_values.shape[0]
    if n_frames == n_rows:
        return row_values.copy()
    target = np.round(np.arange(n_rows)
                      * ((n_frames - 1) / (n_rows - 1))).astype(np.int64)
    sums = np.bincount(target, weights=row_values, minlength=n_frames)
    counts = np.bincount(target, minlength=n_frames)
    covered = counts > 0
    out = np.empty(n_frames, dtype=np.float64)
    out[covered] = sums[covered] / counts[covered]
    if not covered.all():
        idx = np.nonzero(covered)[0]
        missing = np.nonzero(~covered)[0]
        nearest = idx[np.argmin(np.abs(missing[:, None] - idx[None, :]),
                                axis=1)]
        out[missing] = out[nearest]
    return out
