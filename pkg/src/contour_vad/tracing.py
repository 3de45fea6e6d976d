"""Outer-boundary tracing on binary rasters.

Moore-neighbor tracing on the largest 4-connected component of the
mask. The traced stroke is 8-connected, runs clockwise in image
coordinates (y grows downwards) and starts at the topmost-then-leftmost
pixel of the component. Interior holes are never reached, so they are
excluded by construction.

Termination uses cycle detection on the (pixel, backtrack) walk state
rather than the textbook stop-at-start rule: for one-pixel-thin shapes
the walk re-enters the start with a backtrack that can never equal the
synthetic initial one, which would loop forever. The walk is
deterministic, so the first repeated state delimits the full boundary
circuit exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyMask

# 8-neighbor offsets (dx, dy) in clockwise screen order, y down
_RING = ((-1, 0), (-1, -1), (0, -1), (1, -1),
         (1, 0), (1, 1), (0, 1), (-1, 1))
_RING_INDEX = {off: i for i, off in enumerate(_RING)}


def _row_runs(mask):
    """Horizontal runs of set pixels as arrays (row, x0, x1_exclusive)."""
    h, w = mask.shape
    padded = np.zeros((h, w + 2), dtype=np.int8)
    padded[:, 1:-1] = mask
    d = np.diff(padded, axis=1)
    r0, c0 = np.nonzero(d == 1)
    r1, c1 = np.nonzero(d == -1)
    # np.nonzero is row-major, so starts and ends pair up in order
    return r0, c0, c1


def _largest_component(mask):
    """Mask restricted to its largest 4-connected component.

    Ties are broken in favor of the component encountered first in
    row-major order.
    """
    rows, x0, x1 = _row_runs(mask)
    n = rows.size
    if n == 0:
        raise EmptyMask("mask has no set pixels")
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    # merge vertically adjacent overlapping runs (4-connectivity)
    row_starts = np.searchsorted(rows, np.arange(mask.shape[0] + 1))
    for r in range(1, mask.shape[0]):
        a, b = row_starts[r - 1], row_starts[r]
        c = row_starts[r + 1]
        i, j = a, b
        while i < b and j < c:
            if x0[i] < x1[j] and x0[j] < x1[i]:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
            if x1[i] < x1[j]:
                i += 1
            else:
                j += 1

    roots = np.array([find(i) for i in range(n)])
    lengths = x1 - x0
    areas = np.bincount(roots, weights=lengths, minlength=n)
    best = int(np.argmax(areas))  # argmax keeps the earliest root on ties
    out = np.zeros_like(mask, dtype=np.uint8)
    for i in np.nonzero(roots == best)[0]:
        out[rows[i], x0[i]:x1[i]] = 1
    return out


def trace_boundary(mask) -> np.ndarray:
    """Trace the outer boundary of the largest 4-connected component.

    Returns an (N, 2) int array of (x, y) pixels, clockwise in image
    coordinates, starting at the topmost-then-leftmost component pixel.
    Raises EmptyMask when no pixel is set.
    """
    mask = np.asarray(mask)
    comp = _largest_component(mask)
    h, w = comp.shape
    grid = np.zeros((h + 2, w + 2), dtype=np.uint8)
    grid[1:-1, 1:-1] = comp

    ys, xs = np.nonzero(comp)          # row-major: first hit is the start
    s = (int(xs[0]) + 1, int(ys[0]) + 1)
    p, b = s, (s[0] - 1, s[1])         # west neighbor, unset by start choice

    seen = {}
    walk = []
    while (p, b) not in seen:
        seen[(p, b)] = len(walk)
        walk.append(p)
        i = _RING_INDEX[(b[0] - p[0], b[1] - p[1])]
        nxt = None
        for k in range(1, 9):
            dx, dy = _RING[(i + k) % 8]
            c = (p[0] + dx, p[1] + dy)
            if grid[c[1], c[0]]:
                nxt = c
                break
            b = c
        if nxt is None:                # isolated single pixel
            return np.array([s], dtype=np.int64) - 1
        p = nxt

    cycle = walk[seen[(p, b)]:]
    # the circuit visits every outer-boundary pixel, s included; rotate
    # so the deterministic start pixel comes first
    k = cycle.index(s)
    cycle = cycle[k:] + cycle[:k]
    return np.array(cycle, dtype=np.int64) - 1
