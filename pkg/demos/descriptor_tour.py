"""A tour of the two contour descriptors.

Builds one binary mask, traces its boundary, and walks through the
radii profile and the Shape Context histogram with their defining
properties: what is invariant, what is not, and how two shapes are
compared.

    python3 demos/descriptor_tour.py
"""

import numpy as np

from contour_vad.contours import Contour, to_polar
from contour_vad.descriptors import (
    chi2_distance,
    radii_descriptor,
    sc_to_vector,
    shape_context,
)
from contour_vad.tracing import trace_boundary
from contour_vad.contours import resample_uniform

# ---------------------------------------------------------------------
# Trace a mask. The boundary walk returns the outer contour only;
# interior holes never contribute points.
# ---------------------------------------------------------------------
yy, xx = np.mgrid[0:120, 0:120]
mask = ((xx - 60) ** 2 / 45.0 ** 2 + (yy - 60) ** 2 / 28.0 ** 2) <= 1.0
hole = ((xx - 60) ** 2 + (yy - 60) ** 2) <= 8.0 ** 2
boundary = trace_boundary(mask & ~hole)
print("boundary points traced: %d (hole ignored)" % len(boundary))

# ---------------------------------------------------------------------
# The radii profile: resample the boundary to 256 points, take each
# point's distance to the centroid, in traversal order. Translating
# the shape does not change it; scaling it scales it linearly, which
# per-video normalization later removes.
# ---------------------------------------------------------------------
pts = resample_uniform(boundary, 256)
r, theta, centroid = to_polar(pts)
contour = Contour(video_id="demo", track_id=0, class_id=0, frame_index=0,
                  centroid=centroid, r=r, theta=theta)
profile = radii_descriptor(contour)
print("radii profile: %d values, min %.1f max %.1f (the ellipse axes)"
      % (profile.size, profile.min(), profile.max()))

r2, _, _ = to_polar(pts + np.array([31.0, -17.0]))
print("max radii change under translation: %.2e" % np.abs(r - r2).max())

# ---------------------------------------------------------------------
# The Shape Context: for each of 100 boundary points, a 5x12 log-polar
# histogram of where the other 99 points fall, flattened to 60 bins.
# Bin edges scale with the shape's own mean point distance, so the
# descriptor ignores uniform scaling by construction.
# ---------------------------------------------------------------------
pts100 = resample_uniform(boundary, 100)
r100, th100, c100 = to_polar(pts100)
c = Contour(video_id="demo", track_id=0, class_id=0, frame_index=0,
            centroid=c100, r=r100, theta=th100)
hist = shape_context(c)
print("shape context: %s, every row sums to %d" %
      (hist.shape, int(hist[0].sum())))

big = Contour(video_id="demo", track_id=0, class_id=0, frame_index=0,
              centroid=c100, r=3.5 * r100, theta=th100)
print("chi2 distance to the 3.5x scaled copy: %.3g"
      % chi2_distance(sc_to_vector(hist), sc_to_vector(shape_context(big))))

# ---------------------------------------------------------------------
# chi-squared distance is the comparison metric between flattened
# histograms: zero for identical shapes, symmetric, and bounded below
# by zero. A genuinely different silhouette lands far away.
# ---------------------------------------------------------------------
spiky_r = r100 * (1.0 + 0.4 * np.cos(6.0 * th100))
spiky = Contour(video_id="demo", track_id=0, class_id=0, frame_index=0,
                centroid=c100, r=spiky_r, theta=th100)
d = chi2_distance(sc_to_vector(hist), sc_to_vector(shape_context(spiky)))
print("chi2 distance to a 6-spike star: %.1f" % d)
