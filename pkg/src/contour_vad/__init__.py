"""Contour-based video anomaly detection on binary mask sequences."""

__version__ = "0.1.0"
