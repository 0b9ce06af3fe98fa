"""Fire arrival time reconstruction from sparse satellite detections."""

__version__ = "0.1.0"
