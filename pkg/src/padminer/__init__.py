"""Pattern-based anomaly detection for networks of multivariate time series."""

__version__ = "0.1.0"
