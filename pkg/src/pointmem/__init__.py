"""Multi-view pointmap reconstruction with a per-layer token memory."""

__version__ = "0.1.0"
