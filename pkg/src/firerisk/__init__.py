"""Fire-risk analytics: occurrence GAMs and consequence classifiers."""

__version__ = "0.1.0"
