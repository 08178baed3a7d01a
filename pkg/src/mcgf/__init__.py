"""Training-free multi-criteria recommendation with polynomial graph filters."""

__version__ = "0.1.0"
