"""Figure generation over the lcrl metrics CSV schema (read-only consumer)."""

__version__ = "0.1.0"
