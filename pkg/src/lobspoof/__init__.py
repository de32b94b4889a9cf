"""Order-book replay, rule-based spoofing labels and a GRU early-detection classifier."""

__version__ = "0.1.0"
