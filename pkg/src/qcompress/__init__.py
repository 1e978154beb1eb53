"""One-shot quantum message compression, side-information variants and correlated sampling."""

__version__ = "0.1.0"
