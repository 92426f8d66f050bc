"""Analytics for advertising in print newspapers."""

__version__ = "0.1.0"
