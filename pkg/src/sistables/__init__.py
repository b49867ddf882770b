"""Sequential importance sampling for multiway contingency tables."""

__version__ = "0.1.0"
