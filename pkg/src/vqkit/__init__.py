"""Voice-quality analysis and transformation toolkit."""

__version__ = "0.1.0"
