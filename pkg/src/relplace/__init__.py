"""relplace: learning where to put things from relation labels alone."""

__version__ = "0.1.0"
