"""Aspect sentiment rating with hierarchical clause and word selection policies."""

__version__ = "0.1.0"
