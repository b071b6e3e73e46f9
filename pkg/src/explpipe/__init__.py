"""Overgenerate-and-filter pipeline for human-acceptable free-text explanations."""

__version__ = "0.1.0"
