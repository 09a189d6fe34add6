"""Regression benchmarking toolkit for code-quality modeling tables."""

__version__ = "0.1.0"
