"""Synthetic compiler benchmarks grown from L-system grammars."""

__version__ = "0.1.0"
