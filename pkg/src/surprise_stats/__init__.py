"""Generalized log-likelihood ratio analysis of symbolic sequences."""

__version__ = "0.1.0"
