"""Causal-order checks for a hypothetical universal quantum NOT device."""

__version__ = "0.1.0"
