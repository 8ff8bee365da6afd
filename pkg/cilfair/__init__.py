"""Fairness testing and repair for class-incremental learning."""

__version__ = "0.1.0"
