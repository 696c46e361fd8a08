"""Desk-scale benchmark harness for frozen speech representation models."""

__version__ = "0.1.0"
