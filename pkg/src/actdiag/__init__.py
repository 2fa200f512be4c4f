"""Diagnostics toolkit for multi-label temporal activity recognition."""

__version__ = "0.1.0"
