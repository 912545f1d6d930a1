"""Admission control for long-term agent memory."""

__version__ = "0.1.0"
