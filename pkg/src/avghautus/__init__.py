"""Averaged Hautus tests and observability toolkit for time-varying systems."""

__version__ = "0.1.0"
