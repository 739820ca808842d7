"""Boundary-free kernel distribution estimators and smoothed goodness-of-fit tests."""

__version__ = "0.1.0"
