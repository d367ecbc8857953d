"""Desk-scale single-class person detector and evaluation harness."""

__version__ = "0.1.0"
