"""Customisable, evidence-grounded document evaluation workflows."""

__version__ = "0.1.0"
