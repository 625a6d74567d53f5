"""Desk-scale simulation and evaluation of vision-language exploration policies."""

__version__ = "0.1.0"
