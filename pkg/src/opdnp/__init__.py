"""Optically pumped MAS-DNP simulation toolkit."""

__version__ = "0.1.0"
