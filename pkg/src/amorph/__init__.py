"""Asymptotic separation numbers and amorphic complexity from orbit experiments."""

__version__ = "0.1.0"
