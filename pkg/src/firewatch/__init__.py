"""Cooperative wildfire monitoring with two fixed-wing aircraft."""

__version__ = "0.1.0"
