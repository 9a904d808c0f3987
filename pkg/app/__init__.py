# app/__init__.py
"""Simulation toolkit for control problems with random action sets."""

__version__ = "0.1.0"
