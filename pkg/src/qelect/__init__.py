"""Discrete-event laboratory for classical and GHZ-assisted leader election."""

__version__ = "0.1.0"
