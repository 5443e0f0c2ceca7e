"""Offline figure rendering for tlamonitor CSV outputs."""

__version__ = "0.1.0"
