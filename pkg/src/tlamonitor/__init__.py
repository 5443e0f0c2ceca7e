"""Conditional-state simulation of a driven, radiatively damped two-level atom
monitored by realistic photodetectors (avalanche photodiode counting and
homodyne photoreceiver detection)."""

__version__ = "0.1.0"
