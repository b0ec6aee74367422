"""Received-power visible light positioning under LED luminous-flux decay."""

__version__ = "0.1.0"
