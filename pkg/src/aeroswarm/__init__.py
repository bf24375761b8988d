"""Decentralized synchronous motion planning for aerial swarms in unknown clutter."""

__version__ = "0.1.0"
