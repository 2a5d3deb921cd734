"""Federated gradient-boosted trees for server power modeling."""

__version__ = "0.1.0"
