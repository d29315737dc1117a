"""Extrinsic geometry of submanifolds in products of two space forms."""

__version__ = "0.1.0"
