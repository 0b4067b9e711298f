"""Permissioned proof-of-authority blockchain for tamper-evident ratings."""

__version__ = "0.1.0"
