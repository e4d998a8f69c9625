"""Invisible backdoor poisoning through singular-value splicing."""

__version__ = "0.1.0"
