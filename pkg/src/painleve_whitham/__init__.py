"""Whitham averaging for the first and sixth Painleve equations."""

__version__ = "0.1.0"
