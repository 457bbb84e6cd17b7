"""Desk-scale web-enabled simulation of bot communities on a social platform."""

__version__ = "0.1.0"
