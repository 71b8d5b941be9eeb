"""Regrasp-map guided planning for a planar disc agent moving a stick object."""

__version__ = "0.1.0"
