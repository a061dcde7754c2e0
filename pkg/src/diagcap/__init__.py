"""Desk-scale diagnostic captioning toolkit for radiology images."""

__version__ = "0.1.0"
