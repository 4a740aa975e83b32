"""Chern Marker Lab - Chern markers and Wannier localization on finite lattices"""

__version__ = "1.0.0"
