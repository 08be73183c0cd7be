"""Refractive error estimation from streak retinoscopy frame sequences."""

__version__ = "0.1.0"
