"""Minimal-mass blow-up for the 1D quintic NLS with a point interaction."""
__version__ = "0.1.0"
