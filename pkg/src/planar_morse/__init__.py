"""Radial nodal solutions, singular spectra and Morse indices for the planar
Lane-Emden and Henon problems."""

__version__ = "0.1.0"
