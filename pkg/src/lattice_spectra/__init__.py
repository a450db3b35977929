"""Lattice pseudodifference operators: essential spectra and eigenfunction decay."""

__version__ = "0.1.0"
