"""Approximate 2-localization of Hamiltonian spectra by spectral matching."""
__version__ = "0.1.0"
