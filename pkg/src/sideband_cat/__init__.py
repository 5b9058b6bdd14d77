"""Sideband-mode photon subtraction: model, synthetic homodyne data and tomography."""

from . import errors, fock, homodyne, sideband, spectral

__version__ = "0.1.0"
