"""Subordinated spherical random fields: exact angular algebra, convolution
spectra and high-frequency Gaussianity diagnostics."""

__version__ = "0.1.0"
