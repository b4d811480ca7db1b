"""
qudit-noise - Charge-noise modeling and analysis for transmon qudits.

This package computes charge-dispersed transmon spectra, synthesizes parity
and offset-charge telemetry, decodes it with mixtures and hidden Markov
models, fits noise spectra and maps charge-sensitive volumes.
"""

__version__ = "1.0.0"
