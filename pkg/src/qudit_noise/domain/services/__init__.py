"""Domain services."""

from .classify_service import ClassifyService
from .field_service import FieldService
from .spectral_service import SpectralService
from .spectrum_service import SpectrumService
from .synth_service import SynthService

__all__ = ["ClassifyService", "FieldService", "SpectralService", "SpectrumService", "SynthService"]
