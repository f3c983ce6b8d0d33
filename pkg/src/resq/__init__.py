"""Resonator quality-factor, TLS-loss, XRD and transport analysis."""

from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .circlefit import fit_resonance, filter_by_error
from .model import (
    AttenuationChain,
    ComplexTransmissionTrace,
    NotchModelParams,
    ResonatorFitResult,
    input_power,
    photon_number,
    s21_notch,
)
from .tls import EnsembleCurve, TLSParams, bin_by_photon, fit_tls, tls_delta
from .transport import ResistanceTrace, critical_temperature, detect_transitions
from .xrd import DiffractionScan, PseudoVoigtParams, fit_peak, identify_phase

__all__ = [
    "AttenuationChain", "ComplexTransmissionTrace", "DiffractionScan", "EnsembleCurve",
    "NotchModelParams", "PseudoVoigtParams", "ResistanceTrace", "ResonatorFitResult",
    "TLSParams", "bin_by_photon", "critical_temperature", "detect_transitions",
    "filter_by_error", "fit_peak", "fit_resonance", "fit_tls", "identify_phase",
    "input_power", "photon_number", "s21_notch", "tls_delta",
]
