"""Signal cleaning: bandpass filtering, artifact annotation and ICA."""

from .artifacts import ArtifactAnnotations, Span, annotate_amplitude, flag_muscle, merge_spans
from .filter import (
    FilterSpec,
    describe_filter,
    design_bandpass,
    filter_length,
    filter_recording,
    frequency_response,
    lowpass_taps,
)
from .ica import FRONTAL_CHANNELS, IcaModel, fit_fastica, remove_components, suggest_eog_components

__all__ = [
    "ArtifactAnnotations",
    "FRONTAL_CHANNELS",
    "FilterSpec",
    "IcaModel",
    "Span",
    "annotate_amplitude",
    "describe_filter",
    "design_bandpass",
    "filter_length",
    "filter_recording",
    "fit_fastica",
    "flag_muscle",
    "frequency_response",
    "lowpass_taps",
    "merge_spans",
    "remove_components",
    "suggest_eog_components",
]
