"""Tube-resonance synthesizer: the non-differentiable forward operator."""

from .glottal import glottal_source, pulse_shape, pulse_train
from .params import (
    CLIP_GUARD,
    CONTROL_FIELDS,
    CONTROL_RANGES,
    FIXED_UTTERANCE_FIELDS,
    REFERENCE_PITCH_HZ,
    TRAINABLE_UTTERANCE_FIELDS,
    UTTERANCE_RANGES,
    ControlFrame,
    ControlTrack,
    UtteranceParams,
    Waveform,
    control_from_normalized,
    control_to_normalized,
    utterance_from_normalized,
    utterance_to_normalized,
)
from .synth import SynthesisError, interpolate_control, synthesize
from .tube import (
    N_NASAL_SECTIONS,
    N_ORAL_SECTIONS,
    VELUM_JUNCTION,
    TubeState,
    reflection_coefficient,
    validate_and_build_tube,
)

__all__ = [
    "CLIP_GUARD",
    "CONTROL_FIELDS",
    "CONTROL_RANGES",
    "FIXED_UTTERANCE_FIELDS",
    "REFERENCE_PITCH_HZ",
    "TRAINABLE_UTTERANCE_FIELDS",
    "UTTERANCE_RANGES",
    "ControlFrame",
    "ControlTrack",
    "N_NASAL_SECTIONS",
    "N_ORAL_SECTIONS",
    "SynthesisError",
    "TubeState",
    "UtteranceParams",
    "VELUM_JUNCTION",
    "Waveform",
    "control_from_normalized",
    "control_to_normalized",
    "glottal_source",
    "interpolate_control",
    "pulse_shape",
    "pulse_train",
    "reflection_coefficient",
    "synthesize",
    "utterance_from_normalized",
    "utterance_to_normalized",
    "validate_and_build_tube",
]
