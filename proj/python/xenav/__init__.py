"""Embodiment-randomized indoor navigation simulator."""

from ._core import (
    ACTIONS,
    PRESETS,
    ArgumentError,
    Episode,
    Error,
    GenerationError,
    LookupError,
    ParseError,
    PlacementError,
    RangeError,
    Scene,
    Simulator,
    StateError,
    TaskError,
    UnreachableError,
    ValidationError,
    aggregate,
    config_vector,
    default_ranges,
    embodiment_distance,
    filter_ranges,
    generate_scene,
    make_benchmark,
    make_episode,
    plan_episode,
    preset_embodiment,
    run_benchmark,
    sample_embodiment,
    validate,
)

__version__ = "0.1.0"
