"""Python bindings for the nh homogenization / surrogate library."""

from ._core import (
    FormatError,
    MissingInputError,
    NumericError,
    ParameterError,
    compute_metrics,
    effective_elasticity,
    effective_permeability,
    preset,
    preset_names,
    random_field,
    read_array,
    resolve_config,
    run_pipeline,
    set_log_level,
)

__all__ = [
    "FormatError",
    "MissingInputError",
    "NumericError",
    "ParameterError",
    "compute_metrics",
    "effective_elasticity",
    "effective_permeability",
    "preset",
    "preset_names",
    "random_field",
    "read_array",
    "resolve_config",
    "run_pipeline",
    "set_log_level",
]
