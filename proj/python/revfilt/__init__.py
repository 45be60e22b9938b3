"""Reverse image filtering with accelerated fixed-point and gradient schemes."""

from ._core import (
    ConfigError,
    DimensionMismatch,
    Error,
    FilterError,
    FormatError,
    NonFiniteError,
    apply_filter,
    chebyshev_omega,
    filter_calls_per_iteration,
    filter_label,
    fixed_point_map,
    frobenius_norm,
    grad_surrogate,
    improvement_series,
    load_image,
    p_max,
    psnr,
    reverse,
    save_image,
    sgdr_lambda,
    spectral_norm,
)

__all__ = [
    "ConfigError",
    "DimensionMismatch",
    "Error",
    "FilterError",
    "FormatError",
    "NonFiniteError",
    "apply_filter",
    "chebyshev_omega",
    "filter_calls_per_iteration",
    "filter_label",
    "fixed_point_map",
    "frobenius_norm",
    "grad_surrogate",
    "improvement_series",
    "load_image",
    "p_max",
    "psnr",
    "reverse",
    "save_image",
    "sgdr_lambda",
    "spectral_norm",
]
