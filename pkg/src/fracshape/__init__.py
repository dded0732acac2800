"""Reparametrization-invariant fractional Sobolev metrics on closed curves."""

from .curve import (
    DiffeoSample,
    DiscreteCurve,
    TangentField,
    build_curve,
    circle,
    diameter,
    ds_derivative,
    random_curve,
    random_diffeo,
    srv_transform,
    to_constant_speed,
)
from .errors import (
    ConfigurationError,
    DomainError,
    FracShapeError,
    GenerationFailure,
    ImmersionViolation,
    InnerSolveFailure,
)
from .geodesic import PathGrid, SolveReport, discrete_exp, path_energy, path_length, refine_path, solve_bvp
from .metric import distance_lower_bound, embedding_bound, g0, gq, gq_dot, srv_lower_bound
from .spectral import SampledFunction, SpectralCoeffs, hq_dot_seminorm, hq_norm

__version__ = "0.1.0"

__all__ = [
    "DiffeoSample",
    "DiscreteCurve",
    "TangentField",
    "build_curve",
    "circle",
    "diameter",
    "ds_derivative",
    "random_curve",
    "random_diffeo",
    "srv_transform",
    "to_constant_speed",
    "ConfigurationError",
    "DomainError",
    "FracShapeError",
    "GenerationFailure",
    "ImmersionViolation",
    "InnerSolveFailure",
    "PathGrid",
    "SolveReport",
    "discrete_exp",
    "path_energy",
    "path_length",
    "refine_path",
    "solve_bvp",
    "distance_lower_bound",
    "embedding_bound",
    "g0",
    "gq",
    "gq_dot",
    "srv_lower_bound",
    "SampledFunction",
    "SpectralCoeffs",
    "hq_dot_seminorm",
    "hq_norm",
]
