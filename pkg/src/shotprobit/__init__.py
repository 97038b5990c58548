"""Bayesian spatial probit model for shot conversion in soccer."""
from .exceptions import ChainError, DesignError, GeometryError, KernelError, SchemaError
from .geometry import GeometryConfig, PitchLocation
from .gibbs import ChainConfig, PosteriorDraws, PriorConfig, run_chain, summarize
from .ingest import EncodedDesign, ShotRecord, apply_exclusions, build_design, parse_shots
from .kernel import SpatialKernel, build_kernel
from .predict import predict_many, predict_probability

__version__ = "0.1.0"

__all__ = [
    "ChainConfig", "ChainError", "DesignError", "EncodedDesign", "GeometryConfig",
    "GeometryError", "KernelError", "PitchLocation", "PosteriorDraws", "PriorConfig",
    "SchemaError", "ShotRecord", "SpatialKernel", "apply_exclusions", "build_design",
    "build_kernel", "parse_shots", "predict_many", "predict_probability", "run_chain",
    "summarize",
]
