"""Spectral theory of subordinate Brownian motion killed on the half-line."""
from .cbf_model import LaplaceExponent, ModelSpec, build_model, validate_cbf
from .config import DEFAULT, Tolerances

__version__ = "0.1.0"

__all__ = [
    "DEFAULT",
    "LaplaceExponent",
    "ModelSpec",
    "Tolerances",
    "build_model",
    "validate_cbf",
]
