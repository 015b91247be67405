"""qg3: spectral and singular-integral machinery for an anisotropic
non-local diffusion operator of quasi-geostrophic type, plus a verification
suite for its kernel, semigroup, commutator and a priori estimates."""

from .params import PhysicalParams
from .grid import (
    Grid3,
    ScalarField,
    SpectralField,
    transform,
    inverse_transform,
    anisotropic_norm,
    lp_norm,
    spectral_derivative,
    read_snapshot,
    write_snapshot,
)

__all__ = [
    "PhysicalParams",
    "Grid3",
    "ScalarField",
    "SpectralField",
    "transform",
    "inverse_transform",
    "anisotropic_norm",
    "lp_norm",
    "spectral_derivative",
    "read_snapshot",
    "write_snapshot",
]

__version__ = "0.1.0"
