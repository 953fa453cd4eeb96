"""Pseudo-spectral Littlewood-Paley laboratory for 2D viscous shallow water."""

from .spectral import (
    Grid2D,
    SpectralField2D,
    VectorField2D,
    DyadicPartition,
    MultiplierSymbol,
    forward_transform,
    inverse_transform,
    make_partition,
    dyadic_block,
    low_pass,
)

__version__ = "0.1.0"

__all__ = [
    "Grid2D",
    "SpectralField2D",
    "VectorField2D",
    "DyadicPartition",
    "MultiplierSymbol",
    "forward_transform",
    "inverse_transform",
    "make_partition",
    "dyadic_block",
    "low_pass",
]
