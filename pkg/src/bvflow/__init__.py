"""Joint image-sequence restoration and optical-flow estimation on space-time
grids, with analysis of the jump energy carried by moving edges."""

from .core import (
    EnergyTerms,
    Grid,
    JumpDatum,
    SpaceTimeField,
    VelocityField,
    Weights,
    energy,
    full_objective,
    gradient,
)
from .jump import JumpBracket, Laminate, Regime, classify

__all__ = [
    "EnergyTerms",
    "Grid",
    "JumpDatum",
    "SpaceTimeField",
    "VelocityField",
    "Weights",
    "energy",
    "full_objective",
    "gradient",
    "classify",
    "JumpBracket",
    "Laminate",
    "Regime",
]

__version__ = "0.1.0"
