"""Numerical laboratory for the magnetic Dirac equation on a periodic grid."""

from .clifford import CliffordRep, build_clifford, spin_pairing, verify_anticommutation
from .evolution import Trajectory, evolve
from .fields import Grid, PotentialSpec, SpinorField, builtin_potentials, make_grid, make_potential
from .multipliers import MultiplierSpec, make_multiplier
from .operators import DiracOperator

__version__ = "0.1.0"

__all__ = [
    "CliffordRep", "DiracOperator", "Grid", "MultiplierSpec", "PotentialSpec", "SpinorField", "Trajectory",
    "build_clifford", "builtin_potentials", "evolve", "make_grid", "make_multiplier", "make_potential",
    "spin_pairing", "verify_anticommutation",
]
