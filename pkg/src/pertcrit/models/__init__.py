"""Model pencils: oscillator with a delta spike, two-electron wire, 1D helium."""

from pertcrit.models.helium import (
    FemGrid,
    ScfResult,
    analytic_hf,
    build_helium_mp,
    helium_hamiltonian,
    hf_solve,
)
from pertcrit.models.hermite import HermiteBasisSpec, hermite_at_zero, hermite_functions
from pertcrit.models.oscillator import build_ho_delta, build_wire2

__all__ = [
    "FemGrid",
    "HermiteBasisSpec",
    "ScfResult",
    "analytic_hf",
    "build_helium_mp",
    "build_ho_delta",
    "build_wire2",
    "helium_hamiltonian",
    "hermite_at_zero",
    "hermite_functions",
    "hf_solve",
]
