"""Gas bubble in a bounded viscous liquid: equilibria, Galerkin dynamics,
energy audits and spectral decay rates under spherical symmetry."""

from .core import (MassVolumePair, NumericalError, PhysicalParams, QuadratureRule,
                   ValidationError, ValidityError, gauss_quadrature, validate_params)
from .dynamics import (GalerkinSystem, ModalState, SimOptions, Trajectory, fd_oracle,
                       make_initial, simulate)
from .energy import dissipation_rate, minimizer_gap, total_energy
from .equilibrium import (EquilibriumState, derived_constants, equilibrium_density,
                          inverse_map, poly_coeffs, solve_radius)
from .modal import ModalBasis, boundary_flux, eigenfunction
from .spectrum import CharacteristicFunction, decay_bounds, find_roots, spectrum_report

__version__ = "0.1.0"

__all__ = [
    "MassVolumePair", "NumericalError", "PhysicalParams", "QuadratureRule",
    "ValidationError", "ValidityError", "gauss_quadrature", "validate_params",
    "GalerkinSystem", "ModalState", "SimOptions", "Trajectory", "fd_oracle",
    "make_initial", "simulate", "dissipation_rate", "minimizer_gap", "total_energy",
    "EquilibriumState", "derived_constants", "equilibrium_density", "inverse_map",
    "poly_coeffs", "solve_radius", "ModalBasis", "boundary_flux", "eigenfunction",
    "CharacteristicFunction", "decay_bounds", "find_roots", "spectrum_report",
]
