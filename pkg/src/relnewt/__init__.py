"""Fixed-energy relativistic Newton dynamics: boundary and scattering data,
the Maupertuis metric, hodograph fields, planar stability functionals and
parametric reconstruction of compactly supported potentials."""

from .boundary import BoundaryDatum, BoundaryDataset, boundary_grid, solve_boundary_value
from .convert import boundary_to_scattering, scattering_to_boundary
from .dynamics import EnergyContext, PhaseState, estimate_energy_threshold, hamiltonian, integrate
from .errors import RelNewtError, SolverError, ValidationError
from .hodograph import HodographField, hodograph_distance, hodograph_grid
from .inverse import BumpParametrization, ReconstructionReport, misfit, reconstruct
from .maupertuis import MetricField, geodesic_trace, lemma31_residual
from .model import Bump, ConvexDomain, PotentialModel, make_potential
from .scattering import ScatteringDatum, solve_scattering
from .stability import StabilityReport, phi0_integral, phi1_integral, theorem31_check

__version__ = "0.1.0"

__all__ = [
    "Bump", "BoundaryDatum", "BoundaryDataset", "BumpParametrization", "ConvexDomain", "EnergyContext",
    "HodographField", "MetricField", "PhaseState", "PotentialModel", "ReconstructionReport", "RelNewtError",
    "ScatteringDatum", "SolverError", "StabilityReport", "ValidationError", "boundary_grid",
    "boundary_to_scattering", "estimate_energy_threshold", "geodesic_trace", "hamiltonian",
    "hodograph_distance", "hodograph_grid", "integrate", "lemma31_residual", "make_potential", "misfit",
    "phi0_integral", "phi1_integral", "reconstruct", "scattering_to_boundary", "solve_boundary_value",
    "solve_scattering", "theorem31_check",
]
