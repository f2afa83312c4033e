"""Natural-occupation dynamics for small lattice-fermion sectors."""
from .errors import NatoccError
from .fock import Determinant, SectorLabel, SpinOrbital, enumerate_determinants, sector_filter
from .model import IntegralSet, QuenchProtocol, build_hubbard, build_many_body_matrix
from .rdm import NaturalFrame, natural_spectrum, one_rdm, two_rdm
from .sector_map import build_amplitude_map, invert_map
from .gpc import borland_dennis_constraints, pinning_report, perturbation_response
from .dynamics import TimeGrid, Trajectory, evolve_exact, evolve_reduced

__version__ = "0.1.0"

__all__ = [
    "NatoccError", "Determinant", "SectorLabel", "SpinOrbital", "enumerate_determinants",
    "sector_filter", "IntegralSet", "QuenchProtocol", "build_hubbard", "build_many_body_matrix",
    "NaturalFrame", "natural_spectrum", "one_rdm", "two_rdm", "build_amplitude_map", "invert_map",
    "borland_dennis_constraints", "pinning_report", "perturbation_response", "TimeGrid",
    "Trajectory", "evolve_exact", "evolve_reduced",
]
