"""Hill-type determinants, trace formulas and spectral checks for linear
Hamiltonian boundary value problems, with an application to the stability of
elliptic relative equilibria of the planar three-body problem."""

from .brake import check_brake_symmetry, decomposition_check, split_boundaries
from .ere import EREKind, classify, curve_value, degeneracy_anchors, meyer_schmidt_system, split_perturbation
from .errors import *  # noqa: F401,F403
from .hill import determinant_sign, hill_curve, hill_ratio, transversality
from .oracle import (eigen_sum, galerkin_determinant, periodic_morse_index, relative_morse_index,
                     shoot_eigenvalues)
from .propagator import CoefficientPath, fundamental_solution, iterated_integrals, monodromy
from .symplectic import (BoundaryPair, BrakeSymmetryData, LagrangianFrame, SymplecticMatrix,
                         normalize_boundary_pair)
from .systems import builtin_system, load_sampled_coefficients
from .trace import conditional_traces, constant_coefficient_trace, g_matrices, trace_power

__version__ = "0.1.0"
