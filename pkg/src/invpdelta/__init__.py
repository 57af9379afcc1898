"""Symmetry-preserving difference schemes on evolving lattices.

Invariant discretizations of the heat, Burgers, potential Burgers and KdV
equations, with tools to check their symmetry numerically, march them in time
and test them against exact discrete solutions.
"""

__version__ = "0.1.0"

from .errors import (
    BoundaryError,
    ConfigError,
    DomainError,
    InvPDeltaError,
    MeshError,
    NumericError,
    SamplingError,
    SingularUpdateError,
    SolverError,
)
from .exact import ExactSolution, catalog, exactness_residual, generate_by_group, get_exact
from .invariants import InvariantSet, invariants
from .lattice import MeshFunctions, MovingLattice, StencilView, build_lattice, random_stencils
from .schemes import SchemeDef, available_schemes, make_scheme, residual
from .solver import NewtonOptions, SimConfig, Trajectory, run
from .symmetry import (
    GroupElement,
    SymmetryAlgebra,
    VectorField,
    apply_group,
    builtin_algebra,
    group_element,
    invariance_defect,
    invariant_count,
    one_parameter,
    prolong,
)
from .verify import convergence_study, invariance_suite, orbit_test, residual_report

__all__ = [
    "__version__",
    "BoundaryError", "ConfigError", "DomainError", "InvPDeltaError", "MeshError",
    "NumericError", "SamplingError", "SingularUpdateError", "SolverError",
    "ExactSolution", "catalog", "exactness_residual", "generate_by_group", "get_exact",
    "InvariantSet", "invariants",
    "MeshFunctions", "MovingLattice", "StencilView", "build_lattice", "random_stencils",
    "SchemeDef", "available_schemes", "make_scheme", "residual",
    "NewtonOptions", "SimConfig", "Trajectory", "run",
    "GroupElement", "SymmetryAlgebra", "VectorField", "apply_group", "builtin_algebra",
    "group_element", "invariance_defect", "invariant_count", "one_parameter", "prolong",
    "convergence_study", "invariance_suite", "orbit_test", "residual_report",
]
