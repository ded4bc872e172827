"""Measurements for propagation of smallness of elliptic solutions.

Doubling indices and Hausdorff contents drive the sublevel-set experiments."""
from .doubling import (
    DegenerateSupremum,
    DoublingReport,
    MonotonicityFit,
    PropagationFit,
    SamplingLattice,
    check_monotonicity,
    doubling_index_ball,
    doubling_index_cube,
    propagation_fit,
    subcube_lower_bound_check,
    three_spheres_check,
)
from .fields import (
    AnalyticSolution,
    CoefficientField,
    Eigenfunction,
    check_ellipticity,
    harmonic_polynomial,
    parse_coefficients,
    parse_field,
)
from .geometry import Ball, ContentEstimate, Cube, Lattice, PointSet, hausdorff_content, scale_set
from .rng import SplitMix64
from .smallness import (
    BoundTable,
    CensusReport,
    DecayFit,
    SublevelSet,
    bad_cube_census,
    critical_census,
    decay_profile,
    eigen_remez_check,
    recursive_bound_propagator,
    remez_check,
    sublevel_set,
    zero_set_measure,
)
from .solver import GridFunction, SolveReport, discretize, solve_dirichlet

__version__ = "0.1.0"
