"""Distance to singularity for matrix polynomials via structured gradient flows."""

from .core import (
    BackendError,
    DimensionError,
    MatrixPolynomial,
    PolysingError,
    SamplePointSet,
    SingularTriplet,
    default_rho,
    evaluate,
    evaluate_perturbed,
    generate_sample_points,
    smallest_singular_triplet,
    stack,
)
from .flow import FlowOptions, functional_G, gradient_stack, inner_minimize
from .kernel import (
    KernelResult,
    KernelSide,
    functional_F,
    solve_kernel_distance,
    unstructured_kernel_distance,
)
from .outer import ConvergenceError, SolveReport, SolverConfig, solve_distance, verify_singularity
from .structures import (
    FixedIndices,
    FullComplex,
    Palindromic,
    PerCoefficient,
    RealEntries,
    dissipative_hamiltonian_space,
    gyroscopic_space,
    structure_from_descriptor,
)

__version__ = "0.1.0"
