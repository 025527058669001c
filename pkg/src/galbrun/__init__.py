"""Finite elements and well-posedness diagnostics for damped
time-harmonic perturbations of rotating, self-gravitating flows.

The package assembles the sesquilinear form of the linearized
displacement equations on tensor-product meshes, builds the
divergence-free/stratification/complement splitting of the discrete
space, and provides the probes (sector angle, admissibility conditions,
inf-sup sweeps, regularity-constant estimates, manufactured-solution
studies) used to certify a configuration before solving it.
"""

from .errors import (BoundaryFlowViolation, ConstraintViolation,
                     CutoffAmbiguous, DecompositionSizeError,
                     DimensionMismatch, EmptySubspace, FieldSyntaxError,
                     IllConditionedBases, InconsistentDerivative,
                     InvalidRange, MissingCreg, MissingDerivative,
                     PreconditionViolated, QuadratureInsufficient,
                     SingularGravityBlock, SingularMatrix, SolverBreakdown,
                     UnsupportedDegree)
from .fields import ScalarField, VectorField, parse_expression
from .meshing import Mesh, build_interval_mesh, build_rect_mesh
from .spaces import (FESpace, Quadrature, build_space, interpolate,
                     prolongation)
from .problem import (ProblemConfig, ValidatedProblem, compute_lambda,
                      compute_matkl, compute_q, cross_matrix,
                      validate_config)
from .sector import (AdmissibilityReport, CONDITION_NAMES, SectorReport,
                     check_admissibility, compute_theta, sector_angle)
from .kernels import backend, use_numba
from .assembly import (SystemBlocks, assemble_B, assemble_R, assemble_blocks,
                       assemble_cowling, assemble_rhs, check_quadrature,
                       creg_matrices, export_blocks, factorized_principal,
                       lambda_mass)
from .decomposition import (Decomposition, build_W, build_Z,
                            build_decomposition, build_projectors,
                            verify_decomposition)
from .diagnostics import (CregReport, InfSupReport, SweepReport,
                          estimate_creg, imag_identity_residual, inf_sup,
                          representation_identity_residual,
                          selfadjointness_residual, sonic_sweep,
                          whitened_singulars)
from .solve import (ConvergenceReport, SolveResult, mms_convergence,
                    solve_cowling, solve_full)
from .reporting import canonical_json, config_hash, write_csv, write_json

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityReport", "BoundaryFlowViolation", "CONDITION_NAMES",
    "ConstraintViolation", "ConvergenceReport", "CregReport",
    "CutoffAmbiguous", "Decomposition", "DecompositionSizeError",
    "DimensionMismatch", "EmptySubspace", "FESpace", "FieldSyntaxError",
    "IllConditionedBases", "InconsistentDerivative", "InfSupReport",
    "InvalidRange", "Mesh", "MissingCreg", "MissingDerivative",
    "PreconditionViolated", "ProblemConfig", "Quadrature",
    "QuadratureInsufficient", "ScalarField", "SectorReport",
    "SingularGravityBlock", "SingularMatrix", "SolveResult",
    "SolverBreakdown", "SweepReport", "SystemBlocks", "UnsupportedDegree",
    "ValidatedProblem", "VectorField", "assemble_B", "assemble_R",
    "assemble_blocks", "assemble_cowling", "assemble_rhs", "backend",
    "build_W", "build_Z", "build_decomposition", "build_interval_mesh",
    "build_projectors", "build_rect_mesh", "build_space", "canonical_json",
    "check_admissibility", "check_quadrature", "compute_lambda",
    "compute_matkl", "compute_q", "compute_theta", "config_hash",
    "creg_matrices", "cross_matrix", "estimate_creg", "export_blocks",
    "factorized_principal", "imag_identity_residual", "inf_sup",
    "interpolate", "lambda_mass", "mms_convergence", "parse_expression",
    "prolongation", "representation_identity_residual", "sector_angle",
    "selfadjointness_residual", "solve_cowling", "solve_full",
    "sonic_sweep", "use_numba", "validate_config", "verify_decomposition",
    "whitened_singulars", "write_csv", "write_json",
]
