"""Schur-complement solvers for penalty spectral-multidomain Poisson-Neumann problems.

The 2D path assembles the interface Schur complement of a strip decomposition
and solves it with GMRES, optionally preconditioned by block-Jacobi, deflation
or a two-level additive Schwarz coarse correction.  ``helmholtz3d`` extends it
to transversely periodic 3D problems through a Fourier transform in y.
"""

from .bench import ExperimentConfig, run_convergence_study, run_experiment, run_oracle_validation
from .deflation import build_coarse, deflated_solve, two_level_schwarz_solve
from .errors import (AssemblyError, ConfigError, ConvergenceError, InvalidOrderError, MeshError,
                     NumericError, OracleGuardError, PreconditionerError, SingularShiftError)
from .gll import GllBasis, gll_basis
from .helmholtz3d import build_wavenumber_systems, solve_3d
from .krylov import KrylovReport, gmres
from .mesh import build_decomposition, build_mesh
from .operator import LocalSolver, build_operator
from .preconditioner import BlockJacobi
from .schur import assemble_schur
from .solver import METHODS, SchurSolver

__version__ = "0.1.0"
