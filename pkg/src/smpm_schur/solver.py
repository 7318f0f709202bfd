"""End-to-end Poisson-Neumann solve through the Schur complement.

``SchurSolver`` performs the one-off setup (local factorisation, Schur
assembly, block-Jacobi factors, null vectors, coarse space) and then solves
any number of right-hand sides with one of four methods:

========  ==========================================================
schur     GMRES on ``S`` without preconditioning
bj        GMRES on ``S M^{-1}``
dbj       GMRES on ``P S M^{-1}`` plus the coarse correction
2las      GMRES on ``S (M^{-1} + Z C^{-1} Z^T)``
========  ==========================================================
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .deflation import build_coarse, deflated_solve, two_level_schwarz_solve
from .errors import ConfigError
from .krylov import gmres, gmres_right_preconditioned
from .mesh import build_decomposition, build_mesh
from .nullspace import compute_null_space, project_out
from .operator import LocalSolver, build_operator
from .preconditioner import BlockJacobi
from .schur import assemble_schur

METHODS = ("schur", "bj", "dbj", "2las")


@dataclass
class SolveResult:
    u: np.ndarray = field(repr=False)
    x_S: np.ndarray = field(repr=False)
    b_S: np.ndarray = field(repr=False)
    f_tilde: np.ndarray = field(repr=False)
    report: object
    schur_rel_residual: float


def solve_schur_system(sys, M, cs, b_S, method, tol=1e-10, max_iter=None):
    """Dispatch one Schur solve; ``b_S`` must already be consistent."""
    if method == "schur":
        return gmres(sys.apply, b_S, tol=tol, max_iter=max_iter)
    if method == "bj":
        return gmres_right_preconditioned(sys.apply, M, b_S, tol=tol, max_iter=max_iter)
    if method == "dbj":
        return deflated_solve(sys, cs, M, b_S, tol=tol, max_iter=max_iter)
    if method == "2las":
        return two_level_schwarz_solve(sys, cs, M, b_S, tol=tol, max_iter=max_iter)
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")


class SchurSolver:
    """Setup once, solve many right-hand sides of ``L u = f``."""

    def __init__(self, op, sigma=None, seed=0):
        t0 = time.perf_counter()
        self.op = op
        self.local = LocalSolver(op)
        self.sys = assemble_schur(op, self.local)
        self.M = BlockJacobi(self.sys)
        self.null = compute_null_space(self.sys, sigma=sigma, seed=seed)
        self.coarse = build_coarse(self.sys, u_C=self.null.u_C)
        self.setup_time = time.perf_counter() - t0

    @classmethod
    def from_grid(cls, n, m_x, m_z, l_x, l_z, c_tau=1.0, **kwargs):
        mesh = build_mesh(n, m_x, m_z, l_x, l_z)
        op = build_operator(mesh, build_decomposition(mesh), c_tau=c_tau)
        return cls(op, **kwargs)

    @property
    def mesh(self):
        return self.op.mesh

    def schur_rhs(self, f):
        """Consistent ``f~`` and projected ``b_S`` for a grid right-hand side."""
        f_tilde = project_out(f, self.null.u_L)
        b_S = project_out(self.sys.rhs(f_tilde), self.null.u_S)
        return f_tilde, b_S

    def solve_schur(self, b_S, method="dbj", tol=1e-10, max_iter=None):
        return solve_schur_system(self.sys, self.M, self.coarse, b_S, method, tol, max_iter)

    def solve(self, f, method="dbj", tol=1e-10, max_iter=None):
        f_tilde, b_S = self.schur_rhs(f)
        x_S, report = self.solve_schur(b_S, method, tol, max_iter)
        u = self.sys.recover(f_tilde, x_S)
        res = np.linalg.norm(self.sys.apply(x_S) - b_S) / np.linalg.norm(b_S)
        return SolveResult(u=u, x_S=x_S, b_S=b_S, f_tilde=f_tilde, report=report,
                           schur_rel_residual=float(res))
