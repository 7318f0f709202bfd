"""Coarse space, deflation projections and the two coarse-corrected solvers.

The coarse space uses one indicator vector per interface.  The coarse matrix
``C = Z^T S Z`` inherits the rank deficiency of ``S`` in the pure Neumann
case; the coarse division then solves ``C y = (I - u_C u_C^T) b`` through
the shifted matrix ``C + u_C u_C^T``, which returns the solution with no
component along ``u_C``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import AssemblyError
from .krylov import gmres, gmres_right_preconditioned

TRIDIAGONAL_TOL = 1e-12


@dataclass
class CoarseSpace:
    d: int
    width: int  # unknowns per interface
    C: np.ndarray = field(repr=False)
    u_C: np.ndarray = field(default=None, repr=False)
    tridiagonal: bool = False
    _lu: tuple = field(default=None, repr=False)
    _banded: np.ndarray = field(default=None, repr=False)

    @property
    def singular(self):
        return self.u_C is not None

    def apply_Z(self, y):
        y = np.asarray(y)
        if y.shape[0] != self.d:
            raise ValueError(f"coarse vector has length {y.shape[0]}, expected {self.d}")
        return np.repeat(y, self.width, axis=0)

    def apply_Zt(self, v):
        v = np.asarray(v)
        if v.shape[0] != self.d * self.width:
            raise ValueError(f"interface vector has length {v.shape[0]}, expected {self.d * self.width}")
        return v.reshape((self.d, self.width) + v.shape[1:]).sum(axis=1)

    def coarse_solve(self, b):
        """Regularised division by ``C``."""
        b = np.asarray(b)
        if self.singular:
            b = b - np.multiply.outer(self.u_C, self.u_C @ b)
            return sla.lu_solve(self._lu, b)
        if self.tridiagonal:
            return sla.solve_banded((1, 1), self._banded, b)
        return sla.lu_solve(self._lu, b)


def _is_tridiagonal(C):
    far = np.abs(np.triu(C, 2)).max(initial=0.0) + np.abs(np.tril(C, -2)).max(initial=0.0)
    return far <= TRIDIAGONAL_TOL * np.linalg.norm(C)


def build_coarse(sys, u_C=None):
    """Coarse matrix ``C = Z^T S Z`` and its factorisation.

    Pass the coarse null vector ``u_C`` for the singular (Poisson) case;
    leave it ``None`` for invertible Helmholtz systems.
    """
    d, width = sys.d, sys.dec.interface_size
    cs = CoarseSpace(d=d, width=width, C=np.zeros((d, d)), u_C=u_C)
    if d == 0:
        return cs
    Z = cs.apply_Z(np.eye(d))
    cs.C = cs.apply_Zt(sys.apply(Z))
    cs.tridiagonal = bool(_is_tridiagonal(cs.C))
    if u_C is not None:
        target = cs.C + np.outer(u_C, u_C)
    else:
        target = cs.C
    lu, piv = sla.lu_factor(target)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= np.finfo(float).eps * d * pivots.max():
        raise AssemblyError("coarse matrix is singular")
    cs._lu = (lu, piv)
    if cs.tridiagonal and u_C is None:
        banded = np.zeros((3, d))
        banded[0, 1:] = np.diag(cs.C, 1)
        banded[1] = np.diag(cs.C)
        banded[2, :-1] = np.diag(cs.C, -1)
        cs._banded = banded
    return cs


def apply_P(cs, sys, v):
    """``P v = v - S Z C^{-1} Z^T v`` (regularised division)."""
    return v - sys.apply(cs.apply_Z(cs.coarse_solve(cs.apply_Zt(v))))


def apply_Q(cs, sys, v):
    """``Q v = v - Z C^{-1} Z^T S v`` (regularised division)."""
    return v - cs.apply_Z(cs.coarse_solve(cs.apply_Zt(sys.apply(v))))


def deflated_solve(sys, cs, M, b_S, tol=1e-10, max_iter=None):
    """Deflated, block-Jacobi preconditioned solve of ``S x = b_S``.

    ``b_S`` must already be consistent.  The solution is assembled as the
    coarse part ``Z C^{-1} Z^T b_S`` plus ``Q M^{-1} x'`` where ``x'`` solves
    ``P S M^{-1} x' = P b_S`` by GMRES.

    ``S x - b_S`` equals the residual of the deflated system, so the GMRES
    tolerance is rescaled to make ``tol`` relative to ``||b_S||``.
    """
    coarse = cs.apply_Z(cs.coarse_solve(cs.apply_Zt(b_S)))
    pb = apply_P(cs, sys, b_S)
    pb_norm = np.linalg.norm(pb)
    scaled_tol = tol * np.linalg.norm(b_S) / pb_norm if pb_norm > 0 else tol
    xp, report = gmres(lambda v: apply_P(cs, sys, sys.apply(M(v))), pb,
                       tol=scaled_tol, max_iter=max_iter)
    return coarse + apply_Q(cs, sys, M(xp)), report


def two_level_schwarz_solve(sys, cs, M, b_S, tol=1e-10, max_iter=None):
    """GMRES on ``S (M^{-1} + Z C^{-1} Z^T)`` with right preconditioning."""

    def precond(v):
        return M(v) + cs.apply_Z(cs.coarse_solve(cs.apply_Zt(v)))

    return gmres_right_preconditioned(sys.apply, precond, b_S, tol=tol, max_iter=max_iter)
