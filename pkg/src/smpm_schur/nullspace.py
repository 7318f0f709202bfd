"""Left null vectors of ``S`` and ``L`` and the consistency projections."""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError


@dataclass
class NullSpaceData:
    u_S: np.ndarray = field(repr=False)
    u_L: np.ndarray = field(repr=False)
    u_C: np.ndarray = field(repr=False)
    sigma: float
    iterations: int
    residual: float


def _fix_sign(u):
    i = np.argmax(np.abs(u))
    return u if u[i] >= 0 else -u


def left_null_vector_S(sys, sigma=None, tol=1e-10, max_iter=20, seed=0, return_info=False):
    """Left null vector of ``S`` by shifted inverse iteration on ``S^T - sigma I``.

    Iterates until the residual ``||S^T u|| / ||S||_F`` stops improving by
    at least a factor of ten, then requires it to be ``<= tol``.  Stopping at
    the first step below ``tol`` is not enough on large grids: the leftover
    error in ``u_S`` makes the projected ``b_S`` measurably inconsistent.  With ``return_info`` the
    result is ``(u, sigma, iterations, residuals)``; ``residuals[i]`` is the
    relative residual after step ``i`` (index 0 is the starting vector).
    """
    S = sys.to_sparse()
    k = S.shape[0]
    s_norm = spla.norm(S)
    if sigma is None:
        sigma = 1e-8 * s_norm / np.sqrt(k)
    lu = spla.splu((S.T - sigma * sp.identity(k)).tocsc())
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(k)
    u /= np.linalg.norm(u)
    residuals = [np.linalg.norm(S.T @ u) / s_norm]
    best = u
    for it in range(1, max_iter + 1):
        u_next = lu.solve(best)
        u_next /= np.linalg.norm(u_next)
        res = np.linalg.norm(S.T @ u_next) / s_norm
        if res >= 0.1 * residuals[-1]:
            if res < residuals[-1]:
                best = u_next
                residuals.append(res)
            break
        best = u_next
        residuals.append(res)
    if residuals[-1] > tol:
        raise ConvergenceError(
            f"inverse iteration stalled at relative residual {residuals[-1]:.3e}", residuals[-1])
    u = best
    u = _fix_sign(u)
    if return_info:
        return u, sigma, it, residuals
    return u


def left_null_vector_L(op, local, u_S):
    """``u_L`` proportional to ``A^{-T} B^T u_S``, unit norm."""
    u = local.solve_T(op.B.T @ u_S)
    return _fix_sign(u / np.linalg.norm(u))


def coarse_null_vector(dec, u_S):
    """``Z^T u_S`` normalised."""
    u = np.asarray(u_S).reshape(dec.n_interfaces, dec.interface_size).sum(axis=1)
    return u / np.linalg.norm(u)


def project_out(f, u):
    """Remove the component of ``f`` along the unit vector ``u``."""
    f = np.asarray(f)
    return f - u * (u @ f)


# named for the two places the projection is used
project_rhs_full = project_out
project_rhs_schur = project_out


def compute_null_space(sys, sigma=None, tol=1e-10, seed=0):
    u_S, sigma, iters, res = left_null_vector_S(sys, sigma=sigma, tol=tol, seed=seed,
                                                return_info=True)
    u_L = left_null_vector_L(sys.op, sys.local, u_S)
    u_C = coarse_null_vector(sys.dec, u_S)
    return NullSpaceData(u_S=u_S, u_L=u_L, u_C=u_C, sigma=sigma, iterations=iters,
                         residual=res[-1])


def angle(a, b):
    """Angle between the lines spanned by ``a`` and ``b`` (radians)."""
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    if a @ b < 0:
        b = -b
    # chord form stays accurate for tiny angles where arccos does not
    return float(2.0 * np.arcsin(min(np.linalg.norm(a - b) / 2.0, 1.0)))
