"""Full GMRES with Householder Arnoldi and right preconditioning.

The Arnoldi basis is generated with Householder reflections (Walker's
variant), which keeps ``V^T V - I`` at the level of machine precision
regardless of how ill-conditioned the operator is.  Restarting is not
supported.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError

log = logging.getLogger(__name__)

BREAKDOWN_TOL = 1e-14


@dataclass
class KrylovReport:
    iterations: int
    rel_residual_history: list
    converged: bool
    wall_time: float
    true_rel_residual: float = float("nan")
    basis: np.ndarray = field(default=None, repr=False)

    @property
    def rel_residual(self):
        return self.rel_residual_history[-1]


class _Reflectors:
    """Product ``Q = P_0 P_1 ... P_j`` of reflectors ``P_i = I - 2 w_i w_i^T``.

    ``w_i`` vanishes in entries ``< i``.  The product is kept in compact WY
    form ``Q = I - W T W^T`` with ``T`` upper triangular, so applying it costs
    two dense matrix-vector products instead of a loop over reflectors.
    Since ``P_i e_m = e_m`` for ``m < i``, ``Q e_m`` is the ``m``-th Arnoldi
    vector no matter how many reflectors follow.
    """

    def __init__(self, size, capacity=32):
        self.size = size
        self.W = np.zeros((size, capacity))
        self.T = np.zeros((capacity, capacity))
        self.count = 0

    def _grow(self):
        cap = 2 * self.W.shape[1]
        W = np.zeros((self.size, cap))
        T = np.zeros((cap, cap))
        W[:, : self.count] = self.W[:, : self.count]
        T[: self.count, : self.count] = self.T[: self.count, : self.count]
        self.W, self.T = W, T

    def push(self, z, i):
        """Add the reflector that zeroes ``z[i+1:]``; return the new ``z[i]``."""
        j = self.count
        if j == self.W.shape[1]:
            self._grow()
        tail = z[i:]
        norm = np.linalg.norm(tail)
        alpha = 0.0
        if norm > 0.0:
            alpha = -norm if tail[0] >= 0 else norm
            w = np.zeros(self.size)
            w[i:] = tail
            w[i] -= alpha
            w /= np.linalg.norm(w)
            if j > 0:
                self.T[:j, j] = -2.0 * (self.T[:j, :j] @ (self.W[i:, :j].T @ w[i:]))
            self.T[j, j] = 2.0
            self.W[:, j] = w
        self.count += 1
        return alpha

    def apply(self, z):
        """``Q z``."""
        W, T = self.W[:, : self.count], self.T[: self.count, : self.count]
        return z - W @ (T @ (W.T @ z))

    def apply_T(self, z):
        """``Q^T z = P_j ... P_0 z``."""
        W, T = self.W[:, : self.count], self.T[: self.count, : self.count]
        return z - W @ (T.T @ (W.T @ z))

    def basis_vector(self, m):
        e = np.zeros(self.size)
        e[m] = 1.0
        return self.apply(e)

    def combine(self, y):
        """``sum_i y_i v_i``."""
        z = np.zeros(self.size)
        z[: len(y)] = y
        return self.apply(z)


def _check_finite(z):
    if not np.all(np.isfinite(z)):
        raise NumericError("operator returned NaN or Inf")


def gmres(apply_op, b, tol=1e-10, max_iter=None, keep_basis=False):
    """Solve ``op(x) = b`` from a zero initial guess.

    Returns ``(x, KrylovReport)``.  If ``max_iter`` steps are taken without
    reaching ``tol`` the best iterate is returned with ``converged=False``.
    """
    start = time.perf_counter()
    b = np.asarray(b, dtype=float)
    size = b.shape[0]
    if max_iter is None:
        max_iter = size
    max_iter = min(max_iter, size)
    _check_finite(b)

    beta = np.linalg.norm(b)
    if beta == 0.0:
        return np.zeros(size), KrylovReport(0, [0.0], True, time.perf_counter() - start, 0.0)

    refl = _Reflectors(size)
    z = b.copy()
    g = [refl.push(z, 0)]
    R_cols = []  # columns of the rotated Hessenberg matrix
    cs, sn = [], []
    history = [1.0]
    hnorm = 0.0
    j = -1
    for j in range(max_iter):
        v = refl.basis_vector(j)
        z = np.asarray(apply_op(v), dtype=float)
        _check_finite(z)
        z = refl.apply_T(z)
        h = np.zeros(j + 2)
        h[: j + 1] = z[: j + 1]
        h[j + 1] = refl.push(z, j + 1) if j + 1 < size else 0.0
        hnorm = max(hnorm, np.linalg.norm(h))
        breakdown = abs(h[j + 1]) <= BREAKDOWN_TOL * hnorm
        if breakdown:
            h[j + 1] = 0.0

        # previous Givens rotations, then a new one to annihilate h[j+1]
        for i in range(j):
            h[i], h[i + 1] = cs[i] * h[i] + sn[i] * h[i + 1], -sn[i] * h[i] + cs[i] * h[i + 1]
        denom = np.hypot(h[j], h[j + 1])
        if denom == 0.0:
            cs.append(1.0)
            sn.append(0.0)
        else:
            cs.append(h[j] / denom)
            sn.append(h[j + 1] / denom)
        h[j], h[j + 1] = denom, 0.0
        g.append(-sn[j] * g[j])
        g[j] = cs[j] * g[j]
        R_cols.append(h[: j + 1])

        res = abs(g[j + 1]) / beta
        history.append(res)
        if res <= tol or breakdown:
            break

    iters = j + 1
    R = np.zeros((iters, iters))
    for i, col in enumerate(R_cols):
        R[: i + 1, i] = col
    y = np.zeros(iters)
    # back substitution; zero pivots only occur for singular (consistent) systems
    for i in range(iters - 1, -1, -1):
        if R[i, i] != 0.0:
            y[i] = (g[i] - R[i, i + 1:iters] @ y[i + 1:]) / R[i, i]
    x = refl.combine(y)

    true_res = np.linalg.norm(b - apply_op(x)) / beta
    converged = history[-1] <= tol
    if converged and true_res > 10 * tol:
        log.warning("true residual %.3e exceeds 10x tolerance %.1e", true_res, tol)
    basis = None
    if keep_basis:
        basis = np.column_stack([refl.basis_vector(i) for i in range(iters)])
    report = KrylovReport(iterations=iters, rel_residual_history=history, converged=converged,
                          wall_time=time.perf_counter() - start, true_rel_residual=true_res,
                          basis=basis)
    return x, report


def gmres_right_preconditioned(apply_op, apply_Minv, b, tol=1e-10, max_iter=None, keep_basis=False):
    """GMRES on ``v -> op(Minv(v))`` followed by ``x = Minv(x')``.

    With right preconditioning the residual GMRES minimises is the residual of
    the original system, so the reported history is the true one.
    """
    xp, report = gmres(lambda v: apply_op(apply_Minv(v)), b, tol=tol, max_iter=max_iter,
                       keep_basis=keep_basis)
    return apply_Minv(xp), report
