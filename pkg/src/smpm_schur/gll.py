"""Gauss-Lobatto-Legendre nodes, weights and collocation derivative matrix."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidOrderError

NEWTON_TOL = 1e-14
NEWTON_MAXITER = 100


@dataclass(frozen=True)
class GllBasis:
    n: int
    nodes: np.ndarray
    weights: np.ndarray
    diff: np.ndarray = field(repr=False)


def _legendre_pair(order, x):
    """Return P_order(x) and P_{order-1}(x) by the three-term recurrence."""
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, order + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    return p, p_prev


def gll_nodes_weights(n):
    """Nodes and quadrature weights of the ``n``-point GLL rule on [-1, 1].

    The interior nodes are the roots of P'_{n-1}; they are found by Newton
    iteration started from the Chebyshev-Gauss-Lobatto points.
    """
    if int(n) != n or n < 2:
        raise InvalidOrderError(f"GLL rule needs n >= 2 points, got {n}")
    n = int(n)
    order = n - 1
    if n == 2:
        return np.array([-1.0, 1.0]), np.array([1.0, 1.0])

    x = -np.cos(np.pi * np.arange(n) / order)
    for _ in range(NEWTON_MAXITER):
        p, p_prev = _legendre_pair(order, x)
        # Newton step for (1 - x^2) P'_N(x), written through P_N and P_{N-1}
        step = (x * p - p_prev) / (n * p)
        x = x - step
        if np.max(np.abs(step)) <= NEWTON_TOL:
            break
    else:
        raise RuntimeError(f"GLL Newton iteration did not converge for n={n}")

    # enforce the exact symmetry and endpoints
    x = 0.5 * (x - x[::-1])
    x[0], x[-1] = -1.0, 1.0
    if n % 2 == 1:
        x[order // 2] = 0.0
    p, _ = _legendre_pair(order, x)
    w = 2.0 / (order * n * p**2)
    return x, w


def diff_matrix(nodes):
    """Collocation derivative matrix, ``D[i, j] = l_j'(x_i)``.

    Off-diagonal entries use barycentric weights; the diagonal is set by the
    negative-sum trick so that every row annihilates constants exactly.
    """
    x = np.asarray(nodes, dtype=float)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    # barycentric weights up to a common factor; log-free since n stays modest
    lam = 1.0 / np.prod(dx, axis=1)
    D = (lam[None, :] / lam[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def gll_basis(n):
    nodes, weights = gll_nodes_weights(n)
    return GllBasis(n=int(n), nodes=nodes, weights=weights, diff=diff_matrix(nodes))
