"""Dense reference computations used to validate the iterative path.

Everything here is deliberately independent of the production assembly: the
monolithic operator is built node by node from one-dimensional derivative
stencils, null vectors come from a dense SVD, and the projected system is
solved with a least-squares factorisation.
"""

import numpy as np

from .errors import OracleGuardError

MAX_DENSE_NODES = 5000


def guard(r, limit=MAX_DENSE_NODES):
    if r > limit:
        raise OracleGuardError(f"dense oracle refused: r={r} exceeds {limit}")


def dense_smpm_matrix(mesh, tau):
    """Monolithic penalty collocation matrix assembled node by node."""
    guard(mesh.r)
    n, m_x, m_z = mesh.n, mesh.m_x, mesh.m_z
    D = mesh.basis.diff
    D2 = D @ D
    sx, sz = 2.0 / mesh.h_x, 2.0 / mesh.h_z
    L = np.zeros((mesh.r, mesh.r))
    idx = mesh.node_index

    def d_dx(row, ix, iz, a, b, scale):
        for p in range(n):
            L[row, idx(ix, iz, p, b)] += scale * sx * D[a, p]

    def d_dz(row, ix, iz, a, b, scale):
        for q in range(n):
            L[row, idx(ix, iz, a, q)] += scale * sz * D[b, q]

    for ix in range(m_x):
        for iz in range(m_z):
            for a in range(n):
                for b in range(n):
                    row = idx(ix, iz, a, b)
                    for p in range(n):
                        L[row, idx(ix, iz, p, b)] += sx * sx * D2[a, p]
                    for q in range(n):
                        L[row, idx(ix, iz, a, q)] += sz * sz * D2[b, q]
                    # (face present, neighbour element, neighbour node, normal sign, direction)
                    faces = []
                    if a == 0:
                        faces.append((ix - 1 >= 0, (ix - 1, iz), (n - 1, b), -1.0, "x"))
                    if a == n - 1:
                        faces.append((ix + 1 < m_x, (ix + 1, iz), (0, b), 1.0, "x"))
                    if b == 0:
                        faces.append((iz - 1 >= 0, (ix, iz - 1), (a, n - 1), -1.0, "z"))
                    if b == n - 1:
                        faces.append((iz + 1 < m_z, (ix, iz + 1), (a, 0), 1.0, "z"))
                    deriv = {"x": d_dx, "z": d_dz}
                    for interior, (jx, jz), (c, e), sign, axis in faces:
                        if interior:
                            L[row, row] += tau
                            deriv[axis](row, ix, iz, a, b, tau * sign)
                            L[row, idx(jx, jz, c, e)] -= tau
                            deriv[axis](row, jx, jz, c, e, -tau * sign)
                        else:
                            deriv[axis](row, ix, iz, a, b, tau * sign)
    return L


def dense_left_null_vector(L):
    """Unit left singular vector of the smallest singular value."""
    U, s, _ = np.linalg.svd(L)
    u = U[:, -1]
    return u if u[np.argmax(np.abs(u))] >= 0 else -u


def dense_projected_solve(L, f):
    """Least-squares solution of ``L u = f - u_L u_L^T f`` with zero mean."""
    guard(L.shape[0])
    u_L = dense_left_null_vector(L)
    f_tilde = f - u_L * (u_L @ f)
    u = np.linalg.lstsq(L, f_tilde, rcond=None)[0]
    return u - u.mean(), f_tilde


def mean_removed(u):
    return u - np.mean(u)


def relative_inf_error(u, ref):
    """``||u - ref||_inf / ||ref||_inf`` after removing both means."""
    a, b = mean_removed(u), mean_removed(ref)
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
