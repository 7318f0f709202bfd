"""Penalty collocation (SMPM) operator for the Poisson-Neumann problem.

The discrete operator is split as ``L = A + E B``:

* ``A`` is block diagonal over the vertical strips.  A strip block holds the
  collocation Laplacian of its elements, the self part ``tau (I + n.grad)``
  of every element-boundary penalty, the coupling to vertical neighbours
  inside the strip and the Neumann boundary rows.
* ``B`` maps a grid function to the interface unknowns: the entry for an
  interface node is ``-tau (I + n.grad)`` of the neighbouring strip's trace,
  with ``n`` the outward normal of the strip that owns the node.

Corner nodes accumulate the penalties of both faces they sit on.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import AssemblyError
from .mesh import Decomposition, Mesh

FACES = ("W", "E", "S", "N")


def penalty_tau(n, h_x, h_z, c_tau=1.0):
    """Penalty weight ``c_tau * n**2 / min(h_x, h_z)``."""
    return c_tau * n * n / min(h_x, h_z)


def element_derivatives(mesh):
    """x- and z-derivative matrices acting on one element's ``n*n`` nodes."""
    n, D = mesh.n, mesh.basis.diff
    eye = np.eye(n)
    Dx = (2.0 / mesh.h_x) * np.kron(D, eye)
    Dz = (2.0 / mesh.h_z) * np.kron(eye, D)
    return Dx, Dz


def face_nodes(n, face):
    """Local element indices of the ``n`` nodes on a face, ordered along the face."""
    t = np.arange(n)
    return {
        "W": 0 * n + t,
        "E": (n - 1) * n + t,
        "S": t * n,
        "N": t * n + n - 1,
    }[face]


def normal_derivative_rows(Dx, Dz, n, face):
    """Rows of ``n.grad`` at the nodes of ``face`` (outward normal)."""
    idx = face_nodes(n, face)
    return {"W": -Dx, "E": Dx, "S": -Dz, "N": Dz}[face][idx]


OPPOSITE = {"W": "E", "E": "W", "S": "N", "N": "S"}


@dataclass
class SmpmOperator:
    mesh: Mesh = field(repr=False)
    dec: Decomposition = field(repr=False)
    tau: float
    blocks: list = field(repr=False)  # unique strip blocks
    block_id: np.ndarray = field(repr=False)  # strip -> index into ``blocks``
    B: sp.csr_matrix = field(repr=False)

    @property
    def r(self):
        return self.mesh.r

    @property
    def k(self):
        return self.dec.k

    @property
    def A_blocks(self):
        return [self.blocks[g] for g in self.block_id]

    def strips_of_block(self, g):
        return np.flatnonzero(self.block_id == g)

    def apply_A(self, u):
        u = np.asarray(u)
        m_x, s = self.mesh.m_x, self.mesh.strip_size
        U = u.reshape((m_x, s) + u.shape[1:])
        out = np.empty(U.shape, dtype=np.result_type(u, float))
        for g, block in enumerate(self.blocks):
            ids = self.strips_of_block(g)
            out[ids] = np.einsum("pq,iq...->ip...", block, U[ids])
        return out.reshape(u.shape)

    def apply_B(self, u):
        return self.B @ u

    def apply_L(self, u):
        u = np.asarray(u)
        if u.shape[0] != self.r:
            raise ValueError(f"grid vector has length {u.shape[0]}, expected {self.r}")
        return self.apply_A(u) + self.dec.apply_E(self.B @ u)

    def dense_A(self):
        return sla.block_diag(*self.A_blocks)

    def dense_L(self):
        E = sp.csr_matrix((np.ones(self.k), (self.dec.interface_nodes, np.arange(self.k))),
                          shape=(self.r, self.k))
        return self.dense_A() + (E @ self.B).toarray()


def _strip_block(mesh, tau, west_boundary, east_boundary):
    n, m_z = mesh.n, mesh.m_z
    nn = n * n
    Dx, Dz = element_derivatives(mesh)
    lap = Dx @ Dx + Dz @ Dz
    ident = np.eye(nn)
    A = np.kron(np.eye(m_z), lap)
    for iz in range(m_z):
        own = slice(iz * nn, (iz + 1) * nn)
        for face in FACES:
            idx = iz * nn + face_nodes(n, face)
            dn = normal_derivative_rows(Dx, Dz, n, face)
            on_boundary = {
                "W": west_boundary,
                "E": east_boundary,
                "S": iz == 0,
                "N": iz == m_z - 1,
            }[face]
            if on_boundary:
                A[idx, own] += tau * dn
                continue
            A[idx, own] += tau * (ident[face_nodes(n, face)] + dn)
            if face in ("S", "N"):
                jz = iz - 1 if face == "S" else iz + 1
                nb = slice(jz * nn, (jz + 1) * nn)
                nb_idx = face_nodes(n, OPPOSITE[face])
                # own normal applied to the neighbour's gradient
                nb_dn = {"S": -Dz, "N": Dz}[face][nb_idx]
                A[idx, nb] -= tau * (ident[nb_idx] + nb_dn)
    return A


def assemble_A(mesh, tau):
    """Strip blocks of ``A``, deduplicated.

    On a uniform mesh a strip block only depends on whether its west/east
    faces are physical boundaries, so at most three distinct blocks exist.
    Returns ``(blocks, block_id)``.
    """
    keys = [(ix == 0, ix == mesh.m_x - 1) for ix in range(mesh.m_x)]
    unique = list(dict.fromkeys(keys))
    blocks = [_strip_block(mesh, tau, *key) for key in unique]
    block_id = np.array([unique.index(key) for key in keys], dtype=int)
    return blocks, block_id


def assemble_B(mesh, dec, tau):
    n, m_z = mesh.n, mesh.m_z
    nn = n * n
    Dx, _ = element_derivatives(mesh)
    rows, cols, vals = [], [], []
    t = 0
    for j in range(dec.n_interfaces):
        # left side: strip j east faces read strip j+1 west faces, normal +x
        # right side: strip j+1 west faces read strip j east faces, normal -x
        for nb_strip, nb_face, sign in ((j + 1, "W", 1.0), (j, "E", -1.0)):
            nb_idx = face_nodes(n, nb_face)
            stencil = -tau * (np.eye(nn)[nb_idx] + sign * Dx[nb_idx])
            for iz in range(m_z):
                base = mesh.node_index(nb_strip, iz, 0, 0)
                for q in range(n):
                    nz = np.flatnonzero(stencil[q])
                    rows.append(np.full(nz.size, t))
                    cols.append(base + nz)
                    vals.append(stencil[q, nz])
                    t += 1
    if t == 0:
        return sp.csr_matrix((0, mesh.r))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(dec.k, mesh.r))


def build_operator(mesh, dec, tau=None, c_tau=1.0):
    if tau is None:
        tau = penalty_tau(mesh.n, mesh.h_x, mesh.h_z, c_tau)
    blocks, block_id = assemble_A(mesh, tau)
    return SmpmOperator(mesh=mesh, dec=dec, tau=float(tau), blocks=blocks,
                        block_id=block_id, B=assemble_B(mesh, dec, tau))


def neumann_rhs(mesh, tau, f, grad):
    """Right-hand side ``f + tau * g`` with ``g = n.grad u`` on each boundary face.

    ``f`` holds nodal source values (length ``r``); ``grad`` holds the exact
    gradient ``(du/dx, du/dz)`` at the nodes, shape ``(r, 2)``.  Only its
    boundary values are used.
    """
    n = mesh.n
    nn = n * n
    rhs = np.array(f, dtype=float, copy=True)
    grad = np.asarray(grad, dtype=float)
    for ix in range(mesh.m_x):
        for iz in range(mesh.m_z):
            base = mesh.element_index(ix, iz) * nn
            faces = []
            if ix == 0:
                faces.append(("W", 0, -1.0))
            if ix == mesh.m_x - 1:
                faces.append(("E", 0, 1.0))
            if iz == 0:
                faces.append(("S", 1, -1.0))
            if iz == mesh.m_z - 1:
                faces.append(("N", 1, 1.0))
            for face, comp, sign in faces:
                idx = base + face_nodes(n, face)
                rhs[idx] += tau * sign * grad[idx, comp]
    return rhs


class LocalSolver:
    """LU factors of the strip blocks of ``A`` (one per distinct block)."""

    def __init__(self, op):
        self.op = op
        self.factors = []
        for g, block in enumerate(op.blocks):
            lu, piv = sla.lu_factor(block, check_finite=True)
            pivots = np.abs(np.diag(lu))
            if pivots.min() <= np.finfo(float).eps * block.shape[0] * max(pivots.max(), 1.0):
                strip = int(op.strips_of_block(g)[0])
                raise AssemblyError(f"local block of subdomain {strip} is singular")
            self.factors.append((lu, piv))

    def _apply(self, u, trans):
        u = np.asarray(u)
        m_x, s = self.op.mesh.m_x, self.op.mesh.strip_size
        U = u.reshape((m_x, s) + u.shape[1:])
        out = np.empty(U.shape, dtype=np.result_type(u, float))
        for g, fac in enumerate(self.factors):
            ids = self.op.strips_of_block(g)
            rhs = np.moveaxis(U[ids], 0, -1).reshape(s, -1)
            sol = sla.lu_solve(fac, rhs, trans=trans)
            out[ids] = np.moveaxis(sol.reshape((s,) + U.shape[2:] + (ids.size,)), -1, 0)
        return out.reshape(u.shape)

    def solve_strip(self, g, rhs):
        """Solve with distinct block ``g`` for a ``(strip_size, m)`` right-hand side."""
        return sla.lu_solve(self.factors[g], rhs)

    def solve(self, u):
        """``A^{-1} u`` for a grid vector or a stack of grid vectors (columns)."""
        return self._apply(u, 0)

    def solve_T(self, u):
        """``A^{-T} u``."""
        return self._apply(u, 1)
