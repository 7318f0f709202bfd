"""Cartesian element mesh, strip decomposition and interface scatter/gather.

Node numbering is element-major with element index ``ix * m_z + iz`` and,
inside an element, ``a * n + b`` where ``a`` is the x-index and ``b`` the
z-index of the GLL node.  With this layout every vertical strip of elements
(a subdomain) owns a contiguous range of ``n**2 * m_z`` global indices.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError
from .gll import GllBasis, gll_basis


@dataclass(frozen=True)
class Mesh:
    n: int
    m_x: int
    m_z: int
    l_x: float
    l_z: float
    basis: GllBasis = field(repr=False)
    node_coords: np.ndarray = field(repr=False)

    @property
    def h_x(self):
        return self.l_x / self.m_x

    @property
    def h_z(self):
        return self.l_z / self.m_z

    @property
    def eta(self):
        """Element aspect ratio width / height."""
        return self.h_x / self.h_z

    @property
    def r(self):
        return self.n * self.n * self.m_x * self.m_z

    @property
    def n_elements(self):
        return self.m_x * self.m_z

    @property
    def strip_size(self):
        return self.n * self.n * self.m_z

    def element_index(self, ix, iz):
        return ix * self.m_z + iz

    def element_of_node(self):
        return np.repeat(np.arange(self.n_elements), self.n * self.n)

    def node_index(self, ix, iz, a, b):
        """Global index of local GLL node ``(a, b)`` of element ``(ix, iz)``."""
        n = self.n
        return (ix * self.m_z + iz) * n * n + a * n + b

    def neighbors(self, ix, iz):
        """Element neighbours as a dict with keys 'W', 'E', 'S', 'N' (None at the boundary)."""
        return {
            "W": self.element_index(ix - 1, iz) if ix > 0 else None,
            "E": self.element_index(ix + 1, iz) if ix < self.m_x - 1 else None,
            "S": self.element_index(ix, iz - 1) if iz > 0 else None,
            "N": self.element_index(ix, iz + 1) if iz < self.m_z - 1 else None,
        }

    def strip_slice(self, i):
        s = self.strip_size
        return slice(i * s, (i + 1) * s)


def build_mesh(n, m_x, m_z, l_x, l_z):
    """Uniform ``m_x`` by ``m_z`` element grid on ``[-l_x/2, l_x/2] x [-l_z/2, l_z/2]``."""
    if n < 2 or m_x < 1 or m_z < 1:
        raise MeshError(f"need n >= 2 and positive element counts, got n={n} m_x={m_x} m_z={m_z}")
    if not (l_x > 0 and l_z > 0):
        raise MeshError(f"domain extents must be positive, got l_x={l_x} l_z={l_z}")
    basis = gll_basis(n)
    h_x, h_z = l_x / m_x, l_z / m_z
    xi = basis.nodes

    ix, iz, a, b = np.meshgrid(np.arange(m_x), np.arange(m_z), np.arange(n), np.arange(n),
                               indexing="ij")
    x = -0.5 * l_x + h_x * (ix + 0.5 * (xi[a] + 1.0))
    z = -0.5 * l_z + h_z * (iz + 0.5 * (xi[b] + 1.0))
    coords = np.column_stack([x.ravel(), z.ravel()])
    return Mesh(n=int(n), m_x=int(m_x), m_z=int(m_z), l_x=float(l_x), l_z=float(l_z),
                basis=basis, node_coords=coords)


@dataclass(frozen=True)
class Decomposition:
    """Vertical-strip subdomains and the interface index sets between them.

    ``interface_nodes`` holds the global node index of every interface
    unknown, interface by interface.  Within interface ``j`` (between strips
    ``j`` and ``j+1``) the first ``n*m_z`` entries are the nodes on the left
    side, bottom to top, followed by the right-side nodes bottom to top.
    """

    mesh: Mesh = field(repr=False)
    interface_nodes: np.ndarray = field(repr=False)

    @property
    def n_interfaces(self):
        return max(self.mesh.m_x - 1, 0)

    @property
    def side_size(self):
        return self.mesh.n * self.mesh.m_z

    @property
    def interface_size(self):
        return 2 * self.side_size

    @property
    def k(self):
        return self.interface_nodes.size

    def interface_slice(self, j):
        w = self.interface_size
        return slice(j * w, (j + 1) * w)

    def interface_indices(self, j):
        return np.arange(j * self.interface_size, (j + 1) * self.interface_size)

    def left_slice(self, j):
        w = self.interface_size
        return slice(j * w, j * w + self.side_size)

    def right_slice(self, j):
        w = self.interface_size
        return slice(j * w + self.side_size, (j + 1) * w)

    def coarse_coordinates(self):
        """Mean x-coordinate of every interface (diagnostic only)."""
        x = self.mesh.node_coords[:, 0]
        return np.array([x[self.interface_nodes[self.interface_slice(j)]].mean()
                         for j in range(self.n_interfaces)])

    def apply_E(self, v):
        """Scatter interface values into a zero full-grid vector."""
        v = np.asarray(v)
        if v.shape[0] != self.k:
            raise ValueError(f"interface vector has length {v.shape[0]}, expected {self.k}")
        out = np.zeros((self.mesh.r,) + v.shape[1:], dtype=v.dtype)
        out[self.interface_nodes] = v
        return out

    def apply_Et(self, u):
        """Gather the interface values of a full-grid vector."""
        u = np.asarray(u)
        if u.shape[0] != self.mesh.r:
            raise ValueError(f"grid vector has length {u.shape[0]}, expected {self.mesh.r}")
        return u[self.interface_nodes].copy()


def build_decomposition(mesh):
    n, m_z = mesh.n, mesh.m_z
    iz, b = np.meshgrid(np.arange(m_z), np.arange(n), indexing="ij")
    iz, b = iz.ravel(), b.ravel()
    parts = []
    for j in range(mesh.m_x - 1):
        parts.append(mesh.node_index(j, iz, n - 1, b))
        parts.append(mesh.node_index(j + 1, iz, 0, b))
    nodes = np.concatenate(parts) if parts else np.zeros(0, dtype=int)
    return Decomposition(mesh=mesh, interface_nodes=nodes.astype(np.intp))
