"""Schur complement ``S = I + B A^{-1} E`` on the interface unknowns.

The non-identity part of ``S`` is stored interface by interface: block
``S_j`` holds the columns of interface ``j`` restricted to the ``4*n*m_z``
rows it can reach, namely the left side of ``j-1``, both sides of ``j`` and
the right side of ``j+1``.  Rows that fall outside the grid (for the first
and last interfaces) are zero padding.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .operator import LocalSolver


def _block_rows(dec):
    """Row index map of every interface block; -1 marks padding."""
    d, w = dec.n_interfaces, dec.side_size
    rows = -np.ones((d, 4 * w), dtype=np.intp)
    for j in range(d):
        if j > 0:
            rows[j, :w] = np.arange(*dec.left_slice(j - 1).indices(dec.k))
        rows[j, w:3 * w] = dec.interface_indices(j)
        if j < d - 1:
            rows[j, 3 * w:] = np.arange(*dec.right_slice(j + 1).indices(dec.k))
    return rows


@dataclass
class SchurSystem:
    op: object = field(repr=False)
    local: object = field(repr=False)
    blocks: np.ndarray = field(repr=False)  # (d, 4w, 2w)
    block_rows: np.ndarray = field(repr=False)  # (d, 4w)
    apply_count: int = 0  # matrix-vector products since the last reset

    def reset_count(self):
        self.apply_count = 0

    @property
    def dec(self):
        return self.op.dec

    @property
    def k(self):
        return self.op.dec.k

    @property
    def d(self):
        return self.op.dec.n_interfaces

    @property
    def dtype(self):
        return self.blocks.dtype

    def apply(self, v):
        """``S v`` for a length-``k`` vector or a ``(k, m)`` stack."""
        v = np.asarray(v)
        if v.shape[0] != self.k:
            raise ValueError(f"interface vector has length {v.shape[0]}, expected {self.k}")
        self.apply_count += 1 if v.ndim == 1 else int(np.prod(v.shape[1:]))
        d, w2 = self.d, self.dec.interface_size
        V = v.reshape((d, w2) + v.shape[1:])
        contrib = np.einsum("jrc,jc...->jr...", self.blocks, V)
        out = v.astype(np.result_type(v, self.blocks), copy=True)
        valid = self.block_rows >= 0
        np.add.at(out, self.block_rows[valid], contrib[valid])
        return out

    __call__ = apply

    def apply_definition(self, v):
        """``v + B A^{-1} E v`` through the local solver (reference path)."""
        dec = self.dec
        return v + self.op.B @ self.local.solve(dec.apply_E(v))

    def to_sparse(self):
        d, w2 = self.d, self.dec.interface_size
        rows = np.broadcast_to(self.block_rows[:, :, None], self.blocks.shape)
        cols = np.broadcast_to(np.arange(self.k).reshape(d, 1, w2), self.blocks.shape)
        valid = rows >= 0
        mat = sp.coo_matrix((self.blocks[valid], (rows[valid], cols[valid])),
                            shape=(self.k, self.k))
        return (mat + sp.identity(self.k, dtype=self.blocks.dtype)).tocsr()

    def dense(self):
        return self.to_sparse().toarray()

    def frobenius_norm(self):
        return sp.linalg.norm(self.to_sparse())

    def submatrix(self, interfaces):
        """Dense ``S`` restricted to the rows and columns of the given interfaces."""
        dec = self.dec
        idx = np.concatenate([dec.interface_indices(j) for j in interfaces])
        pos = -np.ones(self.k, dtype=np.intp)
        pos[idx] = np.arange(idx.size)
        out = np.eye(idx.size, dtype=self.blocks.dtype)
        w2 = dec.interface_size
        for c, j in enumerate(interfaces):
            rows = self.block_rows[j]
            keep = rows >= 0
            keep[keep] = pos[rows[keep]] >= 0
            out[pos[rows[keep]], c * w2:(c + 1) * w2] += self.blocks[j][keep]
        return out

    def interface_block(self, j):
        """``S_j`` of shape ``(4*n*m_z, 2*n*m_z)`` without the identity."""
        return self.blocks[j]

    def rhs(self, f):
        """``b_S = B A^{-1} f``."""
        f = np.asarray(f)
        if f.shape[0] != self.op.r:
            raise ValueError(f"grid vector has length {f.shape[0]}, expected {self.op.r}")
        return self.op.B @ self.local.solve(f)

    def recover(self, f, x_S):
        """``u = A^{-1} (f - E x_S)``."""
        return self.local.solve(np.asarray(f) - self.dec.apply_E(x_S))

    def dump(self, path):
        """Write the interface blocks as a flat little-endian float64 file.

        Header: four little-endian int64 values ``n, m_x, m_z, k``.
        """
        mesh = self.op.mesh
        with open(path, "wb") as fh:
            fh.write(struct.pack("<4q", mesh.n, mesh.m_x, mesh.m_z, self.k))
            fh.write(np.ascontiguousarray(self.blocks, dtype="<f8").tobytes())


def load_blocks(path):
    """Read a file written by :meth:`SchurSystem.dump`; returns ``(header, blocks)``."""
    with open(path, "rb") as fh:
        n, m_x, m_z, k = struct.unpack("<4q", fh.read(32))
        data = np.frombuffer(fh.read(), dtype="<f8")
    w = n * m_z
    header = {"n": n, "m_x": m_x, "m_z": m_z, "k": k}
    return header, data.reshape(m_x - 1, 4 * w, 2 * w)


def _strip_columns(dec, i):
    """Interface unknowns located in strip ``i``: right side of ``i-1`` and left side of ``i``."""
    cols = []
    if i > 0:
        cols.append(np.arange(*dec.right_slice(i - 1).indices(dec.k)))
    if i < dec.n_interfaces:
        cols.append(np.arange(*dec.left_slice(i).indices(dec.k)))
    return np.concatenate(cols)


def assemble_schur(op, local=None):
    """Assemble the interface blocks of ``S`` column by column.

    Strips that share a local block (same ``op.block_id``) see identical
    ``A_i^{-1} E_i`` columns, so each distinct block is solved once.
    ``local`` defaults to LU factors of ``A``; any object with
    ``solve``, ``solve_T`` and ``solve_strip`` may be supplied instead.
    """
    if local is None:
        local = LocalSolver(op)
    dec, mesh = op.dec, op.mesh
    d, w = dec.n_interfaces, dec.side_size
    s = mesh.strip_size
    block_rows = _block_rows(dec)
    valid = block_rows >= 0
    blocks = np.zeros((d, 4 * w, 2 * w))
    B = op.B.tocsc()
    cache = {}
    for i in range(mesh.m_x):
        cols = _strip_columns(dec, i)
        key = op.block_id[i]
        if key not in cache:
            rhs = np.zeros((s, cols.size))
            rhs[dec.interface_nodes[cols] - i * s, np.arange(cols.size)] = 1.0
            cache[key] = np.real_if_close(local.solve_strip(key, rhs))
        G = np.asarray(B[:, mesh.strip_slice(i)] @ cache[key])
        off = 0
        if i > 0:
            j = i - 1
            blocks[j, valid[j], w:] = G[block_rows[j, valid[j]], :w]
            off = w
        if i < d:
            blocks[i, valid[i], :w] = G[block_rows[i, valid[i]], off:off + w]
    return SchurSystem(op=op, local=local, blocks=blocks, block_rows=block_rows)
