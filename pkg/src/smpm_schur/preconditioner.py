"""Non-overlapping block-Jacobi preconditioner for the Schur system."""

import numpy as np
import scipy.linalg as sla

from .errors import PreconditionerError


class BlockJacobi:
    """Diagonal blocks of ``S`` pairing interfaces (0, 1), (2, 3), ...

    Each block spans two interfaces (``4*n*m_z`` unknowns); with an odd number
    of interfaces the last block covers a single one.  Couplings between
    blocks are dropped.
    """

    def __init__(self, sys):
        self.k = sys.k
        d = sys.d
        self.groups = [list(range(j, min(j + 2, d))) for j in range(0, d, 2)]
        self.slices = []
        self.blocks = []
        self.factors = []
        w2 = sys.dec.interface_size
        for grp in self.groups:
            block = sys.submatrix(grp)
            lu, piv = sla.lu_factor(block)
            pivots = np.abs(np.diag(lu))
            if pivots.min() <= np.finfo(float).eps * block.shape[0] * pivots.max():
                raise PreconditionerError(f"block-Jacobi block for interfaces {grp} is singular")
            self.blocks.append(block)
            self.factors.append((lu, piv))
            self.slices.append(slice(grp[0] * w2, (grp[-1] + 1) * w2))

    def __len__(self):
        return len(self.blocks)

    def apply_inverse(self, v):
        v = np.asarray(v)
        out = np.empty(v.shape, dtype=np.result_type(v, float))
        for sl, fac in zip(self.slices, self.factors):
            out[sl] = sla.lu_solve(fac, v[sl])
        return out

    __call__ = apply_inverse

    def dense(self):
        return sla.block_diag(*self.blocks)


def build_block_jacobi(sys):
    return BlockJacobi(sys)
