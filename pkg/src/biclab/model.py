"""Sparse operators of the Bose-Hubbard chain with a central impurity.

    H = -t sum_<xy> (b_x^+ b_y + h.c.) + U/2 sum_x n_x (n_x - 1) + V n_0
      = H0 + t T

All builders return ``scipy.sparse.csr_matrix`` in the requested basis.
Parity-sector operators are obtained as ``S^T A S`` with ``S`` the sector
isometry, which keeps a single assembly path for every basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .basis import SectorBasis


@dataclass(frozen=True)
class ModelParams:
    t: float = 1.0
    U: float = -20.0
    V: float = -10.0


def _restrict(op: sp.spmatrix, basis: SectorBasis) -> sp.csr_matrix:
    if basis.parity is None:
        return sp.csr_matrix(op)
    S = basis.projector
    out = sp.csr_matrix(S.T @ op @ S)
    out.eliminate_zeros()
    return out


def _kinetic_full(full: SectorBasis) -> sp.csr_matrix:
    states = full.states.astype(np.int64)
    rows, cols, vals = [], [], []
    for i, j in full.lattice.bonds():
        # move one boson j -> i; the reverse move is the transpose
        src = np.nonzero(states[:, j] > 0)[0]
        dst_states = states[src].copy()
        amp = np.sqrt(dst_states[:, i] + 1.0) * np.sqrt(dst_states[:, j].astype(float))
        dst_states[:, j] -= 1
        dst_states[:, i] += 1
        dst = full.rank(dst_states)
        rows.append(dst)
        cols.append(src)
        vals.append(-amp)
    if not rows:
        return sp.csr_matrix((full.dim, full.dim))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    half = sp.csr_matrix((v, (r, c)), shape=(full.dim, full.dim))
    return sp.csr_matrix(half + half.T)


def h0_diagonal(params: ModelParams, basis: SectorBasis) -> np.ndarray:
    """Diagonal of ``H0`` on the parent Fock states of ``basis``."""
    n = basis.full.states.astype(np.float64)
    onsite = 0.5 * params.U * np.sum(n * (n - 1.0), axis=1)
    return onsite + params.V * n[:, basis.lattice.index_of(0)]


def build_kinetic(basis: SectorBasis) -> sp.csr_matrix:
    """Hopping operator ``T`` (unit amplitude, negative sign convention)."""
    return _restrict(_kinetic_full(basis.full), basis)


def build_h0(params: ModelParams, basis: SectorBasis) -> sp.csr_matrix:
    return _restrict(sp.diags(h0_diagonal(params, basis), format="csr"), basis)


def build_full_hamiltonian(params: ModelParams, basis: SectorBasis) -> sp.csr_matrix:
    if basis.dim == 0:
        raise ValueError("empty basis")
    full = basis.full
    H = sp.diags(h0_diagonal(params, full), format="csr") + params.t * _kinetic_full(full)
    return _restrict(sp.csr_matrix(H), basis)


def build_number_operator(x: int, basis: SectorBasis) -> sp.csr_matrix:
    col = basis.lattice.index_of(x)
    n = basis.full.states[:, col].astype(np.float64)
    return _restrict(sp.diags(n, format="csr"), basis)


def build_parity_matrix(basis: SectorBasis) -> sp.csr_matrix:
    """Reflection ``P`` as a permutation matrix (diagonal +-1 in a parity sector)."""
    full = basis.full
    k = np.arange(full.dim)
    P = sp.csr_matrix((np.ones(full.dim), (basis.mirror, k)), shape=(full.dim, full.dim))
    return _restrict(P, basis)


def density_matrix_elements(basis: SectorBasis) -> np.ndarray:
    """Occupation table ``n[k, x]`` of the parent Fock states as floats."""
    return basis.full.states.astype(np.float64)


def dump_operator(op: sp.spmatrix, path: str | Path) -> None:
    """Write ``row col value`` lines (upper triangle incl. diagonal when symmetric)."""
    coo = sp.coo_matrix(op)
    symmetric = (abs(op - op.T) > 0).nnz == 0
    mask = coo.row <= coo.col if symmetric else np.ones(coo.nnz, dtype=bool)
    order = np.lexsort((coo.col[mask], coo.row[mask]))
    r, c, v = coo.row[mask][order], coo.col[mask][order], coo.data[mask][order]
    with open(path, "w") as fh:
        fh.write(f"# dim {op.shape[0]} symmetric {int(symmetric)}\n")
        for a, b, val in zip(r, c, v):
            fh.write(f"{a} {b} {val:.17g}\n")


def load_operator(path: str | Path) -> sp.csr_matrix:
    with open(path) as fh:
        header = fh.readline().split()
        dim, symmetric = int(header[2]), bool(int(header[4]))
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((dim, dim))
    r, c, v = data[:, 0].astype(int), data[:, 1].astype(int), data[:, 2]
    op = sp.csr_matrix((v, (r, c)), shape=(dim, dim))
    if symmetric:
        op = op + sp.triu(op, k=1).T
    return sp.csr_matrix(op)
