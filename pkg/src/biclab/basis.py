"""Fock bases for a bosonic chain with sites -L..L.

States of a fixed-N sector are stored as rows of an integer occupation
array, ordered lexicographically *descending* when read from site -L to
site +L, so that ``(N, 0, ..., 0)`` has rank 0 and ``(0, ..., 0, N)`` has
rank ``dim - 1``.  Ranks are computed with the combinatorial number system,
so no hash table is needed in either direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp

DEFAULT_MAX_DIM = 5_000_000
_INT64_MAX = np.iinfo(np.int64).max


class Boundary(str, Enum):
    PERIODIC = "periodic"
    OPEN = "open"


class Parity(str, Enum):
    EVEN = "even"
    ODD = "odd"

    @property
    def sign(self) -> int:
        return 1 if self is Parity.EVEN else -1


@dataclass(frozen=True)
class LatticeSpec:
    """Chain of ``M = 2L + 1`` sites labelled ``-L..L``; site 0 is the impurity."""

    L: int
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be an integer >= 1, got {self.L!r}")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def M(self) -> int:
        return 2 * self.L + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.L, self.L + 1)

    def index_of(self, x: int) -> int:
        """Array column of site ``x``."""
        if not -self.L <= x <= self.L:
            raise ValueError(f"site {x} outside [-{self.L}, {self.L}]")
        return x + self.L

    def bonds(self) -> list[tuple[int, int]]:
        """Undirected nearest-neighbour bonds as pairs of column indices."""
        out = [(i, i + 1) for i in range(self.M - 1)]
        if self.boundary is Boundary.PERIODIC:
            out.append((self.M - 1, 0))
        return out


def dimension(M: int, N: int) -> int:
    """Number of ways to put ``N`` bosons on ``M`` sites, ``C(M+N-1, N)``.

    Raises
    ------
    OverflowError
        If the count does not fit in a signed 64-bit rank.
    """
    if M < 1 or N < 0:
        raise ValueError(f"need M >= 1 and N >= 0, got M={M}, N={N}")
    d = comb(M + N - 1, N)
    if d > _INT64_MAX:
        raise OverflowError(f"sector dimension C({M + N - 1}, {N}) exceeds int64")
    return d


@lru_cache(maxsize=None)
def _binomial_table(n_max: int) -> np.ndarray:
    table = np.zeros((n_max + 1, n_max + 1), dtype=np.int64)
    for a in range(n_max + 1):
        for b in range(a + 1):
            table[a, b] = comb(a, b)
    return table


def _enumerate(M: int, N: int) -> np.ndarray:
    # rows in descending lexicographic order
    dtype = np.int8 if N < 128 else np.int32
    cache: dict[tuple[int, int], np.ndarray] = {}

    def block(m: int, n: int) -> np.ndarray:
        key = (m, n)
        if key in cache:
            return cache[key]
        if m == 1:
            out = np.array([[n]], dtype=dtype)
        else:
            parts = []
            for v in range(n, -1, -1):
                tail = block(m - 1, n - v)
                head = np.full((tail.shape[0], 1), v, dtype=dtype)
                parts.append(np.hstack([head, tail]))
            out = np.vstack(parts)
        cache[key] = out
        return out

    return block(M, N)


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Fixed-N Fock basis, optionally reduced to a parity sector.

    For ``parity=None`` the basis vectors are the Fock states in ``states``.
    For a parity sector, basis vector ``k`` is
    ``(|rep_k> + s |partner_k>) / sqrt(2)`` (or ``|rep_k>`` alone when the
    state is its own mirror image, which only occurs in the even sector);
    ``reps`` and ``partners`` hold ranks in the parent fixed-N basis.
    """

    lattice: LatticeSpec
    N: int
    states: np.ndarray
    parity: Parity | None = None
    parent: SectorBasis | None = field(default=None, repr=False)
    reps: np.ndarray | None = field(default=None, repr=False)
    partners: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        if self.parity is None:
            return int(self.states.shape[0])
        return int(self.reps.shape[0])

    def __len__(self) -> int:
        return self.dim

    @property
    def full(self) -> SectorBasis:
        """The parent fixed-N basis (``self`` when no parity reduction)."""
        return self if self.parent is None else self.parent

    def rank(self, states) -> np.ndarray | int:
        """Rank(s) of occupation vector(s) in the fixed-N ordering."""
        arr = np.asarray(states)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr).astype(np.int64)
        M, N = self.lattice.M, self.N
        if arr.shape[1] != M:
            raise ValueError(f"expected occupation vectors of length {M}")
        if np.any(arr < 0) or np.any(arr.sum(axis=1) != N):
            raise ValueError(f"occupation vectors must be non-negative and sum to {N}")
        table = _binomial_table(M + N)
        rem = N - np.cumsum(arr, axis=1) + arr  # particles left before site i
        after = M - 1 - np.arange(M)  # sites after site i
        k = rem - arr - 1  # at most k particles on the later sites, summed over
        valid = (k >= 0) & (after > 0)
        top = np.where(valid, k + after, 0)
        contrib = np.where(valid, table[top, np.where(valid, after, 0)], 0)
        ranks = contrib.sum(axis=1)
        return int(ranks[0]) if single else ranks

    def unrank(self, ranks) -> np.ndarray:
        return self.full.states[ranks]

    @cached_property
    def mirror(self) -> np.ndarray:
        """``mirror[k]`` is the rank of the parity image of parent state ``k``."""
        full = self.full
        return np.asarray(full.rank(full.states[:, ::-1]), dtype=np.int64)

    @cached_property
    def projector(self) -> sp.csr_matrix:
        """Isometry from this basis into the parent Fock basis (``dim_full x dim``)."""
        full = self.full
        if self.parity is None:
            return sp.identity(full.dim, format="csr")
        k = np.arange(self.dim)
        self_sym = self.reps == self.partners
        w = np.where(self_sym, 1.0, 1.0 / np.sqrt(2.0))
        rows = np.concatenate([self.reps, self.partners[~self_sym]])
        cols = np.concatenate([k, k[~self_sym]])
        vals = np.concatenate([w, self.parity.sign * w[~self_sym]])
        return sp.csr_matrix((vals, (rows, cols)), shape=(full.dim, self.dim))

    def to_full(self, vec: np.ndarray) -> np.ndarray:
        """Express coefficient vector(s) in the parent Fock basis."""
        return vec if self.parity is None else self.projector @ vec

    def from_full(self, vec: np.ndarray) -> np.ndarray:
        return vec if self.parity is None else self.projector.T @ vec

    def occupations(self) -> np.ndarray:
        return self.full.states


def enumerate_basis(lattice: LatticeSpec, N: int, max_dim: int = DEFAULT_MAX_DIM) -> SectorBasis:
    """All Fock states with ``N`` bosons on ``lattice`` in descending lex order."""
    d = dimension(lattice.M, N)
    if d > max_dim:
        raise MemoryError(f"sector dimension {d} exceeds cap {max_dim}")
    states = _enumerate(lattice.M, N)
    states.setflags(write=False)
    return SectorBasis(lattice=lattice, N=N, states=states)


def parity_reflect(state) -> np.ndarray:
    """Mirror an occupation vector about site 0 (``n_x <-> n_-x``)."""
    return np.asarray(state)[..., ::-1].copy()


def build_parity_basis(basis: SectorBasis, parity: Parity | str) -> SectorBasis:
    """Symmetry-adapted orthonormal basis of one parity sector of ``basis``."""
    if basis.parity is not None:
        raise ValueError("basis is already parity-reduced")
    parity = Parity(parity)
    mirror = basis.mirror
    k = np.arange(basis.dim)
    keep = k < mirror if parity is Parity.ODD else k <= mirror
    reps = k[keep]
    return SectorBasis(
        lattice=basis.lattice,
        N=basis.N,
        states=basis.states,
        parity=parity,
        parent=basis,
        reps=reps,
        partners=mirror[reps],
    )


def sector(L: int, N: int, parity: Parity | str | None = None,
           boundary: Boundary | str = Boundary.PERIODIC,
           max_dim: int = DEFAULT_MAX_DIM) -> SectorBasis:
    """Shortcut: enumerate the fixed-N basis and optionally reduce by parity."""
    full = enumerate_basis(LatticeSpec(L, Boundary(boundary)), N, max_dim=max_dim)
    return full if parity is None else build_parity_basis(full, parity)
