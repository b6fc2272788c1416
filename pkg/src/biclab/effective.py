"""Second-order effective Hamiltonians in the cluster sectors, a brute-force
perturbation oracle, and the closed-form bound states of the (0,2,2) model.

Sector A, written (0,2,2), holds two doublons at ``x1 < x2`` away from the
impurity, Fock state ``|.. 2_x1 .. 2_x2 ..>`` with energy ``2U``.  Sector B,
written (2,1,1), holds a doublon on the impurity and two single bosons at
``y1 < y2``, energy ``U + 2V``.  Both label sets are :class:`PairConfig`.
The effective models live on an open chain ``-L..L``.

The closed forms follow the elementwise second-order expansion. By default
they include three terms the compact operator forms leave out, each
confirmed by :func:`numeric_second_order`:

- ``end_correction`` in :func:`build_h022`: a doublon on an end site has
  one fewer break-up channel, which adds ``-2t^2/U``.
- ``pair_terms`` in :func:`build_h211`: neighbouring single bosons can
  virtually form a doublon, giving ``-4t^2/U`` on the diagonal and a
  ``-2t^2/U`` shift ``(y, y+1) <-> (y+1, y+2)``.
- ``cross="exact"`` in :func:`build_combined`: the A/B coupling is
  ``4 sqrt(2) t^2 / V``. Both orderings of the two hops reach the same
  final state, which doubles the amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .basis import Boundary, LatticeSpec, SectorBasis, enumerate_basis
from .model import ModelParams, _kinetic_full, h0_diagonal


class Sector(str, Enum):
    A = "A"  # (0,2,2)
    B = "B"  # (2,1,1)
    COMBINED = "combined"


class PerturbationError(ValueError):
    """Vanishing energy denominator: the expansion does not apply."""


@dataclass(frozen=True, order=True)
class PairConfig:
    x1: int
    x2: int

    def __post_init__(self):
        if not self.x1 < self.x2:
            raise ValueError(f"need x1 < x2, got ({self.x1}, {self.x2})")
        if self.x1 == 0 or self.x2 == 0:
            raise ValueError("cluster positions must avoid the impurity site 0")

    def mirror(self) -> PairConfig:
        return PairConfig(-self.x2, -self.x1)


def pair_configs(L: int) -> list[PairConfig]:
    sites = [x for x in range(-L, L + 1) if x != 0]
    return [PairConfig(a, b) for i, a in enumerate(sites) for b in sites[i + 1:]]


@dataclass(frozen=True)
class EffectiveBasis:
    """Ordered configurations; the combined basis lists all A configs then all B configs."""

    sector: Sector
    L: int

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("effective models need L >= 2")
        object.__setattr__(self, "sector", Sector(self.sector))

    @property
    def configs(self) -> list[PairConfig]:
        return pair_configs(self.L)

    @property
    def labels(self) -> list[tuple[Sector, PairConfig]]:
        if self.sector is Sector.COMBINED:
            return [(Sector.A, c) for c in self.configs] + [(Sector.B, c) for c in self.configs]
        return [(self.sector, c) for c in self.configs]

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self) -> dict[tuple[Sector, PairConfig], int]:
        return {lab: k for k, lab in enumerate(self.labels)}

    def parity_matrix(self) -> sp.csr_matrix:
        """Reflection ``(x1, x2) -> (-x2, -x1)`` within each sector."""
        idx = self.index()
        rows = [idx[(s, c.mirror())] for s, c in self.labels]
        return sp.csr_matrix((np.ones(self.dim), (rows, np.arange(self.dim))),
                             shape=(self.dim, self.dim))


def _check(params: ModelParams, *denominators: float):
    for d in denominators:
        if d == 0:
            raise PerturbationError("vanishing denominator in the second-order expansion")


def _hops(c: PairConfig, L: int):
    """Unit moves of either cluster keeping order, staying in range, avoiding site 0."""
    for moved in (0, 1):
        for step in (-1, 1):
            x1, x2 = (c.x1 + step, c.x2) if moved == 0 else (c.x1, c.x2 + step)
            if abs(x1) > L or abs(x2) > L or x1 == 0 or x2 == 0 or x1 >= x2:
                continue
            yield PairConfig(x1, x2)


def build_h022(params: ModelParams, L: int, include_constant: bool = True,
               end_correction: bool = True) -> sp.csr_matrix:
    """Effective Hamiltonian of two doublons, ``2U + H^(2)``.

    ``H^(2) = 4t^2/U + (2t^2/U) sum A_x^+ (A_{x-1} + A_{x+1})
    - (16t^2/U) sum n_x n_{x+1} + sum_{x=+-1} 2t^2/(U - n_x V)``
    with ``A_0 = 0`` on the open chain.  ``end_correction`` adds the
    ``-2t^2/U`` per doublon sitting on ``+-L``.

    Raises
    ------
    PerturbationError
        For ``U = 0`` or ``U = V``.
    """
    t, U, V = params.t, params.U, params.V
    _check(params, U, U - V)
    basis = EffectiveBasis(Sector.A, L)
    idx = basis.index()
    t2 = t * t
    rows, cols, vals = [], [], []
    for (s, c), k in idx.items():
        occ = {c.x1, c.x2}
        diag = 4 * t2 / U
        diag += sum(2 * t2 / (U - V) if x in occ else 2 * t2 / U for x in (-1, 1))
        if c.x2 == c.x1 + 1:
            diag -= 16 * t2 / U
        if end_correction:
            diag -= 2 * t2 / U * sum(1 for x in occ if abs(x) == L)
        if include_constant:
            diag += 2 * U
        rows.append(k)
        cols.append(k)
        vals.append(diag)
        for d in _hops(c, L):
            rows.append(idx[(Sector.A, d)])
            cols.append(k)
            vals.append(2 * t2 / U)
    return sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))


def build_h211(params: ModelParams, L: int, order: int = 2, include_constant: bool = True,
               pair_terms: bool = True) -> sp.csr_matrix:
    """Effective Hamiltonian of two single bosons beside an impurity doublon.

    ``order=1``: ``U + 2V - t sum B_y^+ (B_{y-1} + B_{y+1})`` with ``B_0 = 0``.
    ``order=2`` adds the impurity-assisted terms
    ``t^2 (U-V)/((U+V)(2U+V)) (B_-1^+ B_1 + h.c.)``,
    ``t^2 (8U^2+5UV-V^2)/(V(U+V)(2U+V)) (n_-1 + n_1)`` and ``4t^2/(U+V)``;
    with ``pair_terms`` also the doublon-formation terms of adjacent singles.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    t, U, V = params.t, params.U, params.V
    if order == 2:
        _check(params, V, U + V, 2 * U + V, U)
    basis = EffectiveBasis(Sector.B, L)
    idx = basis.index()
    t2 = t * t
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    for (s, c), k in idx.items():
        diag = U + 2 * V if include_constant else 0.0
        for d in _hops(c, L):
            add(idx[(Sector.B, d)], k, -t)
        if order == 2:
            occ = {c.x1, c.x2}
            diag += 4 * t2 / (U + V)
            n_adj = sum(1 for x in (-1, 1) if x in occ)
            diag += t2 * (8 * U * U + 5 * U * V - V * V) / (V * (U + V) * (2 * U + V)) * n_adj
            hop = t2 * (U - V) / ((U + V) * (2 * U + V))
            for a, b in ((-1, 1), (1, -1)):
                if a in occ and b not in occ:
                    other = (occ - {a}).pop()
                    d = PairConfig(*sorted((other, b)))
                    add(idx[(Sector.B, d)], k, hop)
            if pair_terms and c.x2 == c.x1 + 1:
                diag += -4 * t2 / U
                for d in (PairConfig(c.x1 - 1, c.x1) if c.x1 - 1 != 0 and c.x1 - 1 >= -L else None,
                          PairConfig(c.x2, c.x2 + 1) if c.x2 + 1 != 0 and c.x2 + 1 <= L else None):
                    if d is not None:
                        add(idx[(Sector.B, d)], k, -2 * t2 / U)
        add(k, k, diag)
    return sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))


def cross_coupling(params: ModelParams, literal: bool = False) -> float:
    """A(-1,+1) <-> B(-1,+1) matrix element; ``literal`` gives the compact-form value ``2 sqrt2 t^2/V``."""
    _check(params, params.V)
    factor = 2.0 if literal else 4.0
    return factor * np.sqrt(2.0) * params.t ** 2 / params.V


def build_combined(params: ModelParams, L: int, include_constant: bool = True,
                   cross: str = "exact", end_correction: bool = True,
                   pair_terms: bool = True) -> sp.csr_matrix:
    """``H022 (+) H211`` plus the single inter-sector entry pair.

    ``cross`` is ``"exact"`` (``4 sqrt2 t^2/V``) or ``"literal"`` (``2 sqrt2 t^2/V``).
    """
    if cross not in ("exact", "literal"):
        raise ValueError("cross must be 'exact' or 'literal'")
    a = build_h022(params, L, include_constant, end_correction=end_correction)
    b = build_h211(params, L, 2, include_constant, pair_terms=pair_terms)
    n = a.shape[0]
    g = cross_coupling(params, literal=(cross == "literal"))
    k = EffectiveBasis(Sector.A, L).index()[(Sector.A, PairConfig(-1, 1))]
    mix = sp.csr_matrix(([g, g], ([k, n + k], [n + k, k])), shape=(2 * n, 2 * n))
    return sp.csr_matrix(sp.block_diag([a, b]) + mix)


# --------------------------------------------------------------------------
# brute-force oracle


def _fock_of(label: tuple[Sector, PairConfig], lattice: LatticeSpec) -> np.ndarray:
    s, c = label
    n = np.zeros(lattice.M, dtype=np.int64)
    fill = 2 if s is Sector.A else 1
    n[lattice.index_of(c.x1)] += fill
    n[lattice.index_of(c.x2)] += fill
    if s is Sector.B:
        n[lattice.index_of(0)] += 2
    return n


def sector_energy(sector: Sector, params: ModelParams) -> float:
    return 2 * params.U if Sector(sector) is Sector.A else params.U + 2 * params.V


def numeric_second_order(sector: Sector | str, params: ModelParams, L: int,
                         full: SectorBasis | None = None, rtol: float = 1e-12) -> np.ndarray:
    """``P tT P + P tT Q (E0 - H0)^-1 Q tT P`` on the sector, computed in the Fock space.

    Sector basis states are single Fock states (``(b^+)^2|0> / sqrt2`` and
    ``(b^+)^2 (b^+)^2 |0> / 2`` are unit-normalized occupation states), so the
    projection reduces to indexing.  ``E0`` is the sector energy; within the
    combined sector the inter-sector block uses the (2,1,1) energy ``U + 2V``.
    The zeroth-order energy is *not* included.

    Raises
    ------
    PerturbationError
        If a complement state reachable by one hop is degenerate with ``E0``.
    """
    sector = Sector(sector)
    eff = EffectiveBasis(sector, L)
    if full is None:
        full = enumerate_basis(LatticeSpec(L, Boundary.OPEN), 4)
    if full.N != 4 or full.lattice.L != L or full.lattice.boundary is not Boundary.OPEN:
        raise ValueError("oracle needs the N=4 open-chain Fock basis of the same L")
    lattice = full.lattice
    labels = eff.labels
    p = np.asarray(full.rank(np.array([_fock_of(lab, lattice) for lab in labels])))
    e0 = np.array([sector_energy(s, params) for s, _ in labels])
    T = params.t * _kinetic_full(full)
    d = h0_diagonal(params, full)

    in_p = np.zeros(full.dim, dtype=bool)
    in_p[p] = True
    TP = sp.csc_matrix(T[:, p])
    first = TP[p, :].toarray()
    TQ = TP[~in_p, :].tocsc()
    dq = d[~in_p]
    reached = np.asarray(abs(TQ).sum(axis=1)).ravel() > 0
    scale = max(1.0, abs(params.U), abs(params.V))

    # energy used in the resolvent for a (row, col) pair
    e_b = sector_energy(Sector.B, params)
    energies = sorted(set(e0.tolist()) | ({e_b} if sector is Sector.COMBINED else set()))
    out = first.copy()
    for E in energies:
        gap = E - dq
        if np.any(reached & (np.abs(gap) <= rtol * scale)):
            raise PerturbationError(f"complement state degenerate with E0={E}: resolvent singular")
        inv = np.where(reached, 1.0 / np.where(reached, gap, 1.0), 0.0)
        block = (TQ.T @ sp.diags(inv) @ TQ).toarray()
        if sector is Sector.COMBINED:
            same = e0[:, None] == e0[None, :]
            use = (same & (e0[:, None] == E)) | (~same & (E == e_b))
        else:
            use = np.ones_like(block, dtype=bool)
        out += np.where(use, block, 0.0)
    return out


# --------------------------------------------------------------------------
# closed-form bound states of the (0,2,2) model


class Branch(str, Enum):
    B1 = "b1"
    B2 = "b2"
    SECONDARY = "secondary"


@dataclass(frozen=True)
class BoundStateFormula:
    """Closed-form bound state: energy (including ``2U``), existence, and ``(e^{ik1}, e^{ik2})``."""

    branch: Branch
    energy: float
    exists: bool
    momenta: tuple[float, float]


def bound_state_energy(branch: Branch | str, params: ModelParams) -> BoundStateFormula:
    """Energy and existence of a bound state of ``2U + H^(2)_(0,2,2)``.

    Existence domains: ``b1``: ``-U/3V < 1``; ``b2``: ``0 < U/2V < 1``;
    ``secondary``: ``3/4 < U/V < 1``.  Outside the domain the closed form is
    still evaluated and ``exists`` is False.
    """
    branch = Branch(branch)
    t2, U, V = params.t ** 2, params.U, params.V
    if branch is Branch.B1:
        _check(params, U, V, U - V, U + 7 * V, (U - V) * (U + 7 * V))
        energy = 2 * U - 8 * t2 / U + 16 * t2 / U * V * V / ((U - V) * (U + 7 * V))
        exists = -U / (3 * V) < 1
        momenta = ((U - V) / V, -V / (U + 7 * V))
    elif branch is Branch.B2:
        _check(params, U, V, U - V, V * (U - V))
        energy = 2 * U + 8 * t2 / U + 4 * t2 / U * ((U - V) ** 2 + V * V) / (V * (U - V))
        exists = 0 < U / (2 * V) < 1
        momenta = (V / (U - V), (U - V) / V)
    else:
        _check(params, U, V, U - V, 8 * U - 7 * V, U * V * (8 * U - 7 * V))
        energy = 2 * U - 8 * t2 / U + 16 * t2 * (U - V) ** 2 / (U * V * (8 * U - 7 * V))
        exists = 0.75 < U / V < 1
        momenta = ((8 * U - 7 * V) / (U - V), (U - V) / V)
    return BoundStateFormula(branch, float(energy), bool(exists), (float(momenta[0]), float(momenta[1])))


def bound_state_wavefunction(branch: str, params: ModelParams, config: PairConfig) -> float:
    """Unnormalized amplitude of ``b1+``, ``b1-``, ``b2+`` (or ``b2-``, identically zero)."""
    name = str(branch).lower()
    U, V = params.U, params.V
    c = config
    if name in ("b1+", "b1-"):
        sign = 1.0 if name.endswith("+") else -1.0
        z1, z2 = (U - V) / V, -V / (U + 7 * V)
        if 0 < c.x1:
            return float(z1 ** c.x1 * z2 ** c.x2)
        if c.x2 < 0:
            return float(sign * z1 ** (-c.x2) * z2 ** (-c.x1))
        return 0.0
    if name in ("b2", "b2+", "b2-"):
        if name == "b2-" or not (c.x1 < 0 < c.x2):
            return 0.0
        return float(((U - V) / V) ** (c.x2 - c.x1))
    raise ValueError(f"unknown branch {branch!r}")


def bound_state_vector(branch: str, params: ModelParams, L: int) -> np.ndarray:
    """Normalized wavefunction on the A-sector basis (zero vector when identically zero)."""
    psi = np.array([bound_state_wavefunction(branch, params, c) for c in pair_configs(L)])
    norm = np.linalg.norm(psi)
    return psi / norm if norm > 0 else psi
