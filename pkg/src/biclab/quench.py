"""Quench dynamics from simple Fock-like initial states and ensemble comparisons."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from math import factorial

import numpy as np

from .basis import Boundary, Parity, SectorBasis, sector
from .model import ModelParams, build_full_hamiltonian, build_number_operator
from .observe import DEFAULT_DELTA, energy_expectation, microcanonical_average, site_expectations, widths
from .solve import DEFAULT_DENSE_CAP, Spectrum, eig_dense, evolve_series

DEFAULT_T_MAX = 400.0
DEFAULT_SAMPLES = 801


class InitialKind(str, Enum):
    N4_1122 = "N4_1122"          # (b1^+)^2 (b2^+)^2 |0>
    N6_1111_22 = "N6_1111_22"    # (b1^+)^4 (b2^+)^2 |0>
    N6_112233 = "N6_112233"      # (b1^+)^2 (b2^+)^2 (b3^+)^2 |0>
    CUSTOM = "custom"


_SEEDS = {
    InitialKind.N4_1122: {1: 2, 2: 2},
    InitialKind.N6_1111_22: {1: 4, 2: 2},
    InitialKind.N6_112233: {1: 2, 2: 2, 3: 2},
}


def seed_occupation(kind: InitialKind | str, L: int, occupation: dict[int, int] | None = None) -> np.ndarray:
    kind = InitialKind(kind)
    occ = occupation if kind is InitialKind.CUSTOM else _SEEDS[kind]
    if not occ:
        raise ValueError("custom initial state needs an occupation map {site: n}")
    n = np.zeros(2 * L + 1, dtype=np.int64)
    for x, k in occ.items():
        if not -L <= x <= L:
            raise ValueError(f"site {x} outside [-{L}, {L}]")
        n[x + L] += k
    return n


def build_initial_state(kind: InitialKind | str, basis: SectorBasis,
                        occupation: dict[int, int] | None = None,
                        symmetrize: bool = True) -> np.ndarray:
    """Normalized ``(1 + P)/sqrt2`` times the normalized Fock seed, in ``basis`` coordinates.

    A Fock seed which is its own mirror image is returned as is.  With
    ``symmetrize=False`` the bare Fock state is returned (full basis only).
    """
    kind = InitialKind(kind)
    L = basis.lattice.L
    n = seed_occupation(kind, L, occupation)
    if int(n.sum()) != basis.N:
        raise ValueError(f"initial state has N={int(n.sum())}, basis has N={basis.N}")
    full = basis.full
    k = full.rank(n)
    psi = np.zeros(full.dim)
    psi[k] += 1.0
    if symmetrize:
        psi[basis.mirror[k]] += 1.0
    elif basis.parity is not None:
        raise ValueError("a non-symmetrized Fock state does not live in a parity sector")
    psi /= np.linalg.norm(psi)
    if basis.parity is None:
        return psi
    if basis.parity is Parity.ODD:
        raise ValueError("symmetrized initial states are parity-even")
    return basis.from_full(psi)


def fock_norm(occupation: dict[int, int]) -> float:
    """Norm of ``prod_x (b_x^+)^{n_x} |0>``, i.e. ``sqrt(prod n_x!)``."""
    return float(np.sqrt(np.prod([factorial(k) for k in occupation.values()])))


@dataclass(frozen=True)
class QuenchScenario:
    params: ModelParams
    L: int
    initial: InitialKind = InitialKind.N4_1122
    times: np.ndarray | None = None
    observables: tuple[int, ...] | None = None
    occupation: dict[int, int] | None = None
    symmetrize: bool = True
    boundary: Boundary = Boundary.PERIODIC
    tail_start: float | None = None
    delta: float = DEFAULT_DELTA
    ensembles: bool = True
    dense_cap: int = DEFAULT_DENSE_CAP
    tol: float = 1e-10

    @property
    def grid(self) -> np.ndarray:
        if self.times is None:
            return np.linspace(0.0, DEFAULT_T_MAX, DEFAULT_SAMPLES)
        return np.asarray(self.times, dtype=float)

    @property
    def N(self) -> int:
        return int(seed_occupation(self.initial, self.L, self.occupation).sum())


@dataclass
class QuenchResult:
    times: np.ndarray
    sites: np.ndarray
    series: np.ndarray                      # (time, site) -> <n_x>(t)
    energy: float
    energy_drift: float
    norm_drift: float
    long_time_avg: np.ndarray
    microcanonical: np.ndarray | None = None
    microcanonical_sensitivity: np.ndarray | None = None
    diagonal: np.ndarray | None = None
    bic_overlaps: list[dict] = field(default_factory=list)

    def site(self, x: int) -> int:
        return int(np.nonzero(self.sites == x)[0][0])


def full_spectrum(params: ModelParams, L: int, N: int, boundary=Boundary.PERIODIC,
                  dense_cap: int = DEFAULT_DENSE_CAP):
    """Dense spectra of both parity sectors, merged: ``(spectrum, per-state parity, bases)``."""
    parts = []
    for par in (Parity.EVEN, Parity.ODD):
        b = sector(L, N, par, boundary)
        if b.dim == 0:
            continue
        spec = eig_dense(build_full_hamiltonian(params, b), dense_cap=dense_cap)
        parts.append((par, b, spec))
    values = np.concatenate([s.values for _, _, s in parts])
    order = np.argsort(values, kind="stable")
    return parts, values[order], order


def _sector_eev(parts, sites) -> list[np.ndarray]:
    """``<n_x>`` per eigenstate, one ``(n_states, n_sites)`` array per parity part."""
    L = parts[0][1].lattice.L
    cols = np.asarray(sites) + L
    return [site_expectations(s.vectors, b)[cols].T for _, b, s in parts]


def diagonal_ensemble(initial: np.ndarray, spectrum: Spectrum, observables, degeneracy_tol: float = 1e-9):
    """Infinite-time average ``sum_blocks <psi|P_b O P_b|psi>`` for each operator in ``observables``.

    ``P_b`` projects on a cluster of eigenvalues closer than ``degeneracy_tol``.
    """
    if not spectrum.complete:
        raise ValueError("diagonal ensemble needs a complete spectrum")
    single = not isinstance(observables, (list, tuple))
    ops = [observables] if single else list(observables)
    c = spectrum.vectors.T @ initial
    out = np.zeros(len(ops))
    vals = spectrum.values
    start = 0
    while start < len(vals):
        stop = start + 1
        while stop < len(vals) and vals[stop] - vals[stop - 1] <= degeneracy_tol:
            stop += 1
        phi = spectrum.vectors[:, start:stop] @ c[start:stop]
        if np.vdot(phi, phi).real > 0:
            for i, op in enumerate(ops):
                out[i] += np.real(np.vdot(phi, op @ phi))
        start = stop
    return float(out[0]) if single else out


def dominant_frequency(times: np.ndarray, signal: np.ndarray, pad: int = 16) -> float:
    """Angular frequency of the strongest non-zero Fourier component (uniform grid)."""
    dt = float(times[1] - times[0])
    x = np.asarray(signal, dtype=float) - np.mean(signal)
    x = x * np.hanning(len(x))
    n = pad * len(x)
    power = np.abs(np.fft.rfft(x, n)) ** 2
    omega = 2 * np.pi * np.fft.rfftfreq(n, dt)
    power[0] = 0.0
    return float(omega[np.argmax(power)])


def run_quench(scenario: QuenchScenario) -> QuenchResult:
    """Propagate the initial state and compare with the ensembles.

    Symmetrized states are propagated inside the even sector (``H`` commutes
    with ``P``).  Ensembles use the merged dense spectrum of both sectors at
    ``E = <H>``; the microcanonical sensitivity is the largest shift of the
    average when the half-window is halved or doubled.
    """
    sc = scenario
    L = sc.L
    N = sc.N
    basis = sector(L, N, Parity.EVEN if sc.symmetrize else None, sc.boundary)
    H = build_full_hamiltonian(sc.params, basis)
    psi0 = build_initial_state(sc.initial, basis, sc.occupation, sc.symmetrize)
    sites = np.asarray(sc.observables if sc.observables is not None else basis.lattice.sites)
    cols = sites + L
    times = sc.grid
    E = energy_expectation(H, psi0)

    series = np.zeros((len(times), len(sites)))
    e_drift = 0.0
    n_drift = 0.0
    for i, (_, psi) in enumerate(evolve_series(H, psi0, times, tol=sc.tol)):
        series[i] = site_expectations(psi, basis)[cols]
        e_drift = max(e_drift, abs(energy_expectation(H, psi) - E) / max(1.0, abs(E)))
        n_drift = max(n_drift, abs(np.linalg.norm(psi) - 1.0))
    t_tail = sc.tail_start if sc.tail_start is not None else 0.5 * times[-1]
    tail = times >= t_tail
    result = QuenchResult(times, sites, series, E, e_drift, n_drift, series[tail].mean(axis=0))

    if not sc.ensembles:
        return result
    # ensembles need the complete spectrum in the propagation basis and in both sectors
    spec_even = eig_dense(H, dense_cap=sc.dense_cap)
    obs = [build_number_operator(int(x), basis) for x in sites]
    result.diagonal = diagonal_ensemble(psi0, spec_even, obs)
    parts, values, order = full_spectrum(sc.params, L, N, sc.boundary, sc.dense_cap)
    eev = np.vstack(_sector_eev(parts, sites))[order]
    # only the energies matter for the window; vectors are not kept
    merged = Spectrum(values, np.zeros((0, len(values))), np.zeros(len(values)), complete=True)

    def micro(delta):
        return np.array([microcanonical_average(merged, eev[:, j], E, delta) for j in range(len(sites))])

    result.microcanonical = micro(sc.delta)
    result.microcanonical_sensitivity = np.max(
        [np.abs(micro(f * sc.delta) - result.microcanonical) for f in (0.5, 2.0)], axis=0)

    over = np.abs(spec_even.vectors.T @ psi0) ** 2
    w = widths(spec_even.vectors, basis)
    for k in np.argsort(over)[::-1][:5]:
        result.bic_overlaps.append({"energy": float(spec_even.values[k]), "overlap2": float(over[k]),
                                    "width": float(w[k]), "parity": "even"})
    return result
