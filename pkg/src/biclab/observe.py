"""Observables evaluated on state vectors and spectra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import SectorBasis
from .solve import Spectrum

DEFAULT_DELTA = 0.5


class EmptyWindowError(ValueError):
    pass


@dataclass(frozen=True)
class DensityProfile:
    """``rho[k]`` is ``<n_x>/N`` at site ``x = sites[k]``; sums to one."""

    sites: np.ndarray
    rho: np.ndarray
    N: int

    def __getitem__(self, x: int) -> float:
        return float(self.rho[x - self.sites[0]])

    def as_dict(self) -> dict[int, float]:
        return {int(x): float(r) for x, r in zip(self.sites, self.rho)}


def site_expectations(state: np.ndarray, basis: SectorBasis) -> np.ndarray:
    """``<n_x>`` for every site, for one state or columns of states.

    Returns shape ``(M,)`` or ``(M, k)``.
    """
    full = basis.to_full(np.asarray(state))
    weight = np.abs(full) ** 2
    return basis.full.states.T.astype(np.float64) @ weight


def density(state: np.ndarray, basis: SectorBasis) -> DensityProfile:
    n = site_expectations(state, basis)
    return DensityProfile(basis.lattice.sites, n / basis.N, basis.N)


def width(profile: DensityProfile, tol: float = 1e-12) -> float:
    """Standard deviation of the density over the linear site labels."""
    x = profile.sites.astype(np.float64)
    rho = profile.rho
    mean = float(x @ rho)
    var = float((x - mean) ** 2 @ rho)
    if var < -tol:
        raise ValueError(f"negative variance {var:.3e}")
    return float(np.sqrt(max(var, 0.0)))


def widths(states: np.ndarray, basis: SectorBasis) -> np.ndarray:
    """Width of every column of ``states``."""
    n = site_expectations(states, basis) / basis.N
    x = basis.lattice.sites.astype(np.float64)[:, None]
    mean = (x * n).sum(axis=0)
    var = ((x - mean) ** 2 * n).sum(axis=0)
    return np.sqrt(np.clip(var, 0.0, None))


def overlap(a: np.ndarray, b: np.ndarray) -> complex:
    """``<a|b>`` (conjugate-linear in ``a``)."""
    return complex(np.vdot(a, b))


def energy_expectation(H, state: np.ndarray) -> float:
    return float(np.real(np.vdot(state, H @ state)))


def microcanonical_average(spectrum: Spectrum, eev: np.ndarray, E: float,
                           delta: float = DEFAULT_DELTA) -> float:
    """Unweighted mean of ``eev`` over eigenstates with ``|E_a - E| <= delta``."""
    if not spectrum.complete:
        raise ValueError("microcanonical average needs a complete spectrum")
    eev = np.asarray(eev, dtype=float)
    mask = np.abs(spectrum.values - E) <= delta
    if not mask.any():
        raise EmptyWindowError(f"no eigenstate within {delta} of E={E}; increase delta")
    return float(eev[mask].mean())
