"""Bound-state versus resonance discrimination from density tails across sizes.

A localized eigenstate has a density tail that does not grow when the chain
is lengthened and that decays exponentially away from the impurity.  A
resonance keeps a finite weight on the extended continuum, so its tail
grows toward the uniform value with system size.  The test here compares
the symmetrized radial density ``rho(r)`` at fixed distances ``r >= r0``
across a sequence of chain lengths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .basis import Parity, SectorBasis
from .observe import density, widths
from .solve import Spectrum

DEFAULT_R0 = 3
DEFAULT_EPS = 0.2
FIT_FLOOR = 1e-12
DECAY_FLOOR = 1e-9  # slopes closer to zero count as flat


class Verdict(str, Enum):
    BIC = "BIC"
    RESONANCE = "Resonance"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class TailProfile:
    """Symmetrized radial density ``tail[r] = (rho(r) + rho(-r)) / 2`` for ``r = 0..L``."""

    L: int
    tail: np.ndarray
    energy: float = float("nan")
    parity: Parity | None = None

    def __post_init__(self):
        tail = np.asarray(self.tail, dtype=float)
        if tail.shape != (self.L + 1,):
            raise ValueError(f"tail must have L+1 = {self.L + 1} entries")
        object.__setattr__(self, "tail", tail)


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    decay_rate: float | None
    evidence: dict = field(default_factory=dict)


def tail_profile(state: np.ndarray, basis: SectorBasis, energy: float = float("nan"),
                 parity: Parity | str | None = None) -> TailProfile:
    rho = density(state, basis).rho
    L = basis.lattice.L
    tail = 0.5 * (rho[L:] + rho[L::-1])
    tail = np.clip(tail, 0.0, None)
    if parity is None:
        parity = basis.parity
    return TailProfile(L, tail, float(energy), None if parity is None else Parity(parity))


def fit_decay(profile: TailProfile, r0: int = DEFAULT_R0) -> float | None:
    """Least-squares slope of ``log tail(r)`` over ``r0 <= r <= L`` where ``tail > 1e-12``."""
    r = np.arange(profile.L + 1)
    mask = (r >= r0) & (profile.tail > FIT_FLOOR)
    if mask.sum() < 2:
        return None
    slope, _ = np.polyfit(r[mask], np.log(profile.tail[mask]), 1)
    return float(slope)


def classify_candidate(profiles: Sequence[TailProfile], r0: int = DEFAULT_R0,
                       eps: float = DEFAULT_EPS) -> Classification:
    """Classify one candidate from its tail profiles at three or more sizes.

    For every distance ``r >= r0`` shared by all sizes the tail is followed
    along increasing ``L``.  A step from ``L_k`` to ``L_{k+1}`` grows when
    ``tail_{k+1}(r) > (1 + eps) tail_k(r)`` and shrinks when
    ``tail_{k+1}(r) < tail_k(r) / (1 + eps)``.  A distance is increasing if
    some step grows and none shrinks, and non-monotonic if both occur.

    - BIC: no step grows at any tested ``r`` and the log-linear decay rate
      fitted on the largest size is negative.
    - Resonance: a strict majority of the tested distances are increasing.
    - Undecided: anything else, in particular non-monotonic tails.
    """
    if len(profiles) < 3:
        raise ValueError(f"need profiles at >= 3 sizes, got {len(profiles)}")
    ordered = sorted(profiles, key=lambda p: p.L)
    sizes = [p.L for p in ordered]
    if len(set(sizes)) != len(sizes):
        raise ValueError("profiles must have distinct L")
    rs = np.arange(r0, min(sizes) + 1)
    if rs.size == 0:
        raise ValueError(f"r0={r0} exceeds the smallest size L={min(sizes)}")

    table = np.array([[p.tail[r] for p in ordered] for r in rs])  # (r, L)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = table[:, 1:] / table[:, :-1]
    grows = (table[:, 1:] > (1.0 + eps) * table[:, :-1]).any(axis=1)
    shrinks = (table[:, 1:] * (1.0 + eps) < table[:, :-1]).any(axis=1)
    increased = grows & ~shrinks
    rate = fit_decay(ordered[-1], r0)

    if not grows.any() and rate is not None and rate < -DECAY_FLOOR:
        verdict = Verdict.BIC
    elif increased.sum() * 2 > len(rs):
        verdict = Verdict.RESONANCE
    else:
        verdict = Verdict.UNDECIDED
    evidence = {
        "sizes": sizes,
        "r": rs.tolist(),
        "tail": table.tolist(),
        "ratio": np.where(np.isfinite(ratios), ratios, np.nan).tolist(),
        "increased": increased.tolist(),
        "non_monotonic": (grows & shrinks).tolist(),
        "energies": [p.energy for p in ordered],
    }
    return Classification(verdict, rate, evidence)


@dataclass(frozen=True)
class Selection:
    L: int
    index: int
    energy: float
    width: float
    vector: np.ndarray


def match_candidate_across_sizes(spectra: Mapping[int, tuple[Spectrum, SectorBasis]], E_ref: float,
                                 parity: Parity | str | None = None,
                                 window: float = 0.5) -> dict[int, Selection]:
    """Per size, the in-window state of matching parity with the smallest width.

    ``spectra`` maps ``L`` to ``(spectrum, basis)``.  When the basis is a
    parity sector its parity must agree with ``parity``.
    """
    parity = None if parity is None else Parity(parity)
    out = {}
    for L in sorted(spectra):
        spec, basis = spectra[L]
        if parity is not None and basis.parity is not None and basis.parity is not parity:
            raise ValueError(f"L={L}: basis parity {basis.parity.value} != {parity.value}")
        idx = np.nonzero(np.abs(spec.values - E_ref) <= window)[0]
        if idx.size == 0:
            raise LookupError(f"L={L}: no state within {window} of {E_ref}")
        w = widths(spec.vectors[:, idx], basis)
        k = int(idx[np.argmin(w)])
        out[L] = Selection(L, k, float(spec.values[k]), float(w.min()), spec.vectors[:, k])
    return out


class TailClassifier:
    """Estimator-style wrapper around :func:`classify_candidate`.

    Parameters
    ----------
    r0 : int
        First distance from the impurity included in the tail test.
    eps : float
        Relative growth per size step tolerated before a tail counts as
        increasing.

    Attributes
    ----------
    verdict_, decay_rate_, evidence_
        Set by :meth:`fit`.
    """

    def __init__(self, r0: int = DEFAULT_R0, eps: float = DEFAULT_EPS):
        self.r0 = r0
        self.eps = eps

    def get_params(self) -> dict:
        return {"r0": self.r0, "eps": self.eps}

    def fit(self, profiles: Sequence[TailProfile]) -> "TailClassifier":
        result = classify_candidate(profiles, r0=self.r0, eps=self.eps)
        self.verdict_ = result.verdict
        self.decay_rate_ = result.decay_rate
        self.evidence_ = result.evidence
        return self

    def predict(self, candidates: Sequence[Sequence[TailProfile]]) -> list[Verdict]:
        return [classify_candidate(p, r0=self.r0, eps=self.eps).verdict for p in candidates]
