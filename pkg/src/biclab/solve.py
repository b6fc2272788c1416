"""Eigensolvers and Krylov time propagation for real symmetric operators."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DEFAULT_DENSE_CAP = 12_000


class DimensionError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, best_residual: float = np.inf):
        super().__init__(message)
        self.best_residual = best_residual


@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray
    residual: float


@dataclass(frozen=True)
class Spectrum:
    """Eigenpairs sorted by ascending value; ``vectors[:, k]`` belongs to ``values[k]``."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    complete: bool

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, k: int) -> EigenPair:
        return EigenPair(float(self.values[k]), self.vectors[:, k], float(self.residuals[k]))

    @property
    def pairs(self) -> list[EigenPair]:
        return [self[k] for k in range(len(self))]

    def nearest(self, energy: float, count: int = 1) -> np.ndarray:
        """Indices of the ``count`` eigenvalues closest to ``energy``."""
        return np.argsort(np.abs(self.values - energy), kind="stable")[:count]


def residuals(op, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Column-wise ``||A v - E v||_2``."""
    if vectors.size == 0:
        return np.zeros(0)
    return np.linalg.norm(op @ vectors - vectors * values, axis=0)


def _dense(op) -> np.ndarray:
    return op.toarray() if sp.issparse(op) else np.asarray(op, dtype=float)


def resolve_degeneracies(values, vectors, symmetry, tol: float = 1e-8):
    """Rotate degenerate clusters so each vector is an eigenvector of ``symmetry``.

    Clusters are runs of sorted ``values`` separated by no more than ``tol``.
    Returns new ``(vectors, labels)`` where ``labels`` are the symmetry
    eigenvalues (e.g. +-1 for parity).
    """
    vectors = np.array(vectors, dtype=float, copy=True)
    labels = np.einsum("ij,ij->j", vectors, symmetry @ vectors)
    start = 0
    n = len(values)
    while start < n:
        stop = start + 1
        while stop < n and values[stop] - values[stop - 1] <= tol:
            stop += 1
        if stop - start > 1:
            block = vectors[:, start:stop]
            m = block.T @ (symmetry @ block)
            lam, rot = np.linalg.eigh(0.5 * (m + m.T))
            vectors[:, start:stop] = block @ rot
            labels[start:stop] = lam
        start = stop
    return vectors, labels


def eig_dense(op, dense_cap: int = DEFAULT_DENSE_CAP, symmetry=None, degeneracy_tol: float = 1e-8) -> Spectrum:
    """Full diagonalization via LAPACK.

    ``symmetry``, when given, is an operator commuting with ``op`` (typically
    the parity matrix) used to pick a definite-symmetry basis inside every
    degenerate cluster.
    """
    n = op.shape[0]
    if n > dense_cap:
        raise DimensionError(
            f"dimension {n} exceeds dense cap {dense_cap}; use eig_window for interior states"
        )
    values, vectors = np.linalg.eigh(_dense(op))
    if symmetry is not None:
        vectors, _ = resolve_degeneracies(values, vectors, symmetry, degeneracy_tol)
    return Spectrum(values, vectors, residuals(op, values, vectors), complete=True)


# --------------------------------------------------------------------------
# interior eigenpairs


def _lanczos_coefficients(op, v0: np.ndarray, m: int, state=None):
    """Plain three-term Lanczos (no reorthogonalization), resumable."""
    if state is None:
        q = v0 / np.linalg.norm(v0)
        state = {"q": q, "q_old": np.zeros_like(q), "beta": 0.0, "alpha": [], "betas": []}
    q, q_old, beta = state["q"], state["q_old"], state["beta"]
    alpha, betas = state["alpha"], state["betas"]
    for _ in range(m - len(alpha)):
        w = op @ q - beta * q_old
        a = float(q @ w)
        w -= a * q
        beta = float(np.linalg.norm(w))
        alpha.append(a)
        betas.append(beta)
        if beta == 0.0:
            break
        q_old, q = q, w / beta
    state.update(q=q, q_old=q_old, beta=beta)
    return state


def _good_ritz(alpha, betas, center, want, merge_tol, rng):
    """Distinct non-spurious Ritz values of T_m nearest ``center`` with error bounds.

    Returns a list of ``(theta, bound, S)`` sorted by distance to ``center``,
    where the columns of ``S`` are eigenvectors of T_m for all copies of the
    Ritz value ``theta`` and ``bound`` is the smallest copy error bound.
    """
    a = np.asarray(alpha)
    b = np.asarray(betas[:-1])
    m = len(a)
    theta = sla.eigvalsh_tridiagonal(a, b, lapack_driver="sterf")
    # group numerically coincident copies (ghosts of converged eigenvalues)
    breaks = np.nonzero(np.diff(theta) > merge_tol)[0] + 1
    starts = np.concatenate([[0], breaks])
    stops = np.concatenate([breaks, [m]])
    reps = 0.5 * (theta[starts] + theta[stops - 1])
    order = np.argsort(np.abs(reps - center), kind="stable")
    near = np.sort(order[: min(len(order), 4 * want + 10)])
    lo, hi = theta[starts[near[0]]], theta[stops[near[-1]] - 1]
    if m > 1:
        theta2 = sla.eigvalsh_tridiagonal(a[1:], b[1:], select="v",
                                          select_range=(lo - 1.0, hi + 1.0))
    else:
        theta2 = np.zeros(0)
    groups = []
    for g in near:
        i, j = starts[g], stops[g]
        if j - i == 1 and theta2.size and np.min(np.abs(theta2 - theta[i])) <= merge_tol:
            continue  # Cullum-Willoughby: simple and shared with T_m minus first row
        _, S = sla.eigh_tridiagonal(a, b, select="i", select_range=(i, j - 1))
        bounds = abs(betas[-1]) * np.abs(S[-1, :])
        best = int(np.argmin(bounds))
        # every copy maps to the same eigenvector of the operator; keep them all
        groups.append((float(theta[i + best]), float(bounds[best]), S))
    groups.sort(key=lambda g: abs(g[0] - center))
    return groups, theta


def _ritz_vectors(op, v0, alpha, betas, S):
    """Second Lanczos pass: ``Q_m S`` without storing ``Q_m``."""
    a = np.asarray(alpha)
    m = len(a)
    Y = np.zeros((v0.shape[0], S.shape[1]))
    q = v0 / np.linalg.norm(v0)
    q_old = np.zeros_like(q)
    beta = 0.0
    for j in range(m):
        Y += np.outer(q, S[j])
        w = op @ q - beta * q_old - a[j] * q
        beta = betas[j]
        if beta == 0.0:
            break
        q_old, q = q, w / beta
    return Y


def _rayleigh_ritz(op, Y):
    U, s, _ = np.linalg.svd(Y, full_matrices=False)
    U = U[:, s > 1e-8 * s[0]]
    Hs = U.T @ (op @ U)
    w, z = np.linalg.eigh(0.5 * (Hs + Hs.T))
    X = U @ z
    return w, X, residuals(op, w, X)


def _fold_window(op, center, count, tol, maxiter, seed):
    n = op.shape[0]
    shifted = op - center * sp.identity(n, format="csr")

    def matvec(v):
        return -(shifted @ (shifted @ v))

    fold = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    k = min(n - 1, count + max(2, count // 2))
    v0 = np.random.default_rng(seed).standard_normal(n)
    _, Y = spla.eigsh(fold, k=k, which="LA", v0=v0, tol=0.0, maxiter=maxiter,
                      ncv=min(n, max(2 * k + 1, 40)))
    return _rayleigh_ritz(op, Y)


def eig_window(op, center: float, count: int, tol: float = 1e-8, *, method: str = "lanczos",
               max_steps: int | None = None, seed: int = 0, dense_cap: int = DEFAULT_DENSE_CAP) -> Spectrum:
    """Eigenpairs of a real symmetric operator nearest ``center``.

    ``method="lanczos"`` (default) runs plain Lanczos on ``op`` itself without
    reorthogonalization, discards spurious Ritz values with the
    Cullum-Willoughby test, then regenerates the Lanczos vectors to assemble
    Ritz vectors, followed by a Rayleigh-Ritz clean-up.  Memory is a few
    vectors regardless of the number of steps.  ``method="fold"`` runs
    ARPACK on ``-(op - center)^2``, practical only when the spectrum near
    ``center`` is sparse relative to its total width.

    Exactly degenerate eigenvalues are returned once per eigenspace with the
    Lanczos method (a single start vector cannot resolve them); reduce by
    symmetry first.

    Raises
    ------
    ConvergenceError
        If ``count`` converged pairs are not found within ``max_steps``.
    """
    n = op.shape[0]
    if count < 1:
        raise ValueError("count must be >= 1")
    if count >= n:
        full = eig_dense(op, dense_cap=dense_cap)
        return Spectrum(full.values, full.vectors, full.residuals, complete=False)

    scale = max(1.0, float(abs(op).max()))
    if method == "fold":
        w, X, res = _fold_window(op, center, count, tol, maxiter=max_steps or 20 * n, seed=seed)
    elif method == "lanczos":
        w, X, res = _lanczos_window(op, center, count, tol, max_steps, seed, scale)
    else:
        raise ValueError(f"unknown method {method!r}")

    pick = np.argsort(np.abs(w - center), kind="stable")[:count]
    if np.any(res[pick] > tol):
        raise ConvergenceError(
            f"eig_window: residual {res[pick].max():.2e} above tol {tol:.1e}", float(res[pick].max())
        )
    pick = np.sort(pick)
    return Spectrum(w[pick], X[:, pick], res[pick], complete=False)


def _lanczos_window(op, center, count, tol, max_steps, seed, scale):
    n = op.shape[0]
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    if max_steps is None:
        max_steps = max(50 * n, 1000) if n < 4000 else 200_000
    merge_tol = 1e-10 * scale
    ghost_tol = 1e-6 * scale
    bound_tol = 0.1 * tol
    want = count + max(2, count // 2)
    m = min(max(200, 10 * want), max_steps)
    state = None
    previous = None
    known = np.zeros(0)
    best = np.inf
    while True:
        state = _lanczos_coefficients(op, v0, m, state)
        alpha, betas = state["alpha"], state["betas"]
        groups, _ = _good_ritz(alpha, betas, center, want, merge_tol, rng)
        # A Ritz value that has converged once stays an eigenvalue approximation;
        # later bounds of its group fluctuate as ghost copies form around it.
        fresh = [g[0] for g in groups if g[1] <= bound_tol]
        known = np.concatenate([known, fresh])
        near_known = [bool(np.any(np.abs(known - g[0]) <= ghost_tol)) for g in groups]
        done = [g for g, k in zip(groups, near_known) if k]
        pending = [g for g, k in zip(groups, near_known) if not k]
        done = done[:want]
        radius = abs(done[count - 1][0] - center) if len(done) >= count else np.inf
        converged = len(done) >= count and not any(abs(g[0] - center) <= radius for g in pending)
        values = np.array([g[0] for g in done[:count]])
        stable = converged and previous is not None and np.allclose(
            previous, values, atol=1e2 * merge_tol, rtol=0.0)
        breakdown = betas[-1] == 0.0
        log.debug("eig_window m=%d done=%d pending=%s converged=%s stable=%s", len(alpha), len(done),
                  [(round(g[0], 6), float("%.1e" % g[1])) for g in pending if abs(g[0] - center) <= radius],
                  converged, stable)
        if stable or breakdown or len(alpha) >= max_steps:
            if done:
                S = np.hstack([g[2] for g in done])
                Y = _ritz_vectors(op, v0, alpha, betas, S)
                w, X, res = _rayleigh_ritz(op, Y)
                ok = res <= tol
                w, X, res = w[ok], X[:, ok], res[ok]
                if len(w) >= count:
                    log.debug("eig_window: %d Lanczos steps", len(alpha))
                    return w, X, res
                best = float(np.min(res)) if len(res) else best
            if breakdown or len(alpha) >= max_steps:
                raise ConvergenceError(
                    f"eig_window: no convergence after {len(alpha)} Lanczos steps", best)
        if converged:
            previous = values
        m = min(int(m * 1.25) + 1, max_steps)


# --------------------------------------------------------------------------
# time propagation


def _krylov_basis(H, v, m_max):
    n = v.shape[0]
    V = np.zeros((m_max + 1, n), dtype=complex)
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max)
    V[0] = v
    for j in range(m_max):
        w = H @ V[j]
        alpha[j] = np.real(np.vdot(V[j], w))
        w -= alpha[j] * V[j]
        if j > 0:
            w -= beta[j - 1] * V[j - 1]
        # full reorthogonalization, twice is enough
        for _ in range(2):
            w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] < 1e-14:
            return V[: j + 1], alpha[: j + 1], beta[: j + 1], True
        V[j + 1] = w / beta[j]
    return V, alpha, beta, False


def _expm_tridiag(alpha, beta, tau):
    m = len(alpha)
    Tm = np.diag(alpha) + np.diag(beta[: m - 1], 1) + np.diag(beta[: m - 1], -1)
    w, z = np.linalg.eigh(Tm)
    return z @ (np.exp(-1j * w * tau) * z[0].conj())


def evolve(H, state: np.ndarray, dt: float, tol: float = 1e-10, m_max: int = 30,
           max_substeps: int = 100_000) -> np.ndarray:
    """``exp(-i H dt) state`` via adaptive Lanczos-Krylov substeps.

    Each substep builds a Krylov space of dimension at most ``m_max``; the
    local error is estimated from the first neglected Krylov coefficient and
    the substep is halved until the estimate is below ``tol * tau / dt``.
    """
    psi = np.asarray(state, dtype=complex).copy()
    norm0 = np.linalg.norm(psi)
    if dt == 0.0 or norm0 == 0.0:
        return psi
    remaining = float(dt)
    sign = np.sign(dt)
    tau = remaining
    substeps = 0
    while abs(remaining) > 0.0:
        nrm = np.linalg.norm(psi)
        V, alpha, beta, exact = _krylov_basis(H, psi / nrm, m_max)
        m = len(alpha)
        while True:
            tau = sign * min(abs(tau), abs(remaining))
            c = _expm_tridiag(alpha, beta, tau)
            # a posteriori estimate: weight leaking into the (m+1)-th Krylov vector
            err = 0.0 if exact else abs(beta[m - 1] * c[m - 1]) * abs(tau)
            if err <= tol * abs(tau / dt) or exact:
                break
            tau *= 0.5
            substeps += 1
            if substeps > max_substeps:
                raise ConvergenceError("evolve: step size underflow", err)
        psi = nrm * (V[:m].T @ c)
        remaining -= tau
        if abs(remaining) < 1e-15 * abs(dt):
            break
        # grow the step again when the last one was comfortably accurate
        if err < 0.01 * tol * abs(tau / dt):
            tau *= 2.0
        substeps += 1
        if substeps > max_substeps:
            raise ConvergenceError("evolve: too many substeps", err)
    return psi


def evolve_series(H, state: np.ndarray, times: np.ndarray, tol: float = 1e-10, m_max: int = 30):
    """Yield ``(t, psi(t))`` on an increasing time grid starting from ``times[0]``."""
    psi = np.asarray(state, dtype=complex)
    t_prev = float(times[0])
    for t in times:
        if t != t_prev:
            psi = evolve(H, psi, float(t) - t_prev, tol=tol, m_max=m_max)
            t_prev = float(t)
        yield float(t), psi
