import numpy as np
import pytest

from biclab.basis import sector
from biclab.model import ModelParams, build_full_hamiltonian, build_number_operator, build_parity_matrix
from biclab.observe import site_expectations
from biclab.quench import (InitialKind, QuenchScenario, build_initial_state, diagonal_ensemble,
                           dominant_frequency, fock_norm, run_quench, seed_occupation)
from biclab.solve import eig_dense, evolve

P4 = ModelParams(1.0, -20.0, -10.0)
P6 = ModelParams(1.0, -15.0, -20.0)


def test_eq11_state():
    b = sector(5, 4, "even")
    psi = build_initial_state("N4_1122", b)
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-15)
    n = site_expectations(psi, b)
    L = 5
    assert n[L + 1] == pytest.approx(1.0) and n[L + 2] == pytest.approx(1.0) and n[L] == 0.0
    H = build_full_hamiltonian(P4, b)
    assert psi @ (H @ psi) == pytest.approx(-40.0, abs=1e-12)


def test_eq12_and_eq13_energies():
    b = sector(5, 6, "even")
    H = build_full_hamiltonian(P6, b)
    psi = build_initial_state(InitialKind.N6_1111_22, b)
    assert psi @ (H @ psi) == pytest.approx(-105.0, abs=1e-12)
    psi = build_initial_state(InitialKind.N6_112233, b)
    assert psi @ (H @ psi) == pytest.approx(3 * -15.0, abs=1e-12)


def test_initial_state_errors():
    with pytest.raises(ValueError, match="N="):
        build_initial_state("N4_1122", sector(5, 6, "even"))
    with pytest.raises(ValueError, match="even"):
        build_initial_state("N4_1122", sector(5, 4, "odd"))
    with pytest.raises(ValueError):
        build_initial_state("N4_1122", sector(5, 4, "even"), symmetrize=False)
    with pytest.raises(ValueError, match="outside"):
        seed_occupation("N6_112233", 2)
    with pytest.raises(ValueError, match="custom"):
        seed_occupation("custom", 3)


def test_self_mirror_seed_and_custom_fock():
    b = sector(3, 2)
    psi = build_initial_state("custom", b, {-1: 1, 1: 1})
    assert np.count_nonzero(psi) == 1
    bare = build_initial_state("custom", b, {2: 2}, symmetrize=False)
    assert np.count_nonzero(bare) == 1
    assert fock_norm({1: 2, 2: 2}) == pytest.approx(2.0)


def test_parity_conserved_in_full_basis():
    b = sector(4, 4)
    H = build_full_hamiltonian(P4, b)
    Pm = build_parity_matrix(b)
    psi = build_initial_state("N4_1122", b)
    for t in (1.0, 10.0):
        phi = evolve(H, psi, t)
        assert np.vdot(phi, Pm @ phi).real == pytest.approx(1.0, abs=1e-8)


def test_diagonal_ensemble_basics():
    b = sector(3, 4, "even")
    H = build_full_hamiltonian(P4, b)
    s = eig_dense(H)
    n1 = build_number_operator(1, b)
    v = s.vectors[:, 4]
    assert diagonal_ensemble(v, s, n1) == pytest.approx(v @ (n1 @ v), abs=1e-12)
    psi = build_initial_state("N4_1122", b)
    assert np.sum((s.vectors.T @ psi) ** 2) == pytest.approx(1.0, abs=1e-10)
    both = diagonal_ensemble(psi, s, [n1, build_number_operator(0, b)])
    assert both.shape == (2,)
    incomplete = type(s)(s.values, s.vectors, s.residuals, complete=False)
    with pytest.raises(ValueError):
        diagonal_ensemble(psi, incomplete, n1)


def test_dominant_frequency_synthetic():
    t = np.linspace(0, 400, 801)
    assert dominant_frequency(t, 0.3 + np.cos(1.54 * t)) == pytest.approx(1.54, abs=0.005)


def test_small_quench_invariants():
    sc = QuenchScenario(P4, 3, times=np.linspace(0, 60, 121))
    r = run_quench(sc)
    assert r.energy == pytest.approx(-40.0, abs=1e-12)
    assert r.energy_drift <= 1e-8 and r.norm_drift <= 1e-10
    assert np.allclose(r.series.sum(axis=1), 4.0, atol=1e-9)
    assert np.allclose(r.series, r.series[:, ::-1], atol=1e-9)
    assert r.series.shape == (121, 7)
    assert r.microcanonical.shape == (7,) and r.diagonal.shape == (7,)
    assert sum(o["overlap2"] for o in r.bic_overlaps) <= 1.0 + 1e-12


def test_eigenstate_quench_is_stationary():
    b = sector(3, 4, "even")
    H = build_full_hamiltonian(P4, b)
    s = eig_dense(H)
    v = s.vectors[:, 10]
    n0 = site_expectations(v, b)
    for t in (5.0, 50.0):
        assert np.allclose(site_expectations(evolve(H, v, t), b), n0, atol=1e-8)


def test_long_time_average_approaches_diagonal_ensemble():
    sc = QuenchScenario(P4, 5, times=np.linspace(0, 800, 1601), observables=(1,), ensembles=True)
    r = run_quench(sc)
    gaps = []
    for lo, hi in ((100, 200), (200, 400), (400, 800)):
        w = (r.times >= lo) & (r.times <= hi)
        gaps.append(abs(r.series[w, 0].mean() - r.diagonal[0]))
    assert gaps[0] > gaps[1] > gaps[2]
