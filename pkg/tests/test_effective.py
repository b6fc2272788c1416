import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biclab.effective import (Branch, EffectiveBasis, PairConfig, PerturbationError, Sector,
                              bound_state_energy, bound_state_vector, bound_state_wavefunction,
                              build_combined, build_h022, build_h211, cross_coupling,
                              numeric_second_order, pair_configs)
from biclab.model import ModelParams

P = ModelParams(1.0, -20.0, -10.0)
SEPARATED = [(-20.0, -10.0), (-15.0, -20.0), (-25.0, -7.0), (12.0, -5.0), (-9.0, 13.0), (30.0, 11.0)]


def entry(op, L, a, b, sector=Sector.A):
    idx = EffectiveBasis(sector, L).index()
    return op.toarray()[idx[(sector, PairConfig(*a))], idx[(sector, PairConfig(*b))]]


def test_pair_config_validation():
    with pytest.raises(ValueError):
        PairConfig(2, 1)
    with pytest.raises(ValueError):
        PairConfig(0, 3)
    assert PairConfig(-3, 1).mirror() == PairConfig(-1, 3)
    assert len(pair_configs(4)) == 28


def test_basis_layout():
    comb = EffectiveBasis("combined", 3)
    assert comb.dim == 2 * EffectiveBasis("A", 3).dim
    assert comb.labels[0][0] is Sector.A and comb.labels[-1][0] is Sector.B
    with pytest.raises(ValueError):
        EffectiveBasis("A", 1)


def test_h022_entries():
    H = build_h022(P, 5, end_correction=False)
    assert entry(H, 5, (1, 2), (1, 2)) == pytest.approx(-39.7, abs=1e-13)
    assert entry(H, 5, (2, 3), (1, 3)) == pytest.approx(-0.1, abs=1e-15)
    assert entry(H, 5, (1, 2), (-1, 2)) == 0.0
    assert abs(H - H.T).max() == 0


def test_h022_end_correction():
    with_end = build_h022(P, 3)
    without = build_h022(P, 3, end_correction=False)
    assert entry(with_end, 3, (1, 3), (1, 3)) - entry(without, 3, (1, 3), (1, 3)) == pytest.approx(0.1)
    assert entry(with_end, 3, (1, 2), (1, 2)) == entry(without, 3, (1, 2), (1, 2))


def test_h211_entries():
    q = ModelParams(1.0, -15.0, -20.0)
    H1 = build_h211(q, 4, order=1)
    assert entry(H1, 4, (1, 3), (1, 3), Sector.B) == -55.0
    assert entry(H1, 4, (2, 3), (1, 3), Sector.B) == -1.0
    H2 = build_h211(P, 4, order=2)
    assert entry(H2, 4, (-1, 3), (1, 3), Sector.B) == pytest.approx(-10 / 1500, abs=1e-15)
    with pytest.raises(ValueError):
        build_h211(P, 4, order=3)


def test_cross_coupling():
    assert cross_coupling(P, literal=True) == pytest.approx(-0.28284271247461906, abs=1e-15)
    assert cross_coupling(P) == pytest.approx(2 * cross_coupling(P, literal=True))
    C = build_combined(P, 4)
    n = EffectiveBasis("A", 4).dim
    cross = C.toarray()[:n, n:]
    assert np.count_nonzero(cross) == 1
    assert np.count_nonzero(np.any(cross != 0, axis=1)) == 1
    assert abs(C - C.T).max() == 0
    with pytest.raises(ValueError):
        build_combined(P, 4, cross="other")


def test_domain_errors():
    with pytest.raises(PerturbationError):
        build_h022(ModelParams(1.0, 0.0, -1.0), 3)
    with pytest.raises(PerturbationError):
        build_h022(ModelParams(1.0, -5.0, -5.0), 3)
    with pytest.raises(PerturbationError):
        build_h211(ModelParams(1.0, -5.0, 5.0), 3)
    with pytest.raises(PerturbationError):
        cross_coupling(ModelParams(1.0, -5.0, 0.0))


@pytest.mark.parametrize("UV", SEPARATED)
@pytest.mark.parametrize("L", [3, 4, 5])
def test_oracle_equivalence(UV, L):
    p = ModelParams(1.0, *UV)
    A = numeric_second_order("A", p, L)
    assert np.max(np.abs(A - build_h022(p, L, include_constant=False).toarray())) <= 1e-12
    B = numeric_second_order("B", p, L)
    assert np.max(np.abs(B - build_h211(p, L, 2, include_constant=False).toarray())) <= 1e-12
    C = numeric_second_order("combined", p, L)
    assert np.max(np.abs(C - build_combined(p, L, include_constant=False).toarray())) <= 1e-12


def test_oracle_first_order_hops():
    # the oracle is t A1 + t^2 A2, so the first-order part is (4 O(t) - O(2t)) / 2
    p1, p2 = ModelParams(0.5, -15.0, -20.0), ModelParams(1.0, -15.0, -20.0)
    O1, O2 = numeric_second_order("B", p1, 4), numeric_second_order("B", p2, 4)
    first = (4 * O1 - O2) / 2
    expect = build_h211(ModelParams(0.5, -15.0, -20.0), 4, order=1, include_constant=False).toarray()
    assert np.max(np.abs(first - expect)) <= 1e-12


def test_oracle_cross_block_single_entry():
    C = numeric_second_order("combined", P, 4)
    n = EffectiveBasis("A", 4).dim
    nz = np.argwhere(np.abs(C[:n, n:]) > 1e-14)
    assert len(nz) == 1
    assert C[:n, n:][tuple(nz[0])] == pytest.approx(4 * np.sqrt(2) / -10, abs=1e-12)


def test_oracle_detects_resonant_denominator():
    with pytest.raises(PerturbationError):
        numeric_second_order("A", ModelParams(1.0, -10.0, -10.0), 3)


def test_bound_state_energies():
    b1 = bound_state_energy("b1", P)
    assert b1.energy == pytest.approx(-39.68888888888889, abs=1e-12)
    assert b1.exists
    assert b1.momenta == pytest.approx((1.0, -1 / 9))
    b2 = bound_state_energy(Branch.B2, ModelParams(1.0, -15.0, -10.0))
    assert b2.energy == pytest.approx(-31.2, abs=1e-12)
    assert b2.exists
    assert not bound_state_energy("b2", P).exists
    sec = bound_state_energy("secondary", ModelParams(1.0, -9.0, -10.0))
    assert sec.exists and sec.momenta == pytest.approx((-2.0, -0.1))


@settings(max_examples=50, deadline=None)
@given(U=st.floats(-40, 40), V=st.floats(-40, 40))
def test_existence_domains(U, V):
    p = ModelParams(1.0, U, V)
    try:
        b1, b2, sec = (bound_state_energy(b, p) for b in ("b1", "b2", "secondary"))
    except PerturbationError:
        return
    assert b1.exists == (-U / (3 * V) < 1)
    assert b2.exists == (0 < U / (2 * V) < 1)
    assert sec.exists == (0.75 < U / V < 1)


def test_wavefunction_values():
    assert bound_state_wavefunction("b1+", P, PairConfig(1, 2)) == pytest.approx(1 / 81, abs=1e-15)
    assert bound_state_wavefunction("b1+", P, PairConfig(-1, 2)) == 0.0
    assert bound_state_wavefunction("b1-", P, PairConfig(-2, -1)) == pytest.approx(-1 / 81, abs=1e-15)
    q = ModelParams(1.0, -15.0, -10.0)
    assert bound_state_wavefunction("b2", q, PairConfig(-1, 1)) == pytest.approx(0.25, abs=1e-15)
    assert bound_state_wavefunction("b2-", q, PairConfig(-1, 1)) == 0.0
    with pytest.raises(ValueError):
        bound_state_wavefunction("b9", P, PairConfig(1, 2))


def test_b1_maximal_at_seed_config():
    amps = {c: abs(bound_state_wavefunction("b1+", P, c)) for c in pair_configs(8)}
    assert max(amps, key=amps.get) == PairConfig(1, 2) or max(amps, key=amps.get) == PairConfig(-2, -1)


def test_b2_maximal_at_adjacent_pair():
    q = ModelParams(1.0, -15.0, -10.0)
    amps = {c: abs(bound_state_wavefunction("b2", q, c)) for c in pair_configs(6)}
    assert max(amps, key=amps.get) == PairConfig(-1, 1)


def test_bethe_residual_decays():
    E = bound_state_energy("b1", P).energy
    res = []
    for L in (8, 12, 16):
        H = build_h022(P, L)
        for branch in ("b1+", "b1-"):
            v = bound_state_vector(branch, P, L)
            assert np.linalg.norm(v) == pytest.approx(1.0)
        v = bound_state_vector("b1+", P, L)
        res.append(np.linalg.norm(H @ v - E * v))
    assert res[0] > res[1] > res[2]
    assert res[2] / res[1] < 0.5 and res[1] / res[0] < 0.5


def test_b1_doublet_degenerate():
    E = bound_state_energy("b1", P).energy
    w = np.linalg.eigvalsh(build_h022(P, 12).toarray())
    near = np.sort(w[np.argsort(np.abs(w - E))[:2]])
    assert near[1] - near[0] <= 1e-9
    assert abs(near[0] - E) <= 1e-6


def test_b2_absorbed_in_combined_model_b1_survives():
    q = ModelParams(1.0, -20.0, -10.05)  # U close to 2V
    L = 10
    w, X = np.linalg.eigh(build_combined(q, L).toarray())
    n = EffectiveBasis("A", L).dim
    pad = np.zeros(n)
    b2 = np.concatenate([bound_state_vector("b2", q, L), pad])
    assert np.max(np.abs(X.T @ b2) ** 2) < 0.9
    # the b1 pair is degenerate: measure its weight in the two nearest eigenvectors
    doublet = X[:, np.argsort(np.abs(w - bound_state_energy("b1", q).energy))[:2]]
    for branch in ("b1+", "b1-"):
        b1 = np.concatenate([bound_state_vector(branch, q, L), pad])
        assert np.sum((doublet.T @ b1) ** 2) > 0.99


def test_h022_spectrum_brackets_two_cluster_continuum():
    # free dispersion: 2U + 8t^2/U + (4t^2/U)(cos k1 + cos k2)
    w = np.linalg.eigvalsh(build_h022(P, 16).toarray())
    lo, hi = 2 * P.U + 8 / P.U + 8 / P.U, 2 * P.U + 8 / P.U - 8 / P.U
    assert lo < w.min() < lo + 0.005
    assert w.max() > hi


def test_exact_cross_coupling_tracks_full_spectrum():
    # at U = 2V both sectors are degenerate and the inter-sector term acts at leading order
    from biclab.basis import sector
    from biclab.model import build_full_hamiltonian
    p = ModelParams(0.3, -20.0, -10.0)
    full = np.linalg.eigvalsh(build_full_hamiltonian(p, sector(4, 4, boundary="open")).toarray())

    def worst(cross):
        h = np.linalg.eigvalsh(build_combined(p, 4, cross=cross).toarray())
        return max(np.min(np.abs(full - e)) for e in h)

    assert worst("exact") < 1e-3
    assert worst("literal") > 4 * worst("exact")
