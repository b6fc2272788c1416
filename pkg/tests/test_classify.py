import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biclab.basis import sector
from biclab.classify import (Classification, TailClassifier, TailProfile, Verdict, classify_candidate,
                             fit_decay, match_candidate_across_sizes, tail_profile)
from biclab.model import ModelParams, build_full_hamiltonian
from biclab.solve import eig_dense


def family(sizes, tail):
    return [TailProfile(L, np.array([tail(r, L) for r in range(L + 1)])) for L in sizes]


def bound(r, L):
    return np.exp(-r)


def resonance(c):
    return lambda r, L: np.exp(-r) + c * (1 - 1 / L)


def test_bound_family_is_bic():
    res = classify_candidate(family([5, 11, 17, 23], bound))
    assert res.verdict is Verdict.BIC
    assert res.decay_rate == pytest.approx(-1.0, abs=1e-12)


def test_resonance_family():
    # a size ladder with >20 % growth per step at every r
    res = classify_candidate(family([3, 6, 12], resonance(1.0)))
    assert res.verdict is Verdict.RESONANCE
    assert all(res.evidence["increased"])


def test_slowly_growing_tail_on_long_ladder_is_not_flagged():
    # growth below eps at every step: the rule sees no increase
    res = classify_candidate(family([5, 11, 17, 23], resonance(1.0)))
    assert not any(res.evidence["increased"])


def test_non_monotonic_is_undecided():
    def wobble(r, L):
        return np.exp(-r) * (2.0 if L == 4 else 1.0)
    res = classify_candidate(family([3, 4, 5], wobble), r0=3)
    assert res.verdict is Verdict.UNDECIDED
    assert res.evidence["non_monotonic"] == [True]


def test_growth_then_plateau_is_resonance():
    def plateau(r, L):
        return np.exp(-r) * (1.0 if L == 3 else 2.0)
    assert classify_candidate(family([3, 4, 5], plateau)).verdict is Verdict.RESONANCE


def test_bic_needs_negative_decay():
    flat = classify_candidate(family([4, 5, 6], lambda r, L: 0.01))
    assert flat.verdict is Verdict.UNDECIDED
    assert flat.decay_rate == pytest.approx(0.0, abs=1e-12)


def test_errors():
    with pytest.raises(ValueError, match=">= 3"):
        classify_candidate(family([5, 11], bound))
    with pytest.raises(ValueError, match="distinct"):
        classify_candidate(family([5, 5, 11], bound))
    with pytest.raises(ValueError):
        classify_candidate(family([3, 4, 5], bound), r0=4)
    with pytest.raises(ValueError):
        TailProfile(3, np.zeros(3))


def test_fit_decay_excludes_floor():
    tail = np.array([1, 0.5, 0.2, np.exp(-3), np.exp(-4), 0.0])
    assert fit_decay(TailProfile(5, tail), r0=3) == pytest.approx(-1.0, abs=1e-12)
    assert fit_decay(TailProfile(3, np.array([1.0, 0.1, 0.0, 0.0])), r0=3) is None


@settings(max_examples=30, deadline=None)
@given(perm=st.permutations([5, 8, 11, 14]), r0=st.integers(1, 5), eps=st.floats(0.0, 1.0),
       c=st.floats(0.0, 2.0))
def test_verdict_ignores_size_order(perm, r0, eps, c):
    profiles = family(perm, resonance(c))
    a = classify_candidate(profiles, r0, eps)
    b = classify_candidate(list(reversed(profiles)), r0, eps)
    assert a.verdict is b.verdict
    assert a.evidence == b.evidence
    if a.verdict is Verdict.BIC:
        assert a.decay_rate is not None and a.decay_rate < 0


def test_tail_profile_of_impurity_state():
    b = sector(3, 1)
    v = np.zeros(b.dim)
    v[b.rank([0, 0, 0, 1, 0, 0, 0])] = 1.0
    p = tail_profile(v, b, energy=-1.0)
    assert p.tail.tolist() == [1.0, 0.0, 0.0, 0.0]
    assert p.parity is None


def test_tail_profile_even_state_symmetrization_noop():
    b = sector(4, 2, "even")
    s = eig_dense(build_full_hamiltonian(ModelParams(1.0, -6.0, -9.0), b))
    from biclab.observe import density
    rho = density(s.vectors[:, 0], b).rho
    p = tail_profile(s.vectors[:, 0], b)
    assert np.allclose(p.tail, rho[4:], atol=1e-12)
    assert p.parity.value == "even"


def test_match_selects_narrowest():
    p = ModelParams(1.0, -20.0, -10.0)
    spectra = {}
    for L in (4, 5, 6):
        b = sector(L, 4, "even")
        spectra[L] = (eig_dense(build_full_hamiltonian(p, b)), b)
    picks = match_candidate_across_sizes(spectra, -39.69, "even", 0.5)
    energies = [s.energy for s in picks.values()]
    assert max(energies) - min(energies) < 0.05
    assert all(s.width < 2.0 for s in picks.values())
    with pytest.raises(LookupError, match="L=4"):
        match_candidate_across_sizes(spectra, 1e3, "even", 0.5)
    with pytest.raises(ValueError):
        match_candidate_across_sizes(spectra, -39.69, "odd")


def test_estimator_wrapper():
    clf = TailClassifier(r0=2, eps=0.1)
    assert clf.get_params() == {"r0": 2, "eps": 0.1}
    clf.fit(family([5, 11, 17], bound))
    assert clf.verdict_ is Verdict.BIC
    assert clf.predict([family([5, 11, 17], bound), family([3, 6, 12], resonance(1.0))]) == [
        Verdict.BIC, Verdict.RESONANCE]
    assert isinstance(classify_candidate(family([5, 11, 17], bound)), Classification)
