import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiraloc.model import (
    DisorderMode,
    DisorderRealization,
    SystemParams,
    build_coupling_matrix,
    derive_rates,
    gamma_nr_for_beta,
    no_disorder,
    realization_seed,
    sample_disorder,
)

unit = st.floats(0.0, 1.0)
angle = st.floats(0.0, math.pi)
seeds = st.integers(0, 2**63)


def _phases(n, w, seed):
    return sample_disorder(SystemParams(n_sites=n, disorder_strength=w), seed)


# ---------------------------------------------------------------- parameters
@pytest.mark.parametrize("d, expected", [(1.0, (1.0, 0.0)), (0.0, (0.5, 0.5)), (0.2, (0.6, 0.4))])
def test_derive_rates(d, expected):
    g_r, g_l = derive_rates(SystemParams(directionality=d))
    assert g_r == pytest.approx(expected[0], abs=1e-15)
    assert g_l == pytest.approx(expected[1], abs=1e-15)


@pytest.mark.parametrize(
    "kw",
    [
        {"n_sites": 0},
        {"gamma": 0.0},
        {"directionality": 1.5},
        {"xi": -0.1},
        {"xi": 4.0},
        {"disorder_strength": 1.2},
        {"gamma_nr": -1.0},
        {"n_sites": 5, "initial_site": 6},
    ],
)
def test_params_validation(kw):
    with pytest.raises(ValueError):
        SystemParams(**kw)


def test_default_center_and_replace():
    p = SystemParams(n_sites=51)
    assert p.initial_site == 26 and p.center_index == 25
    assert SystemParams(n_sites=10).initial_site == 5
    q = p.replace(n_sites=11)
    assert q.initial_site == 6
    assert p.replace(xi=1.0).initial_site == 26


def test_beta_factor_roundtrip():
    g_nr = gamma_nr_for_beta(1.0, 0.8)
    assert SystemParams(gamma_nr=g_nr).beta_factor == pytest.approx(0.8, rel=1e-15)
    with pytest.raises(ValueError):
        gamma_nr_for_beta(1.0, 0.0)


def test_disorder_mode_coerced_from_string():
    assert SystemParams(disorder_mode="onsite").disorder_mode is DisorderMode.ONSITE_POTENTIAL


# ------------------------------------------------------------------ disorder
@given(seed=seeds)
@settings(max_examples=20)
def test_zero_disorder_is_zero(seed):
    assert not np.any(_phases(12, 0.0, seed).phases)


@given(seed=seeds)
@settings(max_examples=20)
def test_sampling_deterministic(seed):
    a = _phases(20, 1.0, seed).phases
    b = _phases(20, 1.0, seed).phases
    assert np.array_equal(a, b)


@given(seed=seeds, w=unit)
@settings(max_examples=50)
def test_support_bound(seed, w):
    assert np.max(np.abs(_phases(40, w, seed).phases)) <= math.pi * w


def test_seeds_differ_and_sites_are_counter_ordered():
    assert _phases(10, 0.5, 1).phases.tolist() != _phases(10, 0.5, 2).phases.tolist()
    # a longer array extends the shorter one: draw k is site k
    short, long = _phases(10, 0.5, 7).phases, _phases(30, 0.5, 7).phases
    assert np.array_equal(short, long[:10])


def test_realization_seed_is_stable_and_distinct():
    s = [realization_seed(0, r) for r in range(100)]
    assert len(set(s)) == 100
    assert realization_seed(0, 3) == realization_seed(0, 3)
    assert realization_seed(1, 3) != realization_seed(0, 3)


def test_realization_phases_readonly():
    w = _phases(5, 0.5, 3)
    with pytest.raises(ValueError):
        w.phases[0] = 1.0
    assert np.array_equal(w.reflected().phases, -w.phases)


# ------------------------------------------------------------------- matrix
def test_cascaded_two_sites():
    p = SystemParams(n_sites=2, directionality=1.0, xi=0.0)
    m = build_coupling_matrix(p, no_disorder(p)).entries
    assert np.allclose(m, [[-0.5, 0], [-1, -0.5]], atol=1e-15)


def test_reciprocal_quarter_wave():
    p = SystemParams(n_sites=2, directionality=0.0, xi=math.pi / 2)
    m = build_coupling_matrix(p, no_disorder(p)).entries
    assert m[0, 1] == pytest.approx(0.5j, abs=1e-15)
    assert m[1, 0] == pytest.approx(0.5j, abs=1e-15)
    assert np.allclose(np.diag(m), -0.5)


def test_phase_disorder_two_sites():
    p = SystemParams(n_sites=2, directionality=0.0, xi=0.0)
    m = build_coupling_matrix(p, DisorderRealization([0.0, math.pi / 2], 0)).entries
    assert m[0, 1] == pytest.approx(0.5j, abs=1e-15)
    assert m[1, 0] == pytest.approx(0.5j, abs=1e-15)


def test_matrix_against_elementwise_definition():
    p = SystemParams(n_sites=9, directionality=0.3, xi=0.7, gamma=1.3, gamma_nr=0.2, disorder_strength=0.6)
    w = sample_disorder(p, 99).phases
    g_r, g_l = derive_rates(p)
    m = build_coupling_matrix(p, DisorderRealization(w, 99)).entries
    for mu in range(9):
        for nu in range(9):
            if nu < mu:
                ref = -g_r * np.exp(-1j * ((mu - nu) * p.xi + (w[mu] - w[nu])))
            elif nu > mu:
                ref = -g_l * np.exp(-1j * ((nu - mu) * p.xi + (w[nu] - w[mu])))
            else:
                ref = -(p.gamma + p.gamma_nr) / 2
            assert m[mu, nu] == pytest.approx(ref, abs=1e-15)


def test_onsite_mode_diagonal():
    p = SystemParams(n_sites=6, directionality=0.2, xi=0.4, disorder_strength=0.5, disorder_mode="onsite")
    w = sample_disorder(p, 4)
    m = build_coupling_matrix(p, w).entries
    clean = build_coupling_matrix(p, no_disorder(p)).entries
    assert np.allclose(np.diag(m), -0.5 - 1j * w.phases, atol=1e-15)
    off = ~np.eye(6, dtype=bool)
    assert np.array_equal(m[off], clean[off])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        build_coupling_matrix(SystemParams(n_sites=4), DisorderRealization(np.zeros(3), 0))


def test_fingerprint_tracks_inputs():
    p = SystemParams(n_sites=5, disorder_strength=0.5)
    a = build_coupling_matrix(p, sample_disorder(p, 1))
    b = build_coupling_matrix(p, sample_disorder(p, 2))
    assert a.params_fingerprint != b.params_fingerprint
    assert a.params_fingerprint == build_coupling_matrix(p, sample_disorder(p, 1)).params_fingerprint
    with pytest.raises(ValueError):
        a.entries[0, 0] = 0


# --------------------------------------------------------------- properties
@given(n=st.integers(1, 30), xi=angle, w=unit, seed=seeds)
@settings(max_examples=60)
def test_reciprocal_matrix_is_complex_symmetric(n, xi, w, seed):
    p = SystemParams(n_sites=n, directionality=0.0, xi=xi, disorder_strength=w)
    m = build_coupling_matrix(p, sample_disorder(p, seed)).entries
    assert np.max(np.abs(m - m.T)) == 0.0


@given(n=st.integers(1, 30), d=st.floats(-1, 1), xi=angle, w=unit, seed=seeds,
       vseed=st.integers(0, 2**32 - 1), mode=st.sampled_from(["phase", "onsite"]))
@settings(max_examples=80)
def test_dissipativity(n, d, xi, w, seed, vseed, mode):
    p = SystemParams(n_sites=n, directionality=d, xi=xi, disorder_strength=w, disorder_mode=mode)
    m = build_coupling_matrix(p, sample_disorder(p, seed)).entries
    rng = np.random.default_rng(vseed)
    for _ in range(5):
        v = rng.normal(size=n) + 1j * rng.normal(size=n)
        v /= np.linalg.norm(v)
        assert (v.conj() @ m @ v).real <= 1e-12
    # equivalently the Hermitian part is negative semidefinite
    assert np.linalg.eigvalsh((m + m.conj().T) / 2).max() <= 1e-12


@given(n=st.integers(1, 30), xi=angle, w=unit, seed=seeds)
@settings(max_examples=60)
def test_cascaded_gauge_identity(n, xi, w, seed):
    p = SystemParams(n_sites=n, directionality=1.0, xi=xi, disorder_strength=w)
    dis = sample_disorder(p, seed)
    u = np.diag(np.exp(1j * dis.phases))
    m_w = build_coupling_matrix(p, dis).entries
    m_0 = build_coupling_matrix(p, no_disorder(p)).entries
    assert np.max(np.abs(u @ m_w @ u.conj().T - m_0)) <= 1e-14


@given(n=st.integers(1, 30), d=st.floats(-1, 1), xi=angle)
@settings(max_examples=40)
def test_modes_coincide_without_disorder(n, d, xi):
    a = SystemParams(n_sites=n, directionality=d, xi=xi, disorder_mode="phase")
    b = a.replace(disorder_mode="onsite")
    assert np.array_equal(build_coupling_matrix(a, no_disorder(a)).entries,
                          build_coupling_matrix(b, no_disorder(b)).entries)
