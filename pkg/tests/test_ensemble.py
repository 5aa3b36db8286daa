import math
import pickle

import numpy as np
import pytest

from chiraloc.dynamics import propagate
from chiraloc.ensemble import (
    BLOCK_SIZE,
    WORKERS_ENV,
    convergence_check,
    default_workers,
    reference_run,
    run_ensemble,
    total_deviation,
)
from chiraloc.model import SystemParams, build_coupling_matrix, no_disorder, realization_seed, sample_disorder
from chiraloc.observables import entropy_bipartite

P = SystemParams(n_sites=13, directionality=0.3, xi=0.8, disorder_strength=0.4)


def _payload(res):
    return pickle.dumps((res.times.tobytes(), res.avg_populations.tobytes(), res.avg_total.tobytes(),
                         res.avg_entropy_a.tobytes(), res.avg_entropy_b.tobytes(), res.seeds))


def test_single_realization_matches_direct_propagation():
    res = run_ensemble(P, 1, 20.0, base_seed=5)
    dis = sample_disorder(P, realization_seed(5, 0))
    tr = propagate(build_coupling_matrix(P, dis), P.initial_site, 20.0)
    assert np.array_equal(res.avg_populations, tr.populations)
    s_a, s_b = entropy_bipartite(tr.amplitudes)
    assert np.array_equal(res.avg_entropy_a, s_a) and np.array_equal(res.avg_entropy_b, s_b)
    assert res.seeds == (realization_seed(5, 0),)


def test_average_of_explicit_realizations():
    r = BLOCK_SIZE + 3  # spans two blocks
    res = run_ensemble(P, r, 10.0, base_seed=2)
    acc = np.zeros_like(res.avg_populations)
    for k in range(r):
        dis = sample_disorder(P, realization_seed(2, k))
        acc += propagate(build_coupling_matrix(P, dis), P.initial_site, 10.0).populations
    assert np.allclose(res.avg_populations, acc / r, rtol=1e-13, atol=1e-15)


def test_clean_ensemble_is_the_deterministic_trajectory():
    p = P.replace(disorder_strength=0.0)
    res = run_ensemble(p, 37, 15.0)
    tr = propagate(build_coupling_matrix(p, no_disorder(p)), p.initial_site, 15.0)
    assert np.array_equal(res.avg_populations, tr.populations)
    assert res.realization_count == 37 and len(res.seeds) == 37
    assert np.array_equal(reference_run(P, 15.0).avg_populations, tr.populations)


def test_worker_count_does_not_change_bytes():
    a = run_ensemble(P, 40, 10.0, base_seed=9, workers=1)
    b = run_ensemble(P, 40, 10.0, base_seed=9, workers=3)
    c = run_ensemble(P, 40, 10.0, base_seed=9, workers=8)
    assert _payload(a) == _payload(b) == _payload(c)


def test_mean_of_halves():
    full = run_ensemble(P, 64, 10.0, base_seed=4)
    # the halves use seeds 0..31 and 32..63 of the same base
    first = run_ensemble(P, 32, 10.0, base_seed=4)
    seeds_second = [realization_seed(4, r) for r in range(32, 64)]
    acc = np.zeros_like(full.avg_populations)
    for s in seeds_second:
        acc += propagate(build_coupling_matrix(P, sample_disorder(P, s)), P.initial_site, 10.0).populations
    halves = (first.avg_populations + acc / 32) / 2
    assert np.max(np.abs(halves - full.avg_populations)) <= 1e-14


def test_disorder_sign_flips_phases():
    flipped = run_ensemble(P, 5, 10.0, base_seed=1, disorder_sign=-1)
    mirror = run_ensemble(P.replace(xi=math.pi - P.xi), 5, 10.0, base_seed=1)
    assert np.max(np.abs(flipped.avg_populations - mirror.avg_populations)) <= 1e-9
    with pytest.raises(ValueError):
        run_ensemble(P, 5, 10.0, disorder_sign=2)


def test_cascaded_ensemble_equals_clean():
    p = SystemParams(n_sites=15, directionality=1.0, xi=math.pi / 2, disorder_strength=0.5)
    res = run_ensemble(p, 20, 50.0)
    ref = reference_run(p, 50.0)
    assert np.max(np.abs(res.avg_populations - ref.avg_populations)) <= 1e-7


def test_result_is_read_only():
    res = run_ensemble(P, 2, 5.0)
    with pytest.raises(ValueError):
        res.avg_total[0] = 0.0


def test_convergence_trivial_cases():
    assert convergence_check(P.replace(disorder_strength=0.0), 3, 40, 10.0).deviation == 0.0
    rep = convergence_check(P, 20, 20, 10.0, base_seed=1)
    assert rep.deviation == 0.0 and rep.passed
    with pytest.raises(ValueError):
        convergence_check(P, 30, 20, 10.0)


def test_total_deviation_is_relative():
    a = run_ensemble(P, 8, 10.0, base_seed=0)
    b = run_ensemble(P, 8, 10.0, base_seed=1)
    expect = np.max(np.abs(a.avg_total - b.avg_total) / b.avg_total)
    assert total_deviation(a, b) == pytest.approx(expect, rel=1e-15)


def test_rejects_empty_ensemble():
    with pytest.raises(ValueError):
        run_ensemble(P, 0, 10.0)


def test_workers_env(monkeypatch):
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert default_workers() == 3
    monkeypatch.delenv(WORKERS_ENV)
    assert default_workers() >= 1
