"""Acceptance criteria 1-10 at their stated tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary.  Long runs carry the ``slow`` marker.
"""

import math

import numpy as np
import pytest
import scipy.linalg

from chiraloc import experiments as ex
from chiraloc.dynamics import propagate
from chiraloc.ensemble import convergence_check, reference_run, run_ensemble
from chiraloc.model import (
    DisorderMode,
    SystemParams,
    build_coupling_matrix,
    no_disorder,
    sample_disorder,
)
from chiraloc.observables import (
    Phase,
    classify_transport,
    entropy_bipartite,
    localization_fit,
    profile_at,
    reduced_density_matrix,
    von_neumann_entropy,
)
from chiraloc.oracles import saturation_oracle
from chiraloc.spectral import (
    RESIDUAL_BOUND,
    energy_levels,
    ensemble_gap_report,
    gap_statistics,
    spectrum_residuals,
)
from oracles_fock import block_a_density
from oracles_fock import entropy as fock_entropy

MAP_PARAMS = SystemParams(n_sites=51, directionality=0.2, xi=0.0)


# 1 ------------------------------------------------------------------------
def test_criterion_01_cascaded_gauge_invariance(criterion):
    p = SystemParams(n_sites=21, directionality=1.0, xi=math.pi / 2, disorder_strength=0.5)
    dis = run_ensemble(p, 20, 100.0, base_seed=1)
    clean = reference_run(p, 100.0)
    dev = float(np.max(np.abs(dis.avg_populations - clean.avg_populations)))
    ok = dev <= 1e-7
    criterion(1, "cascaded gauge invariance", ok, f"max|<P_n> - P_n(0)| = {dev:.3e} (tol 1e-7)")
    assert ok


# 2 ------------------------------------------------------------------------
def test_criterion_02_saturation(criterion):
    p = SystemParams(n_sites=11, directionality=0.0, xi=0.0)
    tr = propagate(build_coupling_matrix(p, no_disorder(p)), p.initial_site, 200.0)
    expect = saturation_oracle(11, p.initial_site)
    dev = abs(tr.total[-1] - expect)
    ok = dev <= 1e-6 and abs(expect - 10 / 11) <= 1e-15
    criterion(2, "decoherence-free saturation", ok, f"|P_t(200) - 10/11| = {dev:.3e} (tol 1e-6)")
    assert ok


# 3 ------------------------------------------------------------------------
def test_criterion_03_entropy_oracle(criterion):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 11))
        split = int(rng.integers(0, n + 1))
        a = rng.normal(size=n) + 1j * rng.normal(size=n)
        a *= rng.uniform(0, 1) / np.linalg.norm(a)
        s_a, s_b = entropy_bipartite(a, split)
        # explicit rho_A (vacuum + rank-one block) and the full Fock-space partial trace
        worst = max(
            worst,
            abs(s_a - von_neumann_entropy(reduced_density_matrix(a, split))),
            abs(s_a - fock_entropy(block_a_density(a, split))),
            abs(s_b - fock_entropy(block_a_density(a[::-1], n - split))),
        )
    ok = worst <= 1e-10
    criterion(3, "entropy oracle equivalence", ok, f"max deviation over 1000 states = {worst:.3e} (tol 1e-10)")
    assert ok


# 4 ------------------------------------------------------------------------
def test_criterion_04_reflection_symmetry(criterion):
    p = SystemParams(n_sites=31, directionality=0.3, xi=0.6, disorder_strength=0.4)
    q = p.replace(xi=math.pi - p.xi)
    worst = 0.0
    for seed in range(5):
        dis = sample_disorder(p, seed)
        a = propagate(build_coupling_matrix(p, dis), p.initial_site, 200.0)
        b = propagate(build_coupling_matrix(q, dis.reflected()), p.initial_site, 200.0)
        worst = max(worst, float(np.max(np.abs(a.populations - b.populations))))
    ok = worst <= 1e-9
    criterion(4, "xi <-> pi - xi symmetry", ok, f"max population difference = {worst:.3e} (tol 1e-9)")
    assert ok


# 5 ------------------------------------------------------------------------
def test_criterion_05_norm_monotonicity(criterion):
    rng = np.random.default_rng(5)
    worst = -np.inf
    for _ in range(50):
        n = int(rng.integers(1, 52))
        p = SystemParams(
            n_sites=n,
            directionality=float(rng.uniform(-1, 1)),
            xi=float(rng.uniform(0, math.pi)),
            disorder_strength=float(rng.uniform(0, 1)),
            gamma_nr=float(rng.choice([0.0, rng.uniform(0, 0.5)])),
            disorder_mode=DisorderMode(rng.choice(["phase", "onsite"])),
            initial_site=int(rng.integers(1, n + 1)),
        )
        tr = propagate(build_coupling_matrix(p, sample_disorder(p, int(rng.integers(2**32)))),
                       p.initial_site, 200.0)
        worst = max(worst, float(np.max(np.diff(tr.total))) if tr.total.size > 1 else -np.inf)
    ok = worst <= 1e-8
    criterion(5, "norm monotonicity sweep", ok, f"max P_t increase over 50 draws = {worst:.3e} (tol 1e-8)")
    assert ok


# 6 ------------------------------------------------------------------------
def test_criterion_06_localized_profile(criterion):
    ref = reference_run(MAP_PARAMS, 1500.0)
    ens = run_ensemble(MAP_PARAMS.replace(disorder_strength=0.2), 200, 1500.0, base_seed=0)
    cut = profile_at(ens.times, ens.avg_populations, 1500.0)
    fit = localization_fit(cut, MAP_PARAMS.initial_site)
    phase_w, _, _ = classify_transport(ens.avg_populations, ref.avg_populations, MAP_PARAMS.initial_site)
    phase_0, _, _ = classify_transport(ref.avg_populations, ref.avg_populations, MAP_PARAMS.initial_site)
    peaked = int(np.argmax(cut)) + 1 == MAP_PARAMS.initial_site
    ok = fit.ok and fit.r_squared >= 0.9 and peaked and phase_w is Phase.LOCALIZED and phase_0 is Phase.DELOCALIZED
    criterion(6, "localized profile at w=0.2", ok,
              f"w=0.2: R^2 = {fit.r_squared:.4f}, n_L = {fit.n_L:.3f}, peak at site {int(np.argmax(cut)) + 1}, "
              f"{phase_w.value}; w=0: {phase_0.value}")
    assert ok


# 7 ------------------------------------------------------------------------
@pytest.mark.slow
def test_criterion_07_convergence(criterion):
    devs = {}
    for w in (0.01, 0.02, 0.2):
        rep = convergence_check(MAP_PARAMS.replace(disorder_strength=w), 200, 2000, 1500.0, base_seed=0)
        devs[w] = rep.deviation
    worst = max(devs.values())
    ok = worst <= 0.02
    detail = ", ".join(f"w={w:g}: {d:.4f}" for w, d in devs.items())
    criterion(7, "convergence R=200 vs R=2000", ok, f"max relative <P_t> deviation {detail} (tol 0.02)")
    assert ok


# 8 / 10 -------------------------------------------------------------------
SPECTRAL_W = (0.05, 0.1, 0.2, 0.5)


@pytest.fixture(scope="module")
def spectral_reports():
    p = SystemParams(n_sites=51, directionality=0.0, xi=math.pi / 2)
    return {w: ensemble_gap_report(p.replace(disorder_strength=w), 200, seed=0) for w in SPECTRAL_W}


def test_criterion_08_spectral_monotonicity(criterion, spectral_reports):
    r_bar = [spectral_reports[w].r_bar for w in SPECTRAL_W]
    v_i = [spectral_reports[w].v_I for w in SPECTRAL_W]
    # the criterion compares w=0.05 with w=0.5; r_bar is also strictly monotone on the
    # intermediate grid, while v_I saturates above w~0.15 (printed, not asserted)
    ok = all(np.diff(r_bar) < 0) and v_i[-1] > v_i[0]
    detail = "; ".join(f"w={w:g}: r={r:.4f} v_I={v:.4f}" for w, r, v in zip(SPECTRAL_W, r_bar, v_i))
    criterion(8, "spectral statistics N=51 R=200", ok, detail)
    assert ok


def _single_gap_ratio(n, w, seed=0):
    p = SystemParams(n_sites=n, directionality=0.0, xi=math.pi / 2, disorder_strength=w)
    m = build_coupling_matrix(p, sample_disorder(p, seed)).entries
    lam, vec = scipy.linalg.eig(m)
    residual = float(spectrum_residuals(m, lam, vec).max() / np.linalg.norm(m, 2))
    trace_err = abs(complex(lam.sum()) + n / 2)
    return gap_statistics(energy_levels(lam)).r_a, residual, trace_err


@pytest.mark.slow
def test_criterion_08_large_n(criterion):
    r0, res0, tr0 = _single_gap_ratio(1001, 0.0)
    r5, res5, tr5 = _single_gap_ratio(1001, 0.5)
    ok = abs(r0 - 0.97) <= 0.05 and abs(r5 - 0.4) <= 0.05
    criterion("8L", "spectral statistics N=1001", ok,
              f"r(w=0) = {r0:.4f} (0.97 +- 0.05), r(w=0.5) = {r5:.4f} (0.4 +- 0.05)")
    res_ok = max(res0, res5) <= RESIDUAL_BOUND and max(tr0, tr5) <= 1e-8 * 1001
    criterion("10L", "eigen-solver validation N=1001", res_ok,
              f"max residual/||M|| = {max(res0, res5):.3e}, trace error = {max(tr0, tr5):.3e} (tol {1e-8 * 1001:.1e})")
    assert ok and res_ok


def test_criterion_10_eigen_validation(criterion, spectral_reports):
    residual = max(r.max_residual_ratio for r in spectral_reports.values())
    trace = max(r.max_trace_error for r in spectral_reports.values())
    ok = residual <= RESIDUAL_BOUND and trace <= 1e-8 * 51
    criterion(10, "eigen-solver validation N=51", ok,
              f"max residual/||M|| = {residual:.3e} (tol 1e-8), max |sum(lambda) + N/2| = {trace:.3e} "
              f"(tol {1e-8 * 51:.1e})")
    assert ok


# 9 ------------------------------------------------------------------------
@pytest.mark.slow
def test_criterion_09_reentrance(criterion):
    xi_grid = np.linspace(0.0, math.pi, 9)
    curve = ex.scan_reentrance(0.2, 0.03, xi_grid, n_sites=51, horizon=5000.0, realizations=200, seed=0)
    pattern = curve.sign_pattern()
    ok = pattern == [-1, 1, -1]
    ratios = ", ".join(f"{r:.3f}" for r in curve.ratios)
    criterion(9, "re-entrance shape D=0.2 w=0.03", ok, f"ratios over xi/pi in [0, 1]: [{ratios}] -> {pattern}")
    assert ok
