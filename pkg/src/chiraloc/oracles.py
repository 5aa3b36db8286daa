"""Analytic self-checks run by ``chiraloc oracle-check``.

Each check compares a production code path against an independent closed
form or brute-force construction and reports the worst deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from chiraloc.dynamics import cascaded_solution, propagate, propagate_expm
from chiraloc.model import (
    DisorderRealization,
    SystemParams,
    build_coupling_matrix,
    no_disorder,
    sample_disorder,
)
from chiraloc.observables import (
    entropy_bipartite,
    localization_fit,
    reduced_density_matrix,
    von_neumann_entropy,
)
from chiraloc.spectral import eigenvalues, gap_statistics


@dataclass(frozen=True)
class OracleRow:
    name: str
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.deviation) and self.deviation <= self.tolerance)


def saturation_oracle(n_sites: int, initial_site: int) -> float:
    """Long-time P_t of the D = 0, xi = 0 array by eigen-projection.

    M = -(gamma/2) * ones: the decaying mode is the uniform vector, every vector
    orthogonal to it is stationary, so P_t(inf) = 1 - |<u|e_c>|^2 = 1 - 1/N.
    """
    u = np.ones(n_sites) / math.sqrt(n_sites)
    e = np.zeros(n_sites)
    e[initial_site - 1] = 1.0
    stationary = e - u * (u @ e)
    return float(stationary @ stationary)


def check_scalar_decay() -> OracleRow:
    p = SystemParams(n_sites=1)
    tr = propagate(build_coupling_matrix(p, no_disorder(p)), 1, 2.0)
    return OracleRow("N=1 decay P_t(2) = e^-2", abs(tr.total[-1] - math.exp(-2.0)), 1e-9)


def check_cascaded(seed: int = 11) -> list[OracleRow]:
    p = SystemParams(n_sites=21, directionality=1.0, xi=math.pi / 2, disorder_strength=0.5)
    w = sample_disorder(p, seed)
    tr = propagate(build_coupling_matrix(p, w), p.initial_site, 100.0)
    exact = cascaded_solution(p, w, tr.times)
    clean = propagate(build_coupling_matrix(p, no_disorder(p)), p.initial_site, 100.0)
    return [
        OracleRow("D=1 RK4 vs cascaded closed form", float(np.abs(tr.amplitudes - exact.amplitudes).max()), 1e-7),
        OracleRow("D=1 populations independent of W", float(np.abs(tr.populations - clean.populations).max()), 1e-7),
    ]


def check_saturation() -> OracleRow:
    p = SystemParams(n_sites=11, directionality=0.0, xi=0.0)
    tr = propagate(build_coupling_matrix(p, no_disorder(p)), p.initial_site, 200.0)
    return OracleRow("D=0 xi=0 P_t(inf) = 1 - 1/N", abs(tr.total[-1] - saturation_oracle(11, p.initial_site)), 1e-6)


def check_entropy(count: int = 1000, seed: int = 5) -> OracleRow:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(1, 11))
        a = rng.normal(size=n) + 1j * rng.normal(size=n)
        a *= rng.uniform(0.0, 1.0) / np.linalg.norm(a)
        split = int(rng.integers(0, n + 1))
        s_a, s_b = entropy_bipartite(a, split)
        brute_a = von_neumann_entropy(reduced_density_matrix(a, split))
        brute_b = von_neumann_entropy(reduced_density_matrix(a[::-1], n - split))
        worst = max(worst, abs(s_a - brute_a), abs(s_b - brute_b))
    return OracleRow("entropy closed form vs rho_A eigenvalues", worst, 1e-10)


def check_expm(seed: int = 3) -> OracleRow:
    rng = np.random.default_rng(seed)
    p = SystemParams(n_sites=8, directionality=float(rng.uniform(-1, 1)),
                     xi=float(rng.uniform(0, math.pi)), disorder_strength=float(rng.uniform(0, 1)))
    m = build_coupling_matrix(p, sample_disorder(p, int(rng.integers(2**32))))
    tr = propagate(m, p.initial_site, 20.0)
    ex = propagate_expm(m, p.initial_site, tr.times)
    return OracleRow("RK4 vs matrix exponential (N=8)", float(np.abs(tr.amplitudes - ex.amplitudes).max()), 1e-7)


def check_spectrum() -> OracleRow:
    p = SystemParams(n_sites=3, directionality=0.0, xi=0.0)
    w = np.sort_complex(eigenvalues(build_coupling_matrix(p, no_disorder(p))))
    return OracleRow("N=3 all-ones spectrum {-3/2, 0, 0}", float(np.abs(w - np.array([-1.5, 0, 0])).max()), 1e-12)


def check_gauge(seed: int = 17) -> OracleRow:
    p = SystemParams(n_sites=15, directionality=1.0, xi=1.1, disorder_strength=0.7)
    w = sample_disorder(p, seed)
    m_w = build_coupling_matrix(p, w).entries
    m_0 = build_coupling_matrix(p, no_disorder(p)).entries
    u = np.diag(np.exp(1j * w.phases))
    return OracleRow("D=1 gauge U M(W) U^+ = M(0)", float(np.abs(u @ m_w @ u.conj().T - m_0).max()), 1e-14)


def check_reflection(seed: int = 23) -> OracleRow:
    p = SystemParams(n_sites=31, directionality=0.3, xi=0.7, disorder_strength=0.4)
    w = sample_disorder(p, seed)
    q = p.replace(xi=math.pi - p.xi)
    a = propagate(build_coupling_matrix(p, w), p.initial_site, 50.0)
    b = propagate(build_coupling_matrix(q, DisorderRealization(-w.phases, w.seed)), p.initial_site, 50.0)
    return OracleRow("xi <-> pi - xi with W -> -W", float(np.abs(a.populations - b.populations).max()), 1e-9)


def check_localization_fit() -> OracleRow:
    n = np.arange(1, 52)
    fit = localization_fit(np.exp(-np.abs(n - 26) / 4.0), 26)
    return OracleRow("exponential profile recovers n_L = 4", abs(fit.n_L - 4.0) / 4.0, 1e-12)


def check_gap_ratio() -> OracleRow:
    return OracleRow("gap ratio of {0, 1, 3} = 1/2", abs(gap_statistics([0.0, 1.0, 3.0]).r_a - 0.5), 1e-15)


def run_all() -> list[OracleRow]:
    return [check_scalar_decay(), *check_cascaded(), check_saturation(), check_entropy(),
            check_expm(), check_spectrum(), check_gauge(), check_reflection(),
            check_localization_fit(), check_gap_ratio()]


def format_table(rows: list[OracleRow]) -> str:
    width = max(len(r.name) for r in rows)
    lines = [f"{'check':<{width}}  {'deviation':>10}  {'tolerance':>9}  result"]
    for r in rows:
        lines.append(f"{r.name:<{width}}  {r.deviation:10.3e}  {r.tolerance:9.1e}  {'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)

