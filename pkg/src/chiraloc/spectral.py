"""Eigen-spectra of the coupling matrix and adjacent-gap-ratio statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from chiraloc.model import (
    CouplingMatrix,
    SystemParams,
    build_coupling_matrix,
    realization_seed,
    sample_disorder,
)

R_GOE = 0.53
R_POISSON = 0.39
RESIDUAL_BOUND = 1e-8
DEGENERATE_GAP = 1e-12


class SpectrumError(ArithmeticError):
    pass


def eigenvalues(matrix: CouplingMatrix, check: bool = True) -> np.ndarray:
    """All eigenvalues of M from LAPACK's balanced Hessenberg + shifted QR path.

    With ``check`` each eigenpair must satisfy ||M v - lambda v|| <= 1e-8 ||M|| ||v||,
    which bounds the smallest singular value of M - lambda I from above.
    """
    m = np.asarray(matrix.entries if isinstance(matrix, CouplingMatrix) else matrix, dtype=complex)
    try:
        if not check:
            return scipy.linalg.eigvals(m, check_finite=True)
        w, v = scipy.linalg.eig(m, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectrumError(f"eigensolver failed: {exc}") from exc
    residual = spectrum_residuals(m, w, v)
    bound = RESIDUAL_BOUND * max(np.linalg.norm(m, 2), np.finfo(float).tiny)
    if np.any(residual > bound):
        worst = int(np.argmax(residual))
        raise SpectrumError(
            f"eigenvalue {w[worst]} has residual {residual[worst]:.3g} > {bound:.3g}"
        )
    return w


def spectrum_residuals(m, w, v) -> np.ndarray:
    """||M v_k - w_k v_k|| / ||v_k|| for each column k."""
    r = m @ v - v * w[None, :]
    return np.linalg.norm(r, axis=0) / np.linalg.norm(v, axis=0)


def energy_levels(spectrum) -> np.ndarray:
    """Real parts of E = i*lambda, the eigenvalues of H_eff with da/dt = -i H_eff a."""
    return -np.imag(np.asarray(spectrum))


@dataclass(frozen=True)
class GapStatistics:
    sorted_levels: np.ndarray
    gaps: np.ndarray
    ratios: np.ndarray
    r_a: float
    v_I: float
    excluded: int


def gap_statistics(levels, degenerate_gap: float = DEGENERATE_GAP) -> GapStatistics:
    """Adjacent gap ratios of the ascending real parts of ``levels``.

    Gaps below ``degenerate_gap`` (after mapping the spectrum span onto [0, 1])
    count as zero; a ratio whose two gaps are both zero is 0/0 and is excluded.
    """
    e = np.sort(np.real(np.asarray(levels)))
    if e.size < 3:
        raise ValueError(f"need at least 3 levels, got {e.size}")
    gaps = np.diff(e)
    span = e[-1] - e[0]
    if span <= 0:
        raise ValueError("too few distinct levels: the spectrum is fully degenerate")
    scaled = gaps / span
    gaps = np.where(scaled < degenerate_gap, 0.0, gaps)
    lo = np.minimum(gaps[1:], gaps[:-1])
    hi = np.maximum(gaps[1:], gaps[:-1])
    valid = hi > 0
    ratios = lo[valid] / hi[valid]
    excluded = int((~valid).sum())
    if ratios.size == 0:
        raise ValueError("too few distinct levels: every gap ratio is 0/0")
    r_a = float(ratios.mean())
    v_i = float(np.mean(ratios**2) - r_a**2)
    return GapStatistics(e, gaps, ratios, r_a, v_i, excluded)


@dataclass(frozen=True)
class GapReport:
    r_bar: float
    v_I: float
    r_a: np.ndarray
    v_I_samples: np.ndarray
    per_gap_mean: np.ndarray
    bin_edges: np.ndarray
    per_gap_hist: np.ndarray
    pooled_hist: np.ndarray
    excluded: int
    max_residual_ratio: float
    max_trace_error: float


def ensemble_gap_report(params: SystemParams, realizations: int, seed: int, bins: int = 50) -> GapReport:
    """Gap-ratio statistics of the D = 0 spectrum over disorder realizations.

    ``per_gap_hist`` histograms the ensemble mean of each r_n over n;
    ``pooled_hist`` histograms every r_n of every realization.  Both are
    densities on ``bins`` uniform bins over [0, 1].
    """
    if params.directionality != 0:
        raise ValueError("level statistics are defined at directionality 0")
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    r_a = np.empty(realizations)
    v_i = np.empty(realizations)
    ratio_rows = []
    excluded = 0
    worst_residual = 0.0
    worst_trace = 0.0
    trace_expected = -params.n_sites * (params.gamma + params.gamma_nr) / 2.0
    for k in range(realizations):
        s = realization_seed(seed, k)
        m = build_coupling_matrix(params, sample_disorder(params, s))
        w, v = scipy.linalg.eig(m.entries)
        res = spectrum_residuals(m.entries, w, v)
        norm = np.linalg.norm(m.entries, 2)
        worst_residual = max(worst_residual, float(res.max() / norm))
        if worst_residual > RESIDUAL_BOUND:
            raise SpectrumError(f"realization {k}: eigen residual {worst_residual:.3g} exceeds bound")
        worst_trace = max(worst_trace, abs(complex(w.sum()) - trace_expected))
        stats = gap_statistics(energy_levels(w))
        r_a[k], v_i[k] = stats.r_a, stats.v_I
        excluded += stats.excluded
        ratio_rows.append(stats.ratios)
    edges = np.linspace(0.0, 1.0, bins + 1)
    pooled = np.concatenate(ratio_rows)
    pooled_hist, _ = np.histogram(pooled, bins=edges, density=True)
    if len({row.size for row in ratio_rows}) == 1:
        per_gap = np.mean(np.vstack(ratio_rows), axis=0)
    else:
        # exclusions changed the ratio count; align by truncation to the shortest row
        width = min(row.size for row in ratio_rows)
        per_gap = np.mean(np.vstack([row[:width] for row in ratio_rows]), axis=0)
    per_gap_hist, _ = np.histogram(per_gap, bins=edges, density=True)
    return GapReport(
        r_bar=float(r_a.mean()),
        v_I=float(v_i.mean()),
        r_a=r_a,
        v_I_samples=v_i,
        per_gap_mean=per_gap,
        bin_edges=edges,
        per_gap_hist=per_gap_hist,
        pooled_hist=pooled_hist,
        excluded=excluded,
        max_residual_ratio=worst_residual,
        max_trace_error=worst_trace,
    )
