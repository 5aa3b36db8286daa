"""Parameter scans producing the data behind the population maps, the (D, w)
phase diagram, the re-entrance curves, zeta_L(D) and the level statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from chiraloc.dynamics import DEFAULT_STEP, DEFAULT_STRIDE
from chiraloc.ensemble import EnsembleResult, reference_run, run_ensemble
from chiraloc.model import SystemParams, realization_seed
from chiraloc.observables import (
    ExponentRatio,
    LocalizationFit,
    Phase,
    classify_transport,
    exponent_ratio,
    localization_fit,
    profile_at,
    reference_time,
    rpr_series,
)
from chiraloc.spectral import GapReport, ensemble_gap_report

REENTRANCE_THRESHOLD = 0.5


def default_d_grid() -> np.ndarray:
    return np.linspace(0.05, 1.0, 9)


def default_w_grid() -> np.ndarray:
    return np.logspace(math.log10(0.005), 0.0, 12)


def is_excluded(directionality: float, xi: float) -> bool:
    """D = 0 with xi in {0, pi}: decoherence-free modes trap the excitation without disorder."""
    return directionality == 0 and (math.isclose(xi, 0.0, abs_tol=1e-12)
                                    or math.isclose(xi, math.pi, abs_tol=1e-12))


def cell_seed(seed: int, d_index: int, w_index: int) -> int:
    # independent of xi so that scans at xi and pi - xi share realizations
    return realization_seed(realization_seed(seed, d_index), w_index)


@dataclass(frozen=True)
class ScanCell:
    directionality: float
    w_bar: float
    label: Phase
    seed: int
    max_excursion: int
    reference_reach: int


@dataclass(frozen=True)
class Transition:
    directionality: float
    w_low: float
    w_high: float
    into: Phase


@dataclass(frozen=True)
class PhaseBoundaryScan:
    xi: float
    base: SystemParams
    d_grid: tuple[float, ...]
    w_grid: tuple[float, ...]
    cells: tuple[ScanCell, ...]
    transitions: tuple[Transition, ...]
    horizon: float
    realizations: int
    seed: int

    def label(self, d: float, w: float) -> Phase:
        for c in self.cells:
            if c.directionality == d and c.w_bar == w:
                return c.label
        raise KeyError((d, w))

    def boundary(self) -> dict[float, float | None]:
        """Smallest w labelled Localized for every D (None if there is none)."""
        out = {}
        for d in self.d_grid:
            loc = [c.w_bar for c in self.cells if c.directionality == d and c.label is Phase.LOCALIZED]
            out[d] = min(loc) if loc else None
        return out


def classify_cell(params: SystemParams, reference: EnsembleResult, horizon: float,
                  realizations: int, seed: int, edge_margin: int = 2, **run_kw) -> ScanCell:
    ens = run_ensemble(params, realizations, horizon, seed, **run_kw)
    phase, rec, ref_rec = classify_transport(
        ens.avg_populations, reference.avg_populations, params.initial_site, edge_margin
    )
    if is_excluded(params.directionality, params.xi):
        phase = Phase.EXCLUDED
    return ScanCell(params.directionality, params.disorder_strength, phase, seed,
                    rec.max_excursion, ref_rec.max_excursion)


def _transitions(d: float, cells: list[ScanCell]) -> list[Transition]:
    ordered = sorted((c for c in cells if c.label is not Phase.EXCLUDED), key=lambda c: c.w_bar)
    return [
        Transition(d, lo.w_bar, hi.w_bar, hi.label)
        for lo, hi in zip(ordered, ordered[1:])
        if lo.label is not hi.label
    ]


def scan_phase_boundary(
    xi: float,
    d_grid=None,
    w_grid=None,
    n_sites: int = 51,
    horizon: float = 1500.0,
    realizations: int = 200,
    seed: int = 0,
    *,
    edge_margin: int = 2,
    disorder_sign: int = 1,
    base: SystemParams | None = None,
    progress=None,
    **run_kw,
) -> PhaseBoundaryScan:
    """Label every (D, w) cell Localized/Delocalized with the transport criterion.

    All Localized/Delocalized changes along w are kept for each D so that
    re-entrant stripes show up as several transitions.
    """
    d_grid = default_d_grid() if d_grid is None else np.asarray(d_grid, dtype=float)
    w_grid = default_w_grid() if w_grid is None else np.asarray(w_grid, dtype=float)
    if d_grid.size == 0 or w_grid.size == 0:
        raise ValueError("scan grids must be nonempty")
    base = (base or SystemParams(n_sites=n_sites)).replace(n_sites=n_sites, xi=xi)
    cells, transitions = [], []
    for i, d in enumerate(d_grid):
        p_d = base.replace(directionality=float(d))
        ref = reference_run(p_d, horizon, **_prop_kw(run_kw))
        column = []
        for j, w in enumerate(w_grid):
            s = cell_seed(seed, i, j)
            cell = classify_cell(p_d.replace(disorder_strength=float(w)), ref, horizon,
                                 realizations, s, edge_margin, disorder_sign=disorder_sign, **run_kw)
            column.append(cell)
            if progress:
                progress(cell)
        cells.extend(column)
        transitions.extend(_transitions(float(d), column))
    return PhaseBoundaryScan(float(xi), base, tuple(map(float, d_grid)), tuple(map(float, w_grid)),
                             tuple(cells), tuple(transitions), float(horizon), int(realizations), int(seed))


def _prop_kw(run_kw: dict) -> dict:
    return {k: v for k, v in run_kw.items() if k in ("stride", "step")}


@dataclass(frozen=True)
class ReentrancePoint:
    xi: float
    ratio_a: ExponentRatio
    ratio_b: ExponentRatio

    @property
    def ratio(self) -> float:
        return self.ratio_a.ratio


@dataclass(frozen=True)
class ReentranceCurve:
    directionality: float
    w_bar: float
    points: tuple[ReentrancePoint, ...]
    horizon: float
    stride: float
    realizations: int
    seed: int
    threshold: float = REENTRANCE_THRESHOLD

    @property
    def xi(self) -> np.ndarray:
        return np.array([p.xi for p in self.points])

    @property
    def ratios(self) -> np.ndarray:
        return np.array([p.ratio for p in self.points])

    def sign_pattern(self) -> list[int]:
        """Run-length-collapsed signs of (ratio - threshold); failed fits skipped."""
        signs = [1 if r > self.threshold else -1 for r in self.ratios if np.isfinite(r)]
        return [s for k, s in enumerate(signs) if k == 0 or s != signs[k - 1]]


def scan_reentrance(
    directionality: float,
    w_bar: float,
    xi_grid,
    n_sites: int = 51,
    horizon: float = 5000.0,
    realizations: int = 200,
    seed: int = 0,
    *,
    stride: float = 5.0,
    level: float = 0.1,
    min_fraction: float = 0.2,
    base: SystemParams | None = None,
    **run_kw,
) -> ReentranceCurve:
    """Entropy exponent ratio beta_w / beta_0 across xi at fixed (D, w).

    The same realizations (seed) are used at every xi.
    """
    xi_grid = np.asarray(xi_grid, dtype=float)
    if np.any(xi_grid < 0) or np.any(xi_grid > math.pi):
        raise ValueError("xi grid must lie in [0, pi]")
    base = (base or SystemParams(n_sites=n_sites)).replace(
        n_sites=n_sites, directionality=directionality, disorder_strength=w_bar)
    points = []
    for xi in xi_grid:
        p = base.replace(xi=float(xi))
        ref = reference_run(p, horizon, stride=stride, **_prop_kw(run_kw))
        if w_bar == 0:
            ens = ref
        else:
            ens = run_ensemble(p, realizations, horizon, seed, stride=stride, **run_kw)
        ra = exponent_ratio(ens.times, ens.avg_entropy_a, ref.avg_entropy_a, level, min_fraction)
        rb = exponent_ratio(ens.times, ens.avg_entropy_b, ref.avg_entropy_b, level, min_fraction)
        points.append(ReentrancePoint(float(xi), ra, rb))
    return ReentranceCurve(float(directionality), float(w_bar), tuple(points), float(horizon),
                           float(stride), int(realizations), int(seed))


@dataclass(frozen=True)
class ZetaPoint:
    xi: float
    directionality: float
    t_ref: float
    fit: LocalizationFit
    reason: str = ""


def find_reference_time(params: SystemParams, level: float = 0.1, horizon: float = 1500.0,
                        max_horizon: float = 48000.0, stride: float = DEFAULT_STRIDE,
                        step: float = DEFAULT_STEP) -> float:
    """First time the disorder-free P_t drops below ``level``, extending the horizon if needed."""
    h = horizon
    while True:
        ref = reference_run(params, h, stride=stride, step=step)
        try:
            return reference_time(ref.times, ref.avg_total, level)
        except ValueError:
            if h >= max_horizon:
                raise
            h = min(2 * h, max_horizon)


def measure_zeta(params: SystemParams, realizations: int, seed: int, level: float = 0.1,
                 max_horizon: float = 48000.0, **run_kw) -> ZetaPoint:
    stride = run_kw.get("stride", DEFAULT_STRIDE)
    try:
        t_ref = find_reference_time(params, level, max_horizon=max_horizon, **_prop_kw(run_kw))
    except ValueError as exc:
        nan = float("nan")
        fit = LocalizationFit(nan, nan, nan, (0, 0), ok=False, reason=str(exc))
        return ZetaPoint(params.xi, params.directionality, nan, fit, str(exc))
    horizon = max(stride, math.ceil(t_ref / stride) * stride)
    ens = run_ensemble(params, realizations, horizon, seed, **run_kw)
    profile = profile_at(ens.times, ens.avg_populations, t_ref)
    fit = localization_fit(profile, params.initial_site)
    return ZetaPoint(params.xi, params.directionality, t_ref, fit, fit.reason)


def scan_localization_length(
    w_bar: float = 0.5,
    d_grid=None,
    xi_set=(0.0, math.pi / 8, math.pi / 2),
    n_sites: int = 51,
    realizations: int = 200,
    seed: int = 0,
    *,
    level: float = 0.1,
    base: SystemParams | None = None,
    **run_kw,
) -> list[ZetaPoint]:
    """zeta_L at the time the disorder-free P_t falls to ``level``, per (xi, D)."""
    d_grid = default_d_grid() if d_grid is None else np.asarray(d_grid, dtype=float)
    base = (base or SystemParams(n_sites=n_sites)).replace(n_sites=n_sites, disorder_strength=w_bar)
    out = []
    for xi in xi_set:
        for d in d_grid:
            p = base.replace(xi=float(xi), directionality=float(d))
            out.append(measure_zeta(p, realizations, seed, level, **run_kw))
    return out


@dataclass(frozen=True)
class PopulationPanel:
    w_bar: float
    ensemble: EnsembleResult
    cut: np.ndarray
    rpr: np.ndarray
    phase: Phase
    fit: LocalizationFit


@dataclass(frozen=True)
class PopulationMap:
    params: SystemParams
    t_cut: float
    reference: EnsembleResult
    reference_cut: np.ndarray
    panels: tuple[PopulationPanel, ...] = field(default=())


def emit_population_map(
    params: SystemParams,
    w_list=(0.0, 0.01, 0.02, 0.2),
    horizon: float = 1500.0,
    realizations: int = 200,
    seed: int = 0,
    *,
    t_cut: float | None = None,
    edge_margin: int = 2,
    **run_kw,
) -> PopulationMap:
    """<P_n(t)> grids for each w, the spatial cut at ``t_cut`` and rPR(t) against w = 0."""
    t_cut = horizon if t_cut is None else t_cut
    ref = reference_run(params, horizon, **_prop_kw(run_kw))
    ref_cut = profile_at(ref.times, ref.avg_populations, t_cut)
    panels = []
    for w in w_list:
        p = params.replace(disorder_strength=float(w))
        ens = ref if w == 0 else run_ensemble(p, realizations, horizon, seed, **run_kw)
        cut = profile_at(ens.times, ens.avg_populations, t_cut)
        phase, _, _ = classify_transport(ens.avg_populations, ref.avg_populations,
                                         params.initial_site, edge_margin)
        panels.append(PopulationPanel(float(w), ens, cut,
                                      rpr_series(ens.avg_populations, ref.avg_populations),
                                      phase, localization_fit(cut, params.initial_site)))
    return PopulationMap(params, float(t_cut), ref, ref_cut, tuple(panels))


def spectral_scan(params: SystemParams, w_list, realizations: int = 200, seed: int = 0,
                  bins: int = 50) -> list[tuple[float, GapReport]]:
    return [
        (float(w), ensemble_gap_report(params.replace(disorder_strength=float(w)), realizations, seed, bins))
        for w in w_list
    ]
