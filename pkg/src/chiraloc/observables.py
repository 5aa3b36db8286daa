"""Diagnostics computed from trajectories and ensemble-averaged profiles."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

FIT_FLOOR = 1e-8
ENTROPY_FLOOR = 1e-12
MIN_POWERLAW_POINTS = 8


class Phase(str, enum.Enum):
    LOCALIZED = "Localized"
    DELOCALIZED = "Delocalized"
    EXCLUDED = "Excluded"


@dataclass(frozen=True)
class LocalizationFit:
    n_L: float
    zeta_L: float
    r_squared: float
    fit_window: tuple[int, int]
    ok: bool = True
    reason: str = ""
    amplitude: float = float("nan")  # fitted P at distance zero


def _failed_fit(reason: str, window=(0, 0)) -> LocalizationFit:
    nan = float("nan")
    return LocalizationFit(nan, nan, nan, window, ok=False, reason=reason)


def localization_fit(profile, center: int, floor: float = FIT_FLOOR) -> LocalizationFit:
    """Fit ln P_n = c - |n - center| / n_L on the sites above ``floor * max P``.

    ``center`` is the 1-based site of the initial excitation and is left out of
    the fit (the profile has a cusp there).  A profile without decay gives a
    failed fit rather than an exception.
    """
    p = np.asarray(profile, dtype=float)
    if p.ndim != 1 or np.any(p < 0):
        raise ValueError("profile must be a nonnegative 1-D array")
    if not np.any(p > 0):
        return _failed_fit("profile is identically zero")
    sites = np.arange(1, p.size + 1)
    keep = (p >= floor * p.max()) & (sites != center) & (p > 0)
    if keep.sum() < 3:
        return _failed_fit("fewer than 3 sites above the floor")
    window = (int(sites[keep].min()), int(sites[keep].max()))
    x = np.abs(sites[keep] - center).astype(float)
    y = np.log(p[keep])
    if np.ptp(x) == 0:
        return _failed_fit("fit window has a single distance", window)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    if not slope < 0:
        return _failed_fit("no decay away from the center", window)
    n_l = float(-1.0 / slope)
    return LocalizationFit(n_l, 2.0 * n_l * math.log(2.0), r2, window, amplitude=float(np.exp(intercept)))


def normalize_profile(profile) -> np.ndarray:
    p = np.asarray(profile, dtype=float)
    total = p.sum(axis=-1, keepdims=True)
    return p / total


def relative_participation_ratio(avg_profile, ref_profile) -> float:
    """Participation ratio of the positive excess of a normalized profile over a reference.

    Both inputs must already sum to one.  Returns 0 when the profiles agree.
    """
    p = np.asarray(avg_profile, dtype=float)
    q = np.asarray(ref_profile, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"profile length mismatch: {p.shape} vs {q.shape}")
    for name, v in (("avg_profile", p), ("ref_profile", q)):
        if abs(v.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} is not normalized (sum = {v.sum()!r})")
    excess = np.where(p > q, p - q, 0.0)
    denom = float(np.sum(excess**2))
    if denom == 0.0:
        return 0.0
    return float(np.sum(excess) ** 2 / denom)


def rpr_series(avg_populations, ref_populations) -> np.ndarray:
    """rPR at every snapshot of two (T, N) population grids."""
    p = normalize_profile(avg_populations)
    q = normalize_profile(ref_populations)
    return np.array([relative_participation_ratio(a, b) for a, b in zip(p, q)])


def binary_entropy(lam):
    """-l ln l - (1-l) ln(1-l), with 0 ln 0 = 0; works elementwise."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < -1e-12) or np.any(lam > 1 + 1e-9):
        raise ValueError("excitation weight outside [0, 1]")
    lam = np.clip(lam, 0.0, 1.0)
    rest = 1.0 - lam
    with np.errstate(divide="ignore", invalid="ignore"):
        s = -np.where(lam > 0, lam * np.log(lam), 0.0) - np.where(rest > 0, rest * np.log(rest), 0.0)
    return s if s.ndim else float(s)


def default_partition(n_sites: int) -> int:
    """Number of sites in block A: 1..ceil(N/2), so the central site sits in A."""
    return (n_sites + 1) // 2


def entropy_bipartite(amplitudes, partition: int | None = None):
    """Entanglement entropies (S_A, S_B) in nats of a single-excitation state.

    The full state is the pure part sum_n a_n|n> plus the ground state with
    weight 1 - sum|a|^2.  Tracing out B leaves block A holding one excitation
    with weight lambda_A = sum_{n in A}|a_n|^2 in a single mode, or nothing, so
    S_A is the binary entropy of lambda_A.  ``amplitudes`` may carry leading
    batch/time axes; block A is the first ``partition`` sites.
    """
    a = np.asarray(amplitudes)
    n = a.shape[-1]
    split = default_partition(n) if partition is None else int(partition)
    if not 0 <= split <= n:
        raise ValueError(f"partition must lie in [0, {n}], got {split}")
    p = np.abs(a) ** 2
    if np.any(p.sum(axis=-1) > 1 + 1e-9):
        raise ValueError("state norm exceeds one")
    lam_a = p[..., :split].sum(axis=-1)
    lam_b = p[..., split:].sum(axis=-1)
    return binary_entropy(lam_a), binary_entropy(lam_b)


def reduced_density_matrix(amplitudes, partition: int | None = None) -> np.ndarray:
    """Explicit rho_A of block A in its vacuum + single-excitation sector.

    Basis: index 0 is the empty block, index 1+j the excitation on site j of A.
    Used to check the closed-form entropy.
    """
    a = np.asarray(amplitudes, dtype=complex)
    n = a.size
    split = default_partition(n) if partition is None else int(partition)
    a_part = a[:split]
    vac = 1.0 - float(np.sum(np.abs(a_part) ** 2))
    rho = np.zeros((split + 1, split + 1), dtype=complex)
    rho[0, 0] = vac
    rho[1:, 1:] = np.outer(a_part, a_part.conj())
    return rho


def von_neumann_entropy(rho) -> float:
    evals = np.linalg.eigvalsh(rho)
    evals = evals[evals > 1e-300]
    return float(-np.sum(evals * np.log(evals)))


@dataclass(frozen=True)
class PowerLawFit:
    beta: float
    n_points: int
    t_start: float
    ok: bool = True
    reason: str = ""


def powerlaw_exponent(times, series, t_start: float, t_stop: float | None = None) -> PowerLawFit:
    """Decay exponent beta of S(t) ~ t^-beta from a log-log least-squares fit.

    Points with t < t_start, t <= 0 or S <= 1e-12 are dropped.
    """
    t = np.asarray(times, dtype=float)
    s = np.asarray(series, dtype=float)
    keep = (t >= t_start) & (t > 0) & (s > ENTROPY_FLOOR)
    if t_stop is not None:
        keep &= t <= t_stop
    count = int(keep.sum())
    if count < MIN_POWERLAW_POINTS:
        return PowerLawFit(float("nan"), count, t_start, ok=False, reason="fewer than 8 usable points")
    slope, _ = np.polyfit(np.log(t[keep]), np.log(s[keep]), 1)
    return PowerLawFit(float(-slope), count, t_start)


def tail_start(times, reference_series, level: float = 0.1, min_fraction: float = 0.2):
    """Start of the decaying tail of a disorder-free entropy series.

    Returns (t_start, rule).  The tail starts where the reference drops below
    ``level`` for the last time ("crossing").  If it never settles below the
    level within the horizon the tail starts at ``min_fraction`` of the
    horizon ("fallback").
    """
    t = np.asarray(times, dtype=float)
    s = np.asarray(reference_series, dtype=float)
    above = np.nonzero(s > level)[0]
    if above.size == 0:
        return float(t[0]), "crossing"
    last = int(above[-1])
    if last < t.size - 1:
        return _interp_crossing(t, s, last, level), "crossing"
    return float(t[0] + min_fraction * (t[-1] - t[0])), "fallback"


def _interp_crossing(t, s, k, level) -> float:
    # s[k] > level >= s[k+1]
    frac = (s[k] - level) / (s[k] - s[k + 1])
    return float(t[k] + frac * (t[k + 1] - t[k]))


@dataclass(frozen=True)
class ExponentRatio:
    ratio: float
    beta: float
    beta_0: float
    t_start: float
    start_rule: str
    ok: bool = True
    reason: str = ""


def exponent_ratio(times, series, reference_series, level: float = 0.1,
                   min_fraction: float = 0.2) -> ExponentRatio:
    """beta_w / beta_0 of a disordered entropy tail against its disorder-free reference."""
    t0, rule = tail_start(times, reference_series, level, min_fraction)
    fit = powerlaw_exponent(times, series, t0)
    ref = powerlaw_exponent(times, reference_series, t0)
    nan = float("nan")
    if not (fit.ok and ref.ok):
        return ExponentRatio(nan, fit.beta, ref.beta, t0, rule, ok=False,
                             reason=fit.reason or ref.reason)
    if ref.beta == 0:
        return ExponentRatio(nan, fit.beta, ref.beta, t0, rule, ok=False,
                             reason="reference exponent is zero")
    return ExponentRatio(fit.beta / ref.beta, fit.beta, ref.beta, t0, rule)


def reference_time(times, total, level: float) -> float:
    """First time the total population falls below ``level`` (linear interpolation)."""
    t = np.asarray(times, dtype=float)
    p = np.asarray(total, dtype=float)
    if not 0 < level <= 1:
        raise ValueError(f"level must lie in (0, 1], got {level}")
    if p[0] <= level:
        return float(t[0])
    below = np.nonzero(p <= level)[0]
    if below.size == 0:
        raise ValueError(f"total population never falls below {level} within gamma*t <= {t[-1]:g}")
    k = int(below[0]) - 1
    return _interp_crossing(t, p, k, level)


def profile_at(times, populations, t_cut: float) -> np.ndarray:
    """Population profile at ``t_cut``, linearly interpolated between snapshots."""
    t = np.asarray(times, dtype=float)
    p = np.asarray(populations, dtype=float)
    if not t[0] <= t_cut <= t[-1]:
        raise ValueError(f"time {t_cut} outside the stored grid [{t[0]}, {t[-1]}]")
    k = int(np.searchsorted(t, t_cut, side="right")) - 1
    if k >= t.size - 1:
        return p[-1].copy()
    frac = (t_cut - t[k]) / (t[k + 1] - t[k])
    return (1 - frac) * p[k] + frac * p[k + 1]


@dataclass(frozen=True)
class TransportRecord:
    argmax_sites: np.ndarray
    max_excursion: int
    reached_edge: bool


def transport_record(populations, center: int) -> TransportRecord:
    """Track the site (1-based) of the largest population at each snapshot."""
    p = np.asarray(populations, dtype=float)
    argmax = np.argmax(p, axis=1) + 1
    excursion = int(np.max(np.abs(argmax - center)))
    n = p.shape[1]
    return TransportRecord(argmax, excursion, excursion >= max(center - 1, n - center))


def classify_transport(avg_populations, ref_populations, center: int, edge_margin: int = 2):
    """Localized unless the averaged maximum travels as far as the disorder-free one.

    Delocalized iff the largest distance of the averaged argmax from ``center``
    comes within ``edge_margin`` sites of the largest distance reached by the
    reference.  Returns (phase, record, reference_record).
    """
    avg = np.asarray(avg_populations)
    ref = np.asarray(ref_populations)
    if avg.shape != ref.shape:
        raise ValueError(f"grids differ: {avg.shape} vs {ref.shape}")
    rec = transport_record(avg, center)
    ref_rec = transport_record(ref, center)
    reach = ref_rec.max_excursion
    rec = TransportRecord(rec.argmax_sites, rec.max_excursion, rec.max_excursion >= reach - edge_margin)
    phase = Phase.DELOCALIZED if rec.reached_edge else Phase.LOCALIZED
    return phase, rec, ref_rec
