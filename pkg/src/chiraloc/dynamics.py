"""Propagation of the single-excitation amplitudes da/dt = M a."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from chiraloc.model import (
    CouplingMatrix,
    DisorderMode,
    DisorderRealization,
    SystemParams,
)

DEFAULT_STEP = 5e-3
DEFAULT_STRIDE = 1.0
DEFAULT_TOLERANCE = 1e-9
# Largest h*||M|| kept inside the classical RK4 stability region (real-axis edge ~2.785).
RK4_STABILITY_LIMIT = 2.5


class IntegrationError(ArithmeticError):
    """Raised when a trajectory cannot be integrated; ``time`` is where it failed."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message if time is None else f"{message} (at gamma*t = {time:g})")
        self.time = time


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 2 or amps.shape[0] != times.shape[0]:
            raise ValueError("amplitudes must have shape (len(times), N)")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def total(self) -> np.ndarray:
        return self.populations.sum(axis=1)


def _initial_state(n: int, initial_site: int, batch: int = 1) -> np.ndarray:
    if not 1 <= initial_site <= n:
        raise ValueError(f"initial_site must lie in [1, {n}], got {initial_site}")
    a0 = np.zeros((batch, n), dtype=complex)
    a0[:, initial_site - 1] = 1.0
    return a0


def steps_per_snapshot(stride: float, step: float) -> int:
    count = int(round(stride / step))
    if count < 1 or not math.isclose(count * step, stride, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"snapshot stride {stride} is not a multiple of the step {step}")
    return count


def snapshot_times(horizon: float, stride: float) -> np.ndarray:
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    count = int(round(horizon / stride))
    if count < 1 or not math.isclose(count * stride, horizon, rel_tol=1e-9):
        raise ValueError(f"horizon {horizon} is not a multiple of the stride {stride}")
    return np.arange(count + 1) * stride


def rk4_stride_map(matrices: np.ndarray, step: float, n_steps: int) -> np.ndarray:
    """Propagator of ``n_steps`` classical RK4 steps for a stack of generators.

    For a constant linear generator one RK4 step is exactly the matrix
    polynomial I + hM + (hM)^2/2 + (hM)^3/6 + (hM)^4/24, so the stride map
    is its ``n_steps``-th power.
    """
    n = matrices.shape[-1]
    eye = np.eye(n, dtype=complex)
    norms = np.linalg.norm(matrices, ord=2, axis=(-2, -1))
    worst = float(np.max(norms)) * step
    if worst > RK4_STABILITY_LIMIT:
        raise IntegrationError(
            f"step {step} too large for ||M|| = {worst / step:.4g} "
            f"(h*||M|| = {worst:.3g} > {RK4_STABILITY_LIMIT}); reduce the step",
            time=0.0,
        )
    a = step * matrices
    a2 = a @ a
    one_step = eye + a + a2 / 2.0 + (a2 @ a) / 6.0 + (a2 @ a2) / 24.0
    return np.linalg.matrix_power(one_step, n_steps)


def propagate_batch(
    matrices: np.ndarray,
    initial_site: int,
    times: np.ndarray,
    step: float = DEFAULT_STEP,
):
    """Yield (time, amplitudes[batch, N]) at every snapshot of a uniform grid.

    Only the current snapshot is held in memory.
    """
    matrices = np.asarray(matrices, dtype=complex)
    if matrices.ndim == 2:
        matrices = matrices[None]
    batch, n, _ = matrices.shape
    stride = times[1] - times[0] if len(times) > 1 else step
    stride_map = rk4_stride_map(matrices, step, steps_per_snapshot(stride, step))
    a = _initial_state(n, initial_site, batch)
    for k, t in enumerate(times):
        if k:
            a = np.matmul(stride_map, a[..., None])[..., 0]
            if not np.all(np.isfinite(a)):
                raise IntegrationError("non-finite amplitudes", time=float(t))
        yield float(t), a


def _propagate_adaptive(m: np.ndarray, a0: np.ndarray, times: np.ndarray, tol: float) -> np.ndarray:
    sol = solve_ivp(
        lambda t, y: m @ y,
        (times[0], times[-1]),
        a0,
        method="DOP853",
        t_eval=times,
        rtol=tol,
        atol=tol * 1e-3,
    )
    if sol.status != 0:
        failed_at = float(sol.t[-1]) if sol.t.size else float(times[0])
        raise IntegrationError(f"adaptive integrator failed: {sol.message}", time=failed_at)
    return sol.y.T


def propagate(
    matrix: CouplingMatrix,
    initial_site: int,
    horizon: float,
    snapshot_stride: float = DEFAULT_STRIDE,
    *,
    step: float = DEFAULT_STEP,
    method: str = "rk4",
    tol: float = DEFAULT_TOLERANCE,
) -> Trajectory:
    """Integrate from a single excited site, keeping only the snapshots.

    ``method="rk4"`` is the fixed-step default; ``method="adaptive"`` uses an
    8th-order Dormand-Prince integrator with relative tolerance ``tol``.
    """
    times = snapshot_times(horizon, snapshot_stride)
    m = matrix.entries
    if method == "rk4":
        amps = np.empty((len(times), m.shape[0]), dtype=complex)
        for k, (_, a) in enumerate(propagate_batch(m, initial_site, times, step)):
            amps[k] = a[0]
    elif method == "adaptive":
        amps = _propagate_adaptive(m, _initial_state(m.shape[0], initial_site)[0], times, tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Trajectory(times, amps)


def propagate_expm(matrix: CouplingMatrix, initial_site: int, times) -> Trajectory:
    """a(t) = expm(M t) a(0) by scaling and squaring, one exponential per time."""
    times = np.asarray(times, dtype=float)
    m = matrix.entries
    a0 = _initial_state(m.shape[0], initial_site)[0]
    amps = np.empty((len(times), m.shape[0]), dtype=complex)
    for k, t in enumerate(times):
        with np.errstate(over="raise", invalid="raise"):
            try:
                amps[k] = scipy.linalg.expm(m * t) @ a0
            except FloatingPointError as exc:
                raise IntegrationError(f"matrix exponential overflow: {exc}", time=float(t)) from exc
        if not np.all(np.isfinite(amps[k])):
            raise IntegrationError("matrix exponential overflow", time=float(t))
    return Trajectory(times, amps)


def _scaled_laguerre(max_order: int, x: np.ndarray, log_prefactor: np.ndarray) -> np.ndarray:
    """exp(log_prefactor) * L_k^(-1)(x) for k = 0..max_order, overflow-safe.

    Uses the three-term recurrence with alpha = -1,
    (k+1) L_{k+1} = (2k - x) L_k - (k-1) L_{k-1}, rescaling on the fly.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((max_order + 1,) + x.shape)
    prev = np.ones_like(x)
    cur = -x
    log_scale = np.array(log_prefactor, dtype=float) + np.zeros_like(x)
    out[0] = np.exp(log_scale)
    if max_order >= 1:
        out[1] = cur * np.exp(log_scale)
    for k in range(1, max_order):
        prev, cur = cur, ((2 * k - x) * cur - (k - 1) * prev) / (k + 1)
        big = np.maximum(np.abs(cur), np.abs(prev)) > 1e150
        if np.any(big):
            prev = np.where(big, prev * 1e-150, prev)
            cur = np.where(big, cur * 1e-150, cur)
            log_scale = np.where(big, log_scale + 150 * math.log(10.0), log_scale)
        with np.errstate(under="ignore"):
            out[k + 1] = cur * np.exp(log_scale)
    return out


def cascaded_solution(params: SystemParams, disorder: DisorderRealization, times) -> Trajectory:
    """Closed-form amplitudes of the fully unidirectional (D = 1) array.

    Writing a_n = exp(-i(n-n_c)xi - i(W_n - W_c)) exp(-(gamma+gamma_nr) t/2) b_n,
    the lower-triangular equations reduce to db_n/dt = -gamma sum_{n_c<=m<n} b_m
    with b_{n_c} = 1.  Iterating that integral gives b_{n_c+k}(t) =
    L_k^(-1)(gamma t), the generalized Laguerre polynomials with alpha = -1.
    Sites upstream of n_c stay empty.
    """
    if params.directionality != 1.0:
        raise ValueError(f"cascaded solution requires directionality 1, got {params.directionality}")
    if params.disorder_mode is not DisorderMode.PHASE_FACTOR:
        raise ValueError("cascaded solution is defined for phase-factor disorder only")
    times = np.asarray(times, dtype=float)
    n = params.n_sites
    c = params.center_index
    w = np.asarray(disorder.phases, dtype=float)
    downstream = n - c
    log_decay = -(params.gamma + params.gamma_nr) * times / 2.0
    radial = _scaled_laguerre(downstream - 1, params.gamma * times, log_decay)  # (k, t)
    k = np.arange(downstream)
    phase = np.exp(-1j * (k * params.xi + (w[c:] - w[c])))
    amps = np.zeros((len(times), n), dtype=complex)
    amps[:, c:] = radial.T * phase[None, :]
    return Trajectory(times, amps)
