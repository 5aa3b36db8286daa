"""Seeded disorder ensembles: parallel propagation with a fixed-order reduction."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from chiraloc.dynamics import DEFAULT_STEP, DEFAULT_STRIDE, IntegrationError, propagate_batch, snapshot_times
from chiraloc.model import (
    SystemParams,
    coupling_entries,
    realization_seed,
    sample_disorder,
)
from chiraloc.observables import default_partition, entropy_bipartite

log = logging.getLogger(__name__)

DEFAULT_REALIZATIONS = 200
CONVERGENCE_THRESHOLD = 0.02
# Realizations per propagation batch; fixed so results never depend on the worker count.
BLOCK_SIZE = 16
WORKERS_ENV = "CHIRALOC_WORKERS"


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV)
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class EnsembleResult:
    params: SystemParams
    realization_count: int
    times: np.ndarray
    avg_populations: np.ndarray
    avg_total: np.ndarray
    avg_entropy_a: np.ndarray
    avg_entropy_b: np.ndarray
    base_seed: int
    seeds: tuple[int, ...]
    disorder_sign: int = 1
    partition: int = 0
    convergence: float | None = field(default=None)

    def __post_init__(self):
        for name in ("times", "avg_populations", "avg_total", "avg_entropy_a", "avg_entropy_b"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def seed_rule(self) -> str:
        return "SeedSequence([base_seed, index]) -> first uint64 word"


def _run_block(params, seeds, sign, times, step, partition):
    phases = [sign * sample_disorder(params, s).phases for s in seeds]
    matrices = np.stack([coupling_entries(params, w) for w in phases])
    b, n = len(seeds), params.n_sites
    pops = np.empty((b, len(times), n))
    ent_a = np.empty((b, len(times)))
    ent_b = np.empty((b, len(times)))
    for k, (_, a) in enumerate(propagate_batch(matrices, params.initial_site, times, step)):
        p = np.abs(a) ** 2
        pops[:, k] = p
        ent_a[:, k], ent_b[:, k] = entropy_bipartite(a, partition)
    return pops, ent_a, ent_b


def run_ensemble(
    params: SystemParams,
    realizations: int = DEFAULT_REALIZATIONS,
    horizon: float = 1500.0,
    base_seed: int = 0,
    *,
    stride: float = DEFAULT_STRIDE,
    step: float = DEFAULT_STEP,
    workers: int | None = None,
    disorder_sign: int = 1,
    partition: int | None = None,
) -> EnsembleResult:
    """Average populations and block entropies over ``realizations`` disorder draws.

    Realization r uses ``realization_seed(base_seed, r)``.  Sums are taken in
    realization order whatever the worker count, so the averages are
    bit-reproducible.  ``disorder_sign=-1`` negates every sampled phase.
    """
    if realizations < 1:
        raise ValueError(f"realizations must be >= 1, got {realizations}")
    if disorder_sign not in (1, -1):
        raise ValueError("disorder_sign must be +1 or -1")
    times = snapshot_times(horizon, stride)
    split = default_partition(params.n_sites) if partition is None else int(partition)
    seeds = [realization_seed(base_seed, r) for r in range(realizations)]
    blocks = [seeds[i:i + BLOCK_SIZE] for i in range(0, realizations, BLOCK_SIZE)]
    workers = default_workers() if workers is None else max(1, int(workers))

    if params.disorder_strength == 0:
        # every realization is the same trajectory; average it exactly
        pops, ent_a, ent_b = _run_block(params, seeds[:1], disorder_sign, times, step, split)
        return _result(params, realizations, times, pops[0], ent_a[0], ent_b[0],
                       base_seed, seeds, disorder_sign, split)

    sum_pops = np.zeros((len(times), params.n_sites))
    sum_a = np.zeros(len(times))
    sum_b = np.zeros(len(times))

    def task(block):
        return _run_block(params, block, disorder_sign, times, step, split)

    log.debug("ensemble: %d realizations in %d blocks on %d workers", realizations, len(blocks), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for b_index, result in enumerate(_ordered(pool, task, blocks, 2 * workers)):
            if isinstance(result, BaseException):
                first = b_index * BLOCK_SIZE
                raise IntegrationError(
                    f"realization block starting at index {first} failed: {result}",
                    getattr(result, "time", None),
                ) from result
            pops, ent_a, ent_b = result
            for r in range(pops.shape[0]):
                sum_pops += pops[r]
                sum_a += ent_a[r]
                sum_b += ent_b[r]

    return _result(params, realizations, times, sum_pops / realizations, sum_a / realizations,
                   sum_b / realizations, base_seed, seeds, disorder_sign, split)


def _result(params, realizations, times, avg_pops, avg_a, avg_b, base_seed, seeds, sign, split):
    return EnsembleResult(
        params=params,
        realization_count=realizations,
        times=times,
        avg_populations=avg_pops,
        avg_total=avg_pops.sum(axis=1),
        avg_entropy_a=avg_a,
        avg_entropy_b=avg_b,
        base_seed=int(base_seed),
        seeds=tuple(seeds),
        disorder_sign=sign,
        partition=split,
    )


def _ordered(pool, fn, items, window):
    """Like pool.map, but yields exceptions instead of raising and keeps at
    most ``window`` blocks in flight so finished blocks cannot pile up."""
    items = list(items)
    futures = {}
    for i in range(len(items)):
        for j in range(i, min(i + window, len(items))):
            if j not in futures:
                futures[j] = pool.submit(fn, items[j])
        try:
            yield futures.pop(i).result()
        except Exception as exc:  # noqa: BLE001 - re-raised with the block index
            yield exc


def reference_run(params: SystemParams, horizon: float, *, stride: float = DEFAULT_STRIDE,
                  step: float = DEFAULT_STEP) -> EnsembleResult:
    """The disorder-free trajectory packaged as a one-member ensemble."""
    return run_ensemble(params.replace(disorder_strength=0.0), 1, horizon, 0,
                        stride=stride, step=step, workers=1)


@dataclass(frozen=True)
class ConvergenceReport:
    deviation: float
    passed: bool
    small: EnsembleResult
    large: EnsembleResult


def total_deviation(small: EnsembleResult, large: EnsembleResult) -> float:
    """max_t |<P_t>_small - <P_t>_large| / <P_t>_large."""
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(small.avg_total - large.avg_total) / large.avg_total
    rel = np.where(np.abs(small.avg_total - large.avg_total) == 0, 0.0, rel)
    return float(np.max(rel))


def convergence_check(
    params: SystemParams,
    r_small: int,
    r_large: int,
    horizon: float,
    base_seed: int = 0,
    threshold: float = CONVERGENCE_THRESHOLD,
    **kwargs,
) -> ConvergenceReport:
    if r_small > r_large:
        raise ValueError("r_small must not exceed r_large")
    small = run_ensemble(params, r_small, horizon, base_seed, **kwargs)
    large = small if r_small == r_large else run_ensemble(params, r_large, horizon, base_seed, **kwargs)
    dev = total_deviation(small, large)
    return ConvergenceReport(dev, dev <= threshold, small, large)
