"""
Analytic stand-in for the cluster measurements.

Bandwidth is shared statically: every process gets an equal share of the OSTs of the global filesystem and of the
SSD serving its node group. Metadata latency on the global filesystem grows with the arrival rate of open/close
pairs at the metadata server; the arrival rate in turn depends on how long each process spends per file, so the
latency is the fixed point of

    m = L0 * max(1, P / (C * (m + r)))

with L0 the uncontended latency, C the server capacity, P the number of processes reading from the global
filesystem and r the per-file read time. A slower global filesystem (larger r) therefore lowers metadata latency.
"""
import functools
import logging
import math
from collections.abc import (
    Iterator,
    Sequence,
)
from dataclasses import (
    dataclass,
    field,
)
from fractions import Fraction
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np
from scipy import optimize

from tier_io.breakdown import SweepResult
from tier_io.data_types import (
    ClassBreakdown,
    ClusterSpec,
    DatasetSpec,
    FsTier,
    IoClass,
    IoRecord,
    SimOptions,
    StorageProfile,
)
from tier_io.errors import (
    InternalError,
    InvalidArgument,
)
from tier_io.helpers import format_pct
from tier_io.workload import (
    CacheAssignment,
    CacheConfig,
    ShufflePlan,
    assign_cache,
    build_shuffle_plan,
    epoch_rng,
)

if TYPE_CHECKING:
    from tier_io.config import RunConfig

MAX_ITERATIONS = 200
RESIDUAL_TOLERANCE = 1e-9
_BISECT_XTOL = 1e-15
_JITTER_STREAM = 0x6A17

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetaSolution:
    meta_time_s: float
    load_factor: float
    iterations: int


def _load_factor(profile: StorageProfile, active_gfs_procs: float, cycle_s: float) -> float:
    return max(1.0, active_gfs_procs / (profile.gfs_meta_capacity * cycle_s))


def solve_meta_latency(
        profile: StorageProfile,
        active_gfs_procs: float,
        per_file_gfs_read_s: float,
) -> MetaSolution:
    if not isinstance(profile, StorageProfile):
        raise InvalidArgument(f'not a storage profile: {profile!r}')
    if not (math.isfinite(active_gfs_procs) and active_gfs_procs >= 0):
        raise InvalidArgument(f'active_gfs_procs must be non-negative, got {active_gfs_procs}')
    if not (math.isfinite(per_file_gfs_read_s) and per_file_gfs_read_s > 0):
        raise InvalidArgument(f'per-file read time must be positive, got {per_file_gfs_read_s}')
    base = profile.gfs_meta_base_s
    r = per_file_gfs_read_s

    def residual(m):
        return m - base * _load_factor(profile, active_gfs_procs, m + r)

    lower = base
    upper = base * _load_factor(profile, active_gfs_procs, base + r)
    if upper == lower:
        return MetaSolution(meta_time_s=base, load_factor=1.0, iterations=0)
    if residual(lower) > 0 or residual(upper) < 0:
        raise InternalError(f'metadata fixed point not bracketed by [{lower}, {upper}]')
    root, result = optimize.bisect(
        residual,
        lower,
        upper,
        xtol=_BISECT_XTOL,
        maxiter=MAX_ITERATIONS,
        full_output=True,
        disp=False,
    )
    if not result.converged or abs(residual(root)) > RESIDUAL_TOLERANCE:
        raise InternalError(f'metadata fixed point did not converge (P={active_gfs_procs}, r={r})')
    logger.debug('Metadata latency %.9f s after %d bisection steps', root, result.iterations)
    return MetaSolution(
        meta_time_s=root,
        load_factor=_load_factor(profile, active_gfs_procs, root + r),
        iterations=result.iterations,
    )


@functools.lru_cache(maxsize=32)
def rank_jitter(seed: int, epoch: int, n_procs: int, sigma: float) -> np.ndarray:
    """Log-normal slowdown factor of every rank, keyed by (seed, epoch, rank) only."""
    if sigma == 0:
        factors = np.ones(n_procs)
    else:
        factors = np.array([
            epoch_rng(seed, epoch, _JITTER_STREAM, rank).lognormal(0.0, sigma) for rank in range(n_procs)
        ])
    factors.flags.writeable = False
    return factors


@dataclass(frozen=True)
class PerFileTimes:
    gfs_read_s: float
    gfs_meta_s: float
    lfs_read_s: float
    lfs_meta_s: float
    meta: MetaSolution


def per_file_times(
        dataset: DatasetSpec,
        cluster: ClusterSpec,
        cache: CacheAssignment,
        profile: StorageProfile,
) -> PerFileTimes:
    """Per-file times of one cache assignment, before the per-rank jitter."""
    gfs_bw = cluster.gfs_ost_count * profile.ost_read_bw / cluster.total_procs
    lfs_bw = profile.ssd_read_bw / (cluster.procs_per_node * cluster.nodes_per_ssd)
    gfs_read = dataset.file_size_bytes / gfs_bw
    lfs_read = dataset.file_size_bytes / lfs_bw
    active = cluster.total_procs * (dataset.file_count - cache.k) / dataset.file_count
    meta = solve_meta_latency(profile, active, gfs_read)
    return PerFileTimes(gfs_read, meta.meta_time_s, lfs_read, profile.lfs_meta_s, meta)


@dataclass(frozen=True, eq=False)
class EpochSimulation:
    dataset: DatasetSpec
    cache: CacheAssignment
    plan: ShufflePlan
    times: PerFileTimes
    n_gfs: np.ndarray = field(repr=False)
    n_lfs: np.ndarray = field(repr=False)
    # Per-rank, per-operation seconds after jitter, shape (n_procs, 4) in IoClass order.
    op_seconds: np.ndarray = field(repr=False)

    @property
    def epoch(self) -> int:
        return self.plan.epoch

    @property
    def cache_rate(self) -> Fraction:
        return self.cache.cache_rate

    @cached_property
    def class_seconds(self) -> np.ndarray:
        counts = np.column_stack((self.n_gfs, self.n_gfs, self.n_lfs, self.n_lfs))
        return counts * self.op_seconds

    @cached_property
    def breakdowns(self) -> dict[int, ClassBreakdown]:
        return {
            rank: ClassBreakdown(rank, self.epoch, dict(zip(IoClass, row, strict=True)))
            for rank, row in enumerate(self.class_seconds.tolist())
        }

    @cached_property
    def totals(self) -> dict[int, float]:
        return {rank: b.total() for rank, b in self.breakdowns.items()}

    def iter_records(self) -> Iterator[IoRecord]:
        size = self.dataset.file_size_bytes
        k = self.cache.k
        for rank, (gfs_read, gfs_meta, lfs_read, lfs_meta) in enumerate(self.op_seconds.tolist()):
            for file_id in self.plan.files_for(rank).tolist():
                if file_id < k:
                    yield IoRecord(rank, self.epoch, file_id, FsTier.LFS, size, lfs_read, lfs_meta)
                else:
                    yield IoRecord(rank, self.epoch, file_id, FsTier.GFS, size, gfs_read, gfs_meta)

    @cached_property
    def records(self) -> list[IoRecord]:
        return list(self.iter_records())


def simulate_epoch(
        dataset: DatasetSpec,
        cluster: ClusterSpec,
        cache: CacheAssignment,
        plan: ShufflePlan,
        profile: StorageProfile,
        opts: SimOptions,
) -> EpochSimulation:
    if plan.n_procs != cluster.total_procs:
        raise InvalidArgument(f'plan has {plan.n_procs} ranks, cluster runs {cluster.total_procs} processes')
    if plan.file_count != dataset.file_count or cache.file_count != dataset.file_count:
        raise InvalidArgument('shuffle plan or cache assignment built for a different dataset')
    if not 0 <= cache.k <= dataset.file_count:
        raise InvalidArgument(f'{cache.k} cached files out of {dataset.file_count}')
    times = per_file_times(dataset, cluster, cache, profile)
    sizes = np.diff(np.append(plan.starts, plan.file_count))
    n_lfs = np.add.reduceat((plan.order < cache.k).astype(np.int64), plan.starts)
    n_gfs = sizes - n_lfs
    jitter = rank_jitter(opts.seed, plan.epoch, plan.n_procs, float(opts.jitter_sigma))
    base = np.array([times.gfs_read_s, times.gfs_meta_s, times.lfs_read_s, times.lfs_meta_s])
    op_seconds = np.outer(jitter, base)
    logger.debug(
        'Epoch %d at %s%% cache: r_g=%.6f m_g=%.6f r_l=%.6f m_l=%.6f',
        plan.epoch,
        format_pct(cache.cache_rate),
        times.gfs_read_s,
        times.gfs_meta_s,
        times.lfs_read_s,
        times.lfs_meta_s,
    )
    return EpochSimulation(dataset, cache, plan, times, n_gfs, n_lfs, op_seconds)


class SimulatedSweep(dict):
    """(cache_rate, epoch) -> EpochSimulation."""

    def to_sweep_result(self) -> SweepResult:
        return SweepResult.from_breakdowns({cell: sim.breakdowns for cell, sim in self.items()})


def check_cache_rates(cache_rates: Sequence) -> list[Fraction]:
    rates = [CacheConfig(rate).cache_rate for rate in cache_rates]
    if not rates:
        raise InvalidArgument('the cache-rate sweep is empty')
    if any(b <= a for a, b in zip(rates, rates[1:], strict=False)):
        raise InvalidArgument(f'cache rates must be strictly increasing: {[format_pct(r) for r in rates]}')
    return rates


def simulate_sweep(config: 'RunConfig', cache_rates: Sequence | None = None) -> SimulatedSweep:
    rates = check_cache_rates(config.sweep if cache_rates is None else cache_rates)
    sweep = SimulatedSweep()
    for epoch in range(config.sim.epochs):
        plan = build_shuffle_plan(config.dataset, config.cluster.total_procs, epoch, config.sim.seed)
        for rate in rates:
            cache = assign_cache(config.dataset, CacheConfig(rate))
            sim = simulate_epoch(config.dataset, config.cluster, cache, plan, config.storage, config.sim)
            sweep[rate, epoch] = sim
    logger.info('Simulated %d cache rates x %d epochs', len(rates), config.sim.epochs)
    return SimulatedSweep(sorted(sweep.items()))
