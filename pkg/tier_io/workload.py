"""
Training-side I/O demand: every epoch the whole dataset is shuffled and split over the processes, every file is
read exactly once, and a fixed ("pinned") subset of the files lives on the local filesystem for the whole run.
"""
import logging
import math
from dataclasses import (
    dataclass,
    field,
)
from fractions import Fraction
from functools import cached_property

import numpy as np

from tier_io.data_types import (
    ClusterSpec,
    DatasetSpec,
)
from tier_io.errors import InvalidArgument
from tier_io.helpers import as_rate

PINNING = 'pinning'
_SEED_MASK = 0xFFFF_FFFF_FFFF_FFFF

logger = logging.getLogger(__name__)


def epoch_rng(seed: int, epoch: int, *stream: int) -> np.random.Generator:
    """
    PCG64 generator keyed by (seed, epoch[, stream...]). The key goes through numpy's SeedSequence, which
    gives the same stream on every platform.
    """
    if epoch < 0:
        raise InvalidArgument(f'epoch must be non-negative, got {epoch}')
    return np.random.default_rng([seed & _SEED_MASK, epoch, *stream])


def round_half_up(value: Fraction) -> int:
    return math.floor(value + Fraction(1, 2))


@dataclass(frozen=True)
class CacheConfig:
    cache_rate: Fraction
    policy: str = PINNING

    def __post_init__(self):
        rate = as_rate(self.cache_rate)
        if not 0 <= rate <= 1:
            raise InvalidArgument(f'cache_rate must be within [0, 1], got {self.cache_rate}')
        if self.policy != PINNING:
            raise InvalidArgument(f'unsupported cache policy {self.policy!r}, only {PINNING!r} is modelled')
        object.__setattr__(self, 'cache_rate', rate)


@dataclass(frozen=True)
class CacheAssignment:
    file_count: int
    k: int
    cache_rate: Fraction

    @cached_property
    def cached_file_ids(self) -> frozenset[int]:
        return frozenset(range(self.k))

    def is_cached(self, file_id: int) -> bool:
        return 0 <= file_id < self.k

    @property
    def hit_rate(self) -> Fraction:
        return Fraction(self.k, self.file_count)


@dataclass(frozen=True, eq=False)
class ShufflePlan:
    epoch: int
    seed: int
    n_procs: int
    order: np.ndarray = field(repr=False)

    @property
    def file_count(self) -> int:
        return len(self.order)

    @cached_property
    def starts(self) -> np.ndarray:
        """First position in `order` of every rank's chunk; the first `file_count % n_procs` chunks are one longer."""
        quotient, remainder = divmod(self.file_count, self.n_procs)
        sizes = np.full(self.n_procs, quotient, dtype=np.int64)
        sizes[:remainder] += 1
        return np.concatenate(([0], np.cumsum(sizes)[:-1]))

    def files_for(self, rank: int) -> np.ndarray:
        if not 0 <= rank < self.n_procs:
            raise InvalidArgument(f'rank {rank} outside 0..{self.n_procs - 1}')
        end = self.starts[rank + 1] if rank + 1 < self.n_procs else self.file_count
        return self.order[self.starts[rank]:end]

    @cached_property
    def assignment(self) -> dict[int, list[int]]:
        return {rank: self.files_for(rank).tolist() for rank in range(self.n_procs)}

    def __eq__(self, other):
        if not isinstance(other, ShufflePlan):
            return NotImplemented
        return (
            (self.epoch, self.seed, self.n_procs) == (other.epoch, other.seed, other.n_procs)
            and np.array_equal(self.order, other.order)
        )

    __hash__ = None


def build_shuffle_plan(dataset: DatasetSpec, n_procs: int, epoch: int, seed: int) -> ShufflePlan:
    if isinstance(n_procs, bool) or not isinstance(n_procs, int) or n_procs < 1:
        raise InvalidArgument(f'n_procs must be a positive integer, got {n_procs!r}')
    if dataset.file_count < n_procs:
        raise InvalidArgument(f'{dataset.file_count} files cannot be split over {n_procs} processes')
    order = epoch_rng(seed, epoch).permutation(dataset.file_count)
    order.flags.writeable = False
    logger.debug('Shuffled %d files over %d processes for epoch %d', dataset.file_count, n_procs, epoch)
    return ShufflePlan(epoch=epoch, seed=seed, n_procs=n_procs, order=order)


def assign_cache(dataset: DatasetSpec, cache: CacheConfig) -> CacheAssignment:
    k = round_half_up(cache.cache_rate * dataset.file_count)
    return CacheAssignment(file_count=dataset.file_count, k=k, cache_rate=cache.cache_rate)


def lfs_bytes_per_ssd(dataset: DatasetSpec, cluster: ClusterSpec, cache_rate) -> int:
    """Bytes each shared SSD holds when the pinned files are spread evenly over the SSDs."""
    assignment = assign_cache(dataset, CacheConfig(cache_rate))
    return math.ceil(assignment.k * dataset.file_size_bytes / cluster.ssd_count)
