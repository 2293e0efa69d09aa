import enum
import math
import posixpath
from dataclasses import (
    dataclass,
    field,
)
from enum import Enum
from functools import cached_property

from tier_io.errors import InvalidArgument


def _positive_int(name, value):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise InvalidArgument(f'{name} must be a positive integer, got {value!r}')


def _positive_real(name, value):
    if isinstance(value, bool) or not isinstance(value, int | float) or not math.isfinite(value) or value <= 0:
        raise InvalidArgument(f'{name} must be a positive number, got {value!r}')


class FsTier(str, Enum):
    GFS = 'GFS'
    LFS = 'LFS'

    def __str__(self):
        return self.value


class OpKind(enum.Enum):
    READ = 'READ'
    META = 'META'


class IoClass(str, Enum):
    # Declaration order is the column order of every report.
    GFS_READ = 'GFS-READ'
    GFS_META = 'GFS-META'
    LFS_READ = 'LFS-READ'
    LFS_META = 'LFS-META'

    def __str__(self):
        return self.value

    @property
    def fs(self) -> FsTier:
        return FsTier(self.value.split('-')[0])

    @property
    def op_kind(self) -> OpKind:
        return OpKind(self.value.split('-')[1])

    @property
    def column(self) -> str:
        return f'{self.name.lower()}_s'

    @classmethod
    def from_token(cls, token: str) -> 'IoClass':
        try:
            return cls(token)
        except ValueError:
            valid = ', '.join(c.value for c in cls)
            raise InvalidArgument(f'unknown I/O class {token!r}, valid names are {valid}') from None


@dataclass(frozen=True)
class DatasetSpec:
    file_count: int
    file_size_bytes: int
    samples_per_file: int = 1

    def __post_init__(self):
        _positive_int('file_count', self.file_count)
        _positive_int('file_size_bytes', self.file_size_bytes)
        _positive_int('samples_per_file', self.samples_per_file)

    @property
    def total_bytes(self) -> int:
        return self.file_count * self.file_size_bytes


@dataclass(frozen=True)
class ClusterSpec:
    nodes: int
    procs_per_node: int
    nodes_per_ssd: int
    gfs_ost_count: int

    def __post_init__(self):
        _positive_int('nodes', self.nodes)
        _positive_int('procs_per_node', self.procs_per_node)
        _positive_int('nodes_per_ssd', self.nodes_per_ssd)
        _positive_int('gfs_ost_count', self.gfs_ost_count)

    @property
    def total_procs(self) -> int:
        return self.nodes * self.procs_per_node

    @property
    def ssd_count(self) -> int:
        return math.ceil(self.nodes / self.nodes_per_ssd)


@dataclass(frozen=True)
class TrainingSpec:
    """
    Data loader settings of the emulated training job. They are recorded with the run, the modelled I/O
    totals do not depend on them because the computation time of the benchmark is zero.
    """
    batch_size: int = 1
    prefetch: bool = True

    def __post_init__(self):
        _positive_int('batch_size', self.batch_size)
        if not isinstance(self.prefetch, bool):
            raise InvalidArgument(f'prefetch must be a boolean, got {self.prefetch!r}')


@dataclass(frozen=True)
class StorageProfile:
    ost_read_bw: float  # bytes/s per OST
    ssd_read_bw: float  # bytes/s per SSD
    gfs_meta_base_s: float  # open+close pair, uncontended
    gfs_meta_capacity: float  # metadata ops/s
    lfs_meta_s: float  # open+close pair

    def __post_init__(self):
        for name in ('ost_read_bw', 'ssd_read_bw', 'gfs_meta_base_s', 'gfs_meta_capacity', 'lfs_meta_s'):
            _positive_real(name, getattr(self, name))


@dataclass(frozen=True)
class SimOptions:
    seed: int = 0
    jitter_sigma: float = 0.0
    epochs: int = 1

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise InvalidArgument(f'seed must be an integer, got {self.seed!r}')
        if isinstance(self.jitter_sigma, bool) or not isinstance(self.jitter_sigma, int | float) \
                or not math.isfinite(self.jitter_sigma) or self.jitter_sigma < 0:
            raise InvalidArgument(f'jitter_sigma must be a non-negative number, got {self.jitter_sigma!r}')
        _positive_int('epochs', self.epochs)


@dataclass(frozen=True, slots=True)
class IoRecord:
    rank: int
    epoch: int
    file_id: int | str
    fs: FsTier
    bytes: int
    read_s: float
    meta_s: float

    def __post_init__(self):
        if self.rank < 0 or self.epoch < 0 or self.bytes < 0:
            raise InvalidArgument(f'rank, epoch and bytes must be non-negative: {self!r}')
        if not (self.read_s >= 0 and self.meta_s >= 0 and math.isfinite(self.read_s + self.meta_s)):
            raise InvalidArgument(f'negative or undefined time: {self!r}')
        if not isinstance(self.fs, FsTier):
            raise InvalidArgument(f'unknown filesystem tag {self.fs!r}')

    @property
    def total_s(self) -> float:
        return self.read_s + self.meta_s


@dataclass(frozen=True)
class ClassBreakdown:
    rank: int
    epoch: int
    seconds: dict[IoClass, float] = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.seconds) - set(IoClass)
        if unknown:
            raise InvalidArgument(f'unknown I/O classes {unknown}')
        seconds = {c: float(self.seconds.get(c, 0.0)) for c in IoClass}
        if not all(v >= 0 for v in seconds.values()):
            raise InvalidArgument(f'class times must be non-negative: {seconds}')
        object.__setattr__(self, 'seconds', seconds)

    def __getitem__(self, io_class: IoClass) -> float:
        return self.seconds[io_class]

    def total(self) -> float:
        gfs_read, gfs_meta, lfs_read, lfs_meta = (self.seconds[c] for c in IoClass)
        return gfs_read + gfs_meta + lfs_read + lfs_meta

    @property
    def dominant_class(self) -> IoClass:
        return max(IoClass, key=lambda c: (self.seconds[c], -list(IoClass).index(c)))


def _normalize_prefix(prefix: str) -> str:
    if not isinstance(prefix, str) or not prefix.startswith('/'):
        raise InvalidArgument(f'mount prefix must be an absolute path, got {prefix!r}')
    normalized = posixpath.normpath(prefix)
    # normpath keeps a leading '//'
    return '/' + normalized.lstrip('/')


@dataclass(frozen=True)
class MountMap:
    gfs_prefixes: tuple[str, ...]
    lfs_prefixes: tuple[str, ...]

    def __post_init__(self):
        gfs = tuple(_normalize_prefix(p) for p in self.gfs_prefixes)
        lfs = tuple(_normalize_prefix(p) for p in self.lfs_prefixes)
        if not gfs or not lfs:
            raise InvalidArgument('both gfs_prefixes and lfs_prefixes must be non-empty')
        if shared := set(gfs) & set(lfs):
            raise InvalidArgument(f'prefixes listed for both GFS and LFS: {sorted(shared)}')
        object.__setattr__(self, 'gfs_prefixes', gfs)
        object.__setattr__(self, 'lfs_prefixes', lfs)

    @cached_property
    def _by_length(self) -> list[tuple[str, FsTier]]:
        pairs = [(p, FsTier.GFS) for p in self.gfs_prefixes] + [(p, FsTier.LFS) for p in self.lfs_prefixes]
        return sorted(pairs, key=lambda pair: len(pair[0]), reverse=True)

    def resolve(self, path: str) -> FsTier | None:
        for prefix, tier in self._by_length:
            if prefix == '/' or path == prefix or path.startswith(prefix + '/'):
                return tier
        return None
