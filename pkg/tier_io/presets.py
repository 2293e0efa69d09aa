"""
Datasets
    small   589824 files of 128 KiB (72 GiB), batch size 12
    large     6144 files of 12 MiB (72 GiB), batch size 2
Cluster
    768 nodes, 4 processes per node (3072 ranks)
    one NVMe SSD per 16 nodes
    fast GFS: 60 OSTs
    slow GFS: 1 OST
Storage
    1 GiB/s per OST
    300 MiB/s per SSD
    2 ms per open+close on the GFS without load, metadata server handles 8000 ops/s
    0.4 ms per open+close on the LFS
Sweep
    cache rate 0..100 % every 5 %, 3 epochs, seed 0, jitter sigma 0.02

The storage numbers are not measured values. They place the small-file presets in the two regimes seen on the
real system: with the fast GFS the slowest process is bound by GFS metadata at low cache rates and by LFS reads at
high ones, with the best cache rate in between; with the slow GFS reads dominate the GFS time because the metadata
server sees fewer requests.
"""
from tier_io.config import RunConfig
from tier_io.data_types import (
    ClusterSpec,
    DatasetSpec,
    SimOptions,
    StorageProfile,
    TrainingSpec,
)
from tier_io.errors import ConfigError
from tier_io.helpers import rate_from_percent

KIB = 1024
MIB = 1024 * KIB
GIB = 1024 * MIB

PRESET_NAMES = ('small-fast', 'small-slow', 'large-fast', 'large-slow')

STORAGE = StorageProfile(
    ost_read_bw=1 * GIB,
    ssd_read_bw=300 * MIB,
    gfs_meta_base_s=0.002,
    gfs_meta_capacity=8000,
    lfs_meta_s=0.0004,
)
SWEEP = tuple(rate_from_percent(pct) for pct in range(0, 101, 5))


def get_dataset(name: str) -> tuple[DatasetSpec, TrainingSpec]:
    match name:
        case 'small':
            return DatasetSpec(file_count=589824, file_size_bytes=128 * KIB), TrainingSpec(batch_size=12)
        case 'large':
            return DatasetSpec(file_count=6144, file_size_bytes=12 * MIB), TrainingSpec(batch_size=2)
        case _:
            raise ConfigError(f'unknown dataset preset {name!r}')


def get_cluster(gfs: str) -> ClusterSpec:
    match gfs:
        case 'fast':
            return ClusterSpec(nodes=768, procs_per_node=4, nodes_per_ssd=16, gfs_ost_count=60)
        case 'slow':
            return ClusterSpec(nodes=768, procs_per_node=4, nodes_per_ssd=16, gfs_ost_count=1)
        case _:
            raise ConfigError(f'unknown GFS preset {gfs!r}')


def get_preset(name: str) -> RunConfig:
    if name not in PRESET_NAMES:
        raise ConfigError(f'preset: unknown preset {name!r}, valid names are {", ".join(PRESET_NAMES)}')
    dataset_name, gfs = name.split('-')
    dataset, training = get_dataset(dataset_name)
    return RunConfig(
        dataset=dataset,
        cluster=get_cluster(gfs),
        storage=STORAGE,
        sim=SimOptions(seed=0, jitter_sigma=0.02, epochs=3),
        sweep=SWEEP,
        training=training,
    )


def preset_names() -> tuple[str, ...]:
    return PRESET_NAMES
