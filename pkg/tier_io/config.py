"""
Run configuration: one JSON document.

    {
      "dataset":  {"file_count": 589824, "file_size_bytes": 131072, "samples_per_file": 1},
      "cluster":  {"nodes": 768, "procs_per_node": 4, "nodes_per_ssd": 16, "gfs_ost_count": 60},
      "storage":  {"ost_read_bw": 1073741824, "ssd_read_bw": 314572800, "gfs_meta_base_s": 0.002,
                   "gfs_meta_capacity": 8000, "lfs_meta_s": 0.0004},
      "sim":      {"seed": 0, "jitter_sigma": 0.02, "epochs": 3},
      "sweep":    [0, 5, 10, ..., 100],
      "mounts":   {"gfs_prefixes": ["/vol0001"], "lfs_prefixes": ["/local"]},
      "training": {"batch_size": 12, "prefetch": true}
    }

`sweep` is a list of cache rates in percent. `mounts` is only used when ingesting darshan-parser output and
`training` is recorded but does not change the modelled I/O.
"""
import dataclasses
import json
import logging
import pathlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import platformdirs

from tier_io.data_types import (
    ClusterSpec,
    DatasetSpec,
    MountMap,
    SimOptions,
    StorageProfile,
    TrainingSpec,
)
from tier_io.errors import (
    ConfigError,
    InvalidArgument,
)
from tier_io.helpers import (
    format_pct,
    rate_from_percent,
)

APP_NAME = 'tier-io'
AUTHOR = 'tier-io'
CONFIG_FILE_NAME = 'config.json'

_SECTIONS = {
    'dataset': DatasetSpec,
    'cluster': ClusterSpec,
    'storage': StorageProfile,
    'sim': SimOptions,
    'mounts': MountMap,
    'training': TrainingSpec,
}
_REQUIRED = ('dataset', 'cluster', 'storage', 'sim', 'sweep')

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetSpec
    cluster: ClusterSpec
    storage: StorageProfile
    sim: SimOptions
    sweep: tuple[Fraction, ...]
    mounts: MountMap | None = None
    training: TrainingSpec = dataclasses.field(default_factory=TrainingSpec)

    def __post_init__(self):
        if self.dataset.file_count < self.cluster.total_procs:
            raise ConfigError(
                f'dataset.file_count: {self.dataset.file_count} files cannot be split over '
                f'{self.cluster.total_procs} processes',
            )

    def to_dict(self) -> dict[str, Any]:
        data = {
            name: dataclasses.asdict(getattr(self, name))
            for name in ('dataset', 'cluster', 'storage', 'sim')
        }
        data['sweep'] = [json.loads(format_pct(rate)) for rate in self.sweep]
        if self.mounts is not None:
            data['mounts'] = {k: list(v) for k, v in dataclasses.asdict(self.mounts).items()}
        data['training'] = dataclasses.asdict(self.training)
        return data


def default_config_path() -> pathlib.Path:
    return pathlib.Path(platformdirs.user_config_dir(APP_NAME, AUTHOR)) / CONFIG_FILE_NAME


def _build_section(name: str, data: Any):
    cls = _SECTIONS[name]
    if not isinstance(data, dict):
        raise ConfigError(f'{name}: expected an object')
    fields = {f.name: f for f in dataclasses.fields(cls)}
    if unknown := sorted(set(data) - set(fields)):
        raise ConfigError(f'{name}.{unknown[0]}: unknown key')
    required = [
        f.name for f in fields.values()
        if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
    ]
    if missing := [key for key in required if key not in data]:
        raise ConfigError(f'{name}.{missing[0]}: missing key')
    kwargs = dict(data)
    if cls is MountMap:
        kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in kwargs.items()}
    try:
        return cls(**kwargs)
    except InvalidArgument as e:
        field_name = next((key for key in kwargs if str(e).startswith(f'{key} ')), None)
        raise ConfigError(f'{name}.{field_name}: {e}' if field_name else f'{name}: {e}') from None


def _build_sweep(data: Any) -> tuple[Fraction, ...]:
    if not isinstance(data, list) or not data:
        raise ConfigError('sweep: expected a non-empty list of cache rates in percent')
    rates = []
    for i, pct in enumerate(data):
        try:
            rate = rate_from_percent(pct)
        except InvalidArgument as e:
            raise ConfigError(f'sweep[{i}]: {e}') from None
        if not 0 <= rate <= 1:
            raise ConfigError(f'sweep[{i}]: {pct} is outside 0..100 %')
        if rates and rate <= rates[-1]:
            raise ConfigError(f'sweep[{i}]: cache rates must be strictly increasing')
        rates.append(rate)
    return tuple(rates)


def config_from_dict(data: Any) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError('configuration must be a JSON object')
    if unknown := sorted(set(data) - set(_SECTIONS) - {'sweep'}):
        raise ConfigError(f'{unknown[0]}: unknown key')
    if missing := [key for key in _REQUIRED if key not in data]:
        raise ConfigError(f'{missing[0]}: missing key')
    sections = {name: _build_section(name, value) for name, value in data.items() if name in _SECTIONS}
    return RunConfig(sweep=_build_sweep(data['sweep']), **sections)


def load_config(path: str | pathlib.Path | None = None) -> RunConfig:
    path = pathlib.Path(path) if path is not None else default_config_path()
    logger.debug('Loading configuration from %s', path)
    try:
        with path.open(encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f'{path}: no such configuration file') from None
    except json.JSONDecodeError as e:
        raise ConfigError(f'{path}: not valid JSON ({e.msg} at line {e.lineno})') from None
    return config_from_dict(data)
