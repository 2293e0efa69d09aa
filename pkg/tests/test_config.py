import copy
import json
import pathlib
import tempfile
import unittest
from fractions import Fraction

from tier_io.config import (
    config_from_dict,
    default_config_path,
    load_config,
)
from tier_io.data_types import (
    FsTier,
    TrainingSpec,
)
from tier_io.errors import ConfigError

SMALL_CONFIG = pathlib.Path(__file__).parent / 'test_data' / 'small_config.json'


class ConfigTest(unittest.TestCase):
    def setUp(self):
        with SMALL_CONFIG.open() as f:
            self.data = json.load(f)

    def test_load(self):
        run = load_config(SMALL_CONFIG)
        assert run.cluster.total_procs == 64
        assert run.cluster.ssd_count == 4
        assert run.dataset.total_bytes == 2 * 2**30
        assert run.sweep == (0, Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), 1)
        assert run.mounts.resolve('/local/x') == FsTier.LFS
        assert run.training == TrainingSpec(batch_size=4, prefetch=True)

    def test_round_trip(self):
        run = load_config(SMALL_CONFIG)
        assert config_from_dict(json.loads(json.dumps(run.to_dict()))) == run

    def test_optional_sections(self):
        del self.data['mounts']
        del self.data['training']
        run = config_from_dict(self.data)
        assert run.mounts is None
        assert run.training == TrainingSpec()

    def test_fractional_rates(self):
        self.data['sweep'] = [0, 62.5, 65]
        assert config_from_dict(self.data).sweep == (0, Fraction(5, 8), Fraction(13, 20))

    def test_field_paths(self):
        cases = {
            'storage.ost_read_bw': lambda d: d['storage'].update(ost_read_bw=0),
            'cluster.nodes': lambda d: d['cluster'].update(nodes=-1),
            'cluster.nodes_per_ssd': lambda d: d['cluster'].update(nodes_per_ssd=0),
            'sim.jitter_sigma': lambda d: d['sim'].update(jitter_sigma=-0.1),
            'dataset.bogus': lambda d: d['dataset'].update(bogus=1),
            'storage.lfs_meta_s': lambda d: d['storage'].pop('lfs_meta_s'),
            'sweep[1]': lambda d: d.update(sweep=[10, 5]),
            'sweep[0]': lambda d: d.update(sweep=[150]),
            'sim': lambda d: d.pop('sim'),
            'extra': lambda d: d.update(extra={}),
            'dataset.file_count': lambda d: d['dataset'].update(file_count=10),
        }
        for path, mutate in cases.items():
            data = copy.deepcopy(self.data)
            mutate(data)
            with self.subTest(path):
                with self.assertRaises(ConfigError) as cm:
                    config_from_dict(data)
                assert str(cm.exception).startswith(f'{path}:')
                assert cm.exception.exit_code == 2

    def test_file_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            missing = pathlib.Path(tmp) / 'missing.json'
            with self.assertRaises(ConfigError):
                load_config(missing)
            broken = pathlib.Path(tmp) / 'broken.json'
            broken.write_text('{"dataset": ')
            with self.assertRaises(ConfigError):
                load_config(broken)

    def test_default_path(self):
        path = default_config_path()
        assert path.name == 'config.json'
        assert 'tier-io' in str(path)


if __name__ == '__main__':
    unittest.main()
