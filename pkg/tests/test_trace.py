import io
import pathlib
import unittest

from tier_io._trace import (
    DarshanTextParser,
    format_native_record,
    parse_darshan_text,
    parse_native_trace,
    write_native_trace,
)
from tier_io.data_types import (
    FsTier,
    IoRecord,
    MountMap,
)
from tier_io.errors import (
    DataError,
    InvalidArgument,
    TraceFormatError,
)

DARSHAN_SAMPLE = pathlib.Path(__file__).parent / 'test_data' / 'darshan_sample.txt'
MOUNTS = MountMap(gfs_prefixes=('/vol0001',), lfs_prefixes=('/local',))


class DarshanTextTest(unittest.TestCase):
    def test_field_mapping(self):
        lines = [
            'POSIX 3 77 POSIX_F_READ_TIME 0.125 /gfs/ds/f0 /gfs lustre',
            'POSIX 3 77 POSIX_F_META_TIME 0.002 /gfs/ds/f0 /gfs lustre',
        ]
        mounts = MountMap(gfs_prefixes=('/gfs',), lfs_prefixes=('/llio',))
        (record,) = parse_darshan_text(lines, mounts, epoch=2)
        assert record == IoRecord(3, 2, '77', FsTier.GFS, 0, 0.125, 0.002)

    def test_lfs_prefix(self):
        mounts = MountMap(gfs_prefixes=('/gfs',), lfs_prefixes=('/llio',))
        (record,) = parse_darshan_text(['POSIX 0 1 POSIX_F_READ_TIME 0.5 /llio/ds/f1 /llio xfs'], mounts, epoch=0)
        assert record.fs == FsTier.LFS
        assert record.meta_s == 0.0

    def test_sample_lenient(self):
        parser = DarshanTextParser(MOUNTS, epoch=1)
        with self.assertLogs('tier_io._trace', level='WARNING') as logs, DARSHAN_SAMPLE.open() as f:
            records = parser.parse(f)
        assert len(records) == 5
        assert parser.skipped == 1
        assert len(logs.records) == 1
        assert 'unattributable shared record' in logs.output[0]
        assert parser.skipped + parser.consumed == 11
        assert sorted(r.rank for r in records) == [0, 1, 2, 3, 4]
        by_rank = {r.rank: r for r in records}
        with self.subTest('merged counters'):
            assert by_rank[2].read_s == 0.25
            assert by_rank[2].meta_s == 0.004
            assert by_rank[4].read_s == 0.0625
            assert by_rank[4].meta_s == 0.0005
        with self.subTest('tiers'):
            assert [by_rank[rank].fs for rank in range(5)] == [
                FsTier.GFS, FsTier.LFS, FsTier.GFS, FsTier.GFS, FsTier.LFS,
            ]
        with self.subTest('epoch stamp'):
            assert {r.epoch for r in records} == {1}

    def test_sample_strict(self):
        with DARSHAN_SAMPLE.open() as f, self.assertRaises(DataError) as cm:
            parse_darshan_text(f, MOUNTS, epoch=0, strict=True)
        assert 'unattributable shared record' in str(cm.exception)
        assert cm.exception.exit_code == 3

    def test_unmatched_mount(self):
        lines = ['POSIX 0 1 POSIX_F_READ_TIME 0.5 /scratch/f1 /scratch lustre']
        with self.subTest('lenient'):
            parser = DarshanTextParser(MOUNTS, epoch=0)
            with self.assertLogs('tier_io._trace', level='WARNING'):
                assert parser.parse(lines) == []
            assert parser.skipped == 1
        with self.subTest('strict'), self.assertRaises(DataError):
            parse_darshan_text(lines, MOUNTS, epoch=0, strict=True)

    def test_malformed(self):
        lines = ['# header', '', 'POSIX 0 1 POSIX_F_READ_TIME']
        with self.assertRaises(TraceFormatError) as cm:
            parse_darshan_text(lines, MOUNTS, epoch=0)
        assert cm.exception.line_no == 3
        assert str(cm.exception).startswith('line 3:')

    def test_bad_value(self):
        with self.assertRaises(TraceFormatError):
            parse_darshan_text(['POSIX 0 1 POSIX_F_READ_TIME abc /local/f /local xfs'], MOUNTS, epoch=0)
        with self.assertRaises(TraceFormatError):
            parse_darshan_text(['POSIX 0 1 POSIX_F_READ_TIME -1.0 /local/f /local xfs'], MOUNTS, epoch=0)

    def test_repeated_counter(self):
        lines = [
            'POSIX 0 1 POSIX_F_READ_TIME 0.5 /local/f /local xfs',
            'POSIX 0 1 POSIX_F_META_TIME 0.01 /local/f /local xfs',
            'POSIX 0 1 POSIX_F_READ_TIME 0.75 /local/f /local xfs',
        ]
        with self.subTest('lenient'):
            parser = DarshanTextParser(MOUNTS, epoch=0)
            with self.assertLogs('tier_io._trace', level='WARNING') as logs:
                (record,) = parser.parse(lines)
            assert record.read_s == 0.5
            assert record.meta_s == 0.01
            assert (parser.consumed, parser.skipped) == (2, 1)
            assert 'repeated POSIX_F_READ_TIME' in logs.output[0]
        with self.subTest('strict'), self.assertRaises(DataError) as cm:
            parse_darshan_text(lines, MOUNTS, epoch=0, strict=True)
        assert str(cm.exception).startswith('line 3:')

    def test_other_modules_ignored(self):
        lines = ['STDIO 0 1 STDIO_F_READ_TIME 3.0 /local/f /local xfs', 'POSIX 0 1 POSIX_OPENS 3 /local/f /local xfs']
        assert parse_darshan_text(lines, MOUNTS, epoch=0) == []


class MountMapTest(unittest.TestCase):
    def test_longest_prefix(self):
        mounts = MountMap(gfs_prefixes=('/vol0001',), lfs_prefixes=('/vol0001/cache/',))
        assert mounts.lfs_prefixes == ('/vol0001/cache',)
        assert mounts.resolve('/vol0001/cache/f') == FsTier.LFS
        assert mounts.resolve('/vol0001/data/f') == FsTier.GFS
        assert mounts.resolve('/vol0001/cache2/f') == FsTier.GFS
        assert mounts.resolve('/vol00012/f') is None

    def test_invalid(self):
        with self.subTest('empty'), self.assertRaises(InvalidArgument):
            MountMap(gfs_prefixes=(), lfs_prefixes=('/local',))
        with self.subTest('relative'), self.assertRaises(InvalidArgument):
            MountMap(gfs_prefixes=('vol0001',), lfs_prefixes=('/local',))
        with self.subTest('shared'), self.assertRaises(InvalidArgument):
            MountMap(gfs_prefixes=('/data',), lfs_prefixes=('/data/',))


class NativeTraceTest(unittest.TestCase):
    def test_parse(self):
        line = '{"rank":0,"epoch":2,"file_id":5,"fs":"LFS","bytes":131072,"read_s":0.001,"meta_s":0.0001}\n'
        assert parse_native_trace([line]) == [IoRecord(0, 2, 5, FsTier.LFS, 131072, 0.001, 0.0001)]

    def test_write(self):
        with self.subTest('empty'):
            out = io.StringIO()
            write_native_trace([], out)
            assert out.getvalue() == ''
        with self.subTest('one record'):
            record = IoRecord(7, 1, 'abc', FsTier.GFS, 12, 1 / 3, 2e-5)
            assert format_native_record(record) == (
                '{"rank":7,"epoch":1,"file_id":"abc","fs":"GFS","bytes":12,'
                '"read_s":0.333333333,"meta_s":2e-05}\n'
            )

    def test_round_trip(self):
        records = [
            IoRecord(0, 0, 5, FsTier.LFS, 131072, 0.001, 0.0001),
            IoRecord(3, 2, '9111111111111111101', FsTier.GFS, 0, 0.125, 0.002),
            IoRecord(1, 1, 6, FsTier.GFS, 1, 0.0, 0.0),
        ]
        out = io.StringIO()
        write_native_trace(records, out)
        assert parse_native_trace(io.StringIO(out.getvalue())) == records
        assert out.getvalue().count('\n') == 3

    def test_rejected(self):
        base = '"rank":0,"epoch":0,"file_id":1,"bytes":1,"read_s":0.1,"meta_s":0.1'
        cases = {
            'unknown fs': f'{{{base},"fs":"SSD"}}',
            'missing field': '{"rank":0,"epoch":0,"file_id":1,"fs":"GFS","bytes":1,"read_s":0.1}',
            'extra field': f'{{{base},"fs":"GFS","host":"n1"}}',
            'negative time': '{"rank":0,"epoch":0,"file_id":1,"fs":"GFS","bytes":1,"read_s":-0.1,"meta_s":0.1}',
            'not json': '{"rank":0,',
            'not an object': '[1, 2]',
            'string rank': '{"rank":"0","epoch":0,"file_id":1,"fs":"GFS","bytes":1,"read_s":0.1,"meta_s":0.1}',
        }
        for name, line in cases.items():
            with self.subTest(name):
                with self.assertRaises(TraceFormatError) as cm:
                    parse_native_trace(['', line])
                assert cm.exception.line_no == 2


if __name__ == '__main__':
    unittest.main()
