"""
Trace formats.

darshan-parser text: whitespace separated data lines
    <module> <rank> <record id> <counter> <value> <file name> <mount pt> <fs type>
of which only POSIX_F_READ_TIME and POSIX_F_META_TIME of the POSIX module are used. Profiles are per job, so
one text dump is expected per epoch and the epoch is supplied by the caller.

Native trace: one JSON object per line with exactly the fields rank, epoch, file_id, fs, bytes, read_s, meta_s.
"""
import json
import logging
import re
from collections.abc import (
    Iterable,
    Iterator,
)
from dataclasses import dataclass
from typing import TextIO

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

DARSHAN_LINE_RE = re.compile(
    r'(?P<module>\S+)'
    r'\s+(?P<rank>-?\d+)'
    r'\s+(?P<record_id>\S+)'
    r'\s+(?P<counter>\S+)'
    r'\s+(?P<value>\S+)'
    r'\s+(?P<file_name>\S+)'
    r'\s+(?P<mount_pt>\S+)'
    r'\s+(?P<fs_type>\S+)\s*$',
)
READ_TIME = 'POSIX_F_READ_TIME'
META_TIME = 'POSIX_F_META_TIME'
TIME_COUNTERS = {READ_TIME: 'read_s', META_TIME: 'meta_s'}
NATIVE_FIELDS = ('rank', 'epoch', 'file_id', 'fs', 'bytes', 'read_s', 'meta_s')

logger = logging.getLogger(__name__)


@dataclass
class _PartialRecord:
    rank: int
    record_id: str
    fs: FsTier
    read_s: float = 0.0
    meta_s: float = 0.0


class DarshanTextParser:
    """
    Single-pass parser of darshan-parser output. In lenient mode shared (rank -1) records and files outside the
    configured mounts are skipped; `skipped` counts those lines and `consumed` the lines that went into records.
    """

    def __init__(self, mounts: MountMap, epoch: int, *, strict: bool = False):
        if epoch < 0:
            raise InvalidArgument(f'epoch must be non-negative, got {epoch}')
        self.mounts = mounts
        self.epoch = epoch
        self.strict = strict
        self.skipped = 0
        self.consumed = 0

    def _skip(self, line_no: int, reason: str):
        if self.strict:
            raise DataError(f'line {line_no}: {reason}')
        self.skipped += 1
        logger.warning('Skipping line %d: %s', line_no, reason)

    def parse(self, stream: Iterable[str]) -> list[IoRecord]:
        partial: dict[tuple[int, str], _PartialRecord] = {}
        seen: set[tuple[int, str, str]] = set()
        for line_no, line in enumerate(stream, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith('#'):
                continue
            m = DARSHAN_LINE_RE.match(stripped)
            if m is None:
                raise TraceFormatError(f'malformed darshan-parser line: {stripped[:80]!r}', line_no)
            if m['module'] != 'POSIX' or m['counter'] not in TIME_COUNTERS:
                continue
            try:
                value = float(m['value'])
            except ValueError:
                raise TraceFormatError(f'counter value {m["value"]!r} is not a number', line_no) from None
            if not value >= 0:
                raise TraceFormatError(f'{m["counter"]} is negative ({value})', line_no)
            rank = int(m['rank'])
            if rank < 0:
                self._skip(line_no, f'unattributable shared record {m["record_id"]} ({m["file_name"]})')
                continue
            fs = self.mounts.resolve(m['file_name'])
            if fs is None:
                self._skip(line_no, f'{m["file_name"]} is not under a configured GFS or LFS mount')
                continue
            key = (rank, m['record_id'])
            if (*key, m['counter']) in seen:
                self._skip(line_no, f'repeated {m["counter"]} for rank {rank}, record {m["record_id"]}')
                continue
            seen.add((rank, m['record_id'], m['counter']))
            record = partial.setdefault(key, _PartialRecord(rank, m['record_id'], fs))
            setattr(record, TIME_COUNTERS[m['counter']], value)
            self.consumed += 1
        logger.debug('Merged %d darshan counter lines into %d records', self.consumed, len(partial))
        return [
            IoRecord(p.rank, self.epoch, p.record_id, p.fs, 0, p.read_s, p.meta_s)
            for p in partial.values()
        ]


def parse_darshan_text(stream: Iterable[str], mounts: MountMap, epoch: int, *, strict: bool = False) -> list[IoRecord]:
    return DarshanTextParser(mounts, epoch, strict=strict).parse(stream)


def _native_record(obj, line_no: int) -> IoRecord:
    if not isinstance(obj, dict):
        raise TraceFormatError('expected a JSON object', line_no)
    if missing := [f for f in NATIVE_FIELDS if f not in obj]:
        raise TraceFormatError(f'missing fields {", ".join(missing)}', line_no)
    if extra := sorted(set(obj) - set(NATIVE_FIELDS)):
        raise TraceFormatError(f'unknown fields {", ".join(extra)}', line_no)
    for name in ('rank', 'epoch', 'bytes'):
        if isinstance(obj[name], bool) or not isinstance(obj[name], int):
            raise TraceFormatError(f'{name} must be an integer', line_no)
    for name in ('read_s', 'meta_s'):
        if isinstance(obj[name], bool) or not isinstance(obj[name], int | float):
            raise TraceFormatError(f'{name} must be a number', line_no)
    if isinstance(obj['file_id'], bool) or not isinstance(obj['file_id'], int | str):
        raise TraceFormatError('file_id must be an integer or a string', line_no)
    try:
        fs = FsTier(obj['fs'])
    except ValueError:
        raise TraceFormatError(f'unknown filesystem tag {obj["fs"]!r}', line_no) from None
    try:
        return IoRecord(
            obj['rank'],
            obj['epoch'],
            obj['file_id'],
            fs,
            obj['bytes'],
            float(obj['read_s']),
            float(obj['meta_s']),
        )
    except InvalidArgument as e:
        raise TraceFormatError(str(e), line_no) from None


def iter_native_trace(stream: Iterable[str]) -> Iterator[IoRecord]:
    for line_no, line in enumerate(stream, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise TraceFormatError(f'not a JSON object: {e.msg}', line_no) from None
        yield _native_record(obj, line_no)


def parse_native_trace(stream: Iterable[str]) -> list[IoRecord]:
    return list(iter_native_trace(stream))


def format_native_record(record: IoRecord) -> str:
    return (
        f'{{"rank":{record.rank},"epoch":{record.epoch},"file_id":{json.dumps(record.file_id)},'
        f'"fs":"{record.fs.value}","bytes":{record.bytes},'
        f'"read_s":{record.read_s:.9g},"meta_s":{record.meta_s:.9g}}}\n'
    )


def write_native_trace(records: Iterable[IoRecord], stream: TextIO) -> None:
    for record in records:
        stream.write(format_native_record(record))
