import json
import logging
from collections.abc import (
    Iterable,
    Mapping,
)
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import TextIO

import numpy as np

from tier_io.data_types import (
    ClassBreakdown,
    FsTier,
    IoClass,
    IoRecord,
    OpKind,
)
from tier_io.errors import (
    DataError,
    EmptyResultError,
    InvalidArgument,
    TraceFormatError,
)
from tier_io.helpers import (
    format_pct,
    format_seconds,
    rate_from_percent,
)

BREAKDOWN_KEYS = ('cache_rate_pct', 'epoch', 'rank', *(c.column for c in IoClass))

logger = logging.getLogger(__name__)

_CLASS_OF = {(c.fs, c.op_kind): c for c in IoClass}


def classify(fs: FsTier, op_kind: OpKind) -> IoClass:
    return _CLASS_OF[FsTier(fs), OpKind(op_kind)]


def breakdown_epoch(records: Iterable[IoRecord], epoch: int) -> dict[int, ClassBreakdown]:
    sums: dict[int, dict[IoClass, float]] = {}
    for record in records:
        if record.epoch != epoch:
            continue
        seconds = sums.setdefault(record.rank, dict.fromkeys(IoClass, 0.0))
        seconds[classify(record.fs, OpKind.READ)] += record.read_s
        seconds[classify(record.fs, OpKind.META)] += record.meta_s
    if not sums:
        raise EmptyResultError(f'no records for epoch {epoch}')
    return {rank: ClassBreakdown(rank, epoch, sums[rank]) for rank in sorted(sums)}


def slowest_of(totals: Iterable[tuple[int, float]]) -> tuple[int, float]:
    """Rank with the largest total; the lowest rank id wins a tie."""
    best = None
    for rank, total in sorted(totals):
        if best is None or total > best[1]:
            best = (rank, total)
    if best is None:
        raise InvalidArgument('no ranks to choose the slowest from')
    return best


@dataclass(frozen=True)
class EpochAnalysis:
    epoch: int
    slowest_rank: int
    breakdown: ClassBreakdown
    total_s: float

    @property
    def dominant_class(self) -> IoClass:
        return self.breakdown.dominant_class


def slowest(breakdowns: Mapping[int, ClassBreakdown]) -> EpochAnalysis:
    if not breakdowns:
        raise InvalidArgument('cannot pick the slowest process of an empty breakdown')
    rank, total = slowest_of((rank, b.total()) for rank, b in breakdowns.items())
    worst = breakdowns[rank]
    return EpochAnalysis(epoch=worst.epoch, slowest_rank=rank, breakdown=worst, total_s=total)


@dataclass(frozen=True)
class SweepCell:
    analysis: EpochAnalysis
    ranks: dict[int, ClassBreakdown]

    @cached_property
    def rank_ids(self) -> np.ndarray:
        return np.array(sorted(self.ranks), dtype=np.int64)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Per-rank class seconds, one row per entry of `rank_ids`, columns in IoClass order."""
        return np.array([[self.ranks[rank][c] for c in IoClass] for rank in self.rank_ids.tolist()])


class SweepResult(dict):
    """(cache_rate, epoch) -> SweepCell, iterated in key order."""

    @classmethod
    def from_breakdowns(cls, cells: Mapping[tuple[Fraction, int], Mapping[int, ClassBreakdown]]):
        result = cls()
        for (rate, epoch), ranks in sorted(cells.items()):
            ranks = dict(sorted(ranks.items()))
            result[rate, epoch] = SweepCell(slowest(ranks), ranks)
        return result

    def epochs(self) -> list[int]:
        return sorted({epoch for _rate, epoch in self})

    def rates(self, epoch: int) -> list[Fraction]:
        return sorted(rate for rate, e in self if e == epoch)

    def cells_for_epoch(self, epoch: int) -> list[tuple[Fraction, SweepCell]]:
        cells = [(rate, self[rate, epoch]) for rate in self.rates(epoch)]
        if not cells:
            raise InvalidArgument(f'epoch {epoch} is not in the sweep (epochs: {self.epochs()})')
        return cells


def sweep_analysis(traces: Mapping[tuple[Fraction, int], Iterable[IoRecord]]) -> SweepResult:
    cells = {}
    for (rate, epoch), records in traces.items():
        try:
            cells[rate, epoch] = breakdown_epoch(records, epoch)
        except DataError as e:
            raise type(e)(f'cache rate {format_pct(rate)}%, epoch {epoch}: {e}') from e
    logger.info('Analysed %d sweep cells', len(cells))
    return SweepResult.from_breakdowns(cells)


def format_breakdown_line(rate: Fraction, breakdown: ClassBreakdown) -> str:
    times = ','.join(f'"{c.column}":{format_seconds(breakdown[c])}' for c in IoClass)
    return f'{{"cache_rate_pct":{format_pct(rate)},"epoch":{breakdown.epoch},"rank":{breakdown.rank},{times}}}\n'


def write_breakdown_lines(sweep: SweepResult, stream: TextIO) -> None:
    for (rate, _epoch), cell in sweep.items():
        for breakdown in cell.ranks.values():
            stream.write(format_breakdown_line(rate, breakdown))


def read_breakdown_lines(stream: Iterable[str]) -> SweepResult:
    cells: dict[tuple[Fraction, int], dict[int, ClassBreakdown]] = {}
    for line_no, line in enumerate(stream, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise TraceFormatError(f'not a JSON object: {e.msg}', line_no) from None
        if not isinstance(obj, dict) or set(obj) != set(BREAKDOWN_KEYS):
            raise TraceFormatError(f'expected exactly the keys {", ".join(BREAKDOWN_KEYS)}', line_no)
        try:
            rate = rate_from_percent(obj['cache_rate_pct'])
            epoch, rank = obj['epoch'], obj['rank']
            if not (isinstance(epoch, int) and isinstance(rank, int)):
                raise InvalidArgument('epoch and rank must be integers')
            breakdown = ClassBreakdown(rank, epoch, {c: obj[c.column] for c in IoClass})
        except (ValueError, TypeError) as e:
            raise TraceFormatError(str(e), line_no) from None
        ranks = cells.setdefault((rate, epoch), {})
        if rank in ranks:
            raise TraceFormatError(f'duplicate rank {rank} for cache rate {format_pct(rate)}%, epoch {epoch}', line_no)
        ranks[rank] = breakdown
    if not cells:
        raise EmptyResultError('no breakdown lines')
    return SweepResult.from_breakdowns(cells)
