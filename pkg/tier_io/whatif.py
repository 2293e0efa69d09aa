"""
What-if estimation on measured (or simulated) breakdowns.

An N% throughput improvement of an I/O class scales the measured time of that class by 100 / (100 + N). Every
rank is rescaled and the slowest one is picked again, because an improvement can move the bottleneck to another
rank or class.
"""
import logging
import math
from collections.abc import (
    Iterable,
    Mapping,
)
from dataclasses import (
    dataclass,
    field,
)
from fractions import Fraction

import numpy as np

from tier_io.breakdown import (
    SweepCell,
    SweepResult,
    slowest_of,
)
from tier_io.data_types import (
    ClassBreakdown,
    IoClass,
)
from tier_io.errors import InvalidArgument
from tier_io.helpers import format_number

DEFAULT_EPOCH = 2

logger = logging.getLogger(__name__)


def _check_percent(io_class: IoClass, percent) -> float:
    if isinstance(percent, bool) or not isinstance(percent, int | float) or not math.isfinite(percent):
        raise InvalidArgument(f'improvement of {io_class} must be a number, got {percent!r}')
    if percent < 0:
        raise InvalidArgument(f'improvement of {io_class} must be non-negative, got {percent}')
    return percent


@dataclass(frozen=True)
class ImprovementSpec:
    rates: tuple[tuple[IoClass, float], ...] = ()

    def __post_init__(self):
        seen = set()
        rates = []
        for io_class, percent in self.rates:
            io_class = IoClass.from_token(io_class) if isinstance(io_class, str) else IoClass(io_class)
            if io_class in seen:
                raise InvalidArgument(f'{io_class} is improved more than once')
            seen.add(io_class)
            rates.append((io_class, _check_percent(io_class, percent)))
        object.__setattr__(self, 'rates', tuple(rates))

    @classmethod
    def parse(cls, tokens: Iterable[str]) -> 'ImprovementSpec':
        """Build from command-line tokens such as ``GFS-META=50``."""
        pairs = []
        for token in tokens:
            name, sep, value = str(token).partition('=')
            if not sep:
                raise InvalidArgument(f'expected CLASS=PERCENT, got {token!r}')
            io_class = IoClass.from_token(name.strip())
            try:
                percent = float(value)
            except ValueError:
                raise InvalidArgument(f'not a percentage: {value!r}') from None
            pairs.append((io_class, percent))
        return cls(tuple(pairs))

    def factor(self, io_class: IoClass) -> float:
        for targeted, percent in self.rates:
            if targeted == io_class:
                return 100 / (100 + percent)
        return 1.0

    @property
    def factors(self) -> np.ndarray:
        return np.array([self.factor(c) for c in IoClass])

    def __str__(self):
        if not self.rates:
            return 'no improvement'
        return ', '.join(f'{c} +{format_number(n)}%' for c, n in self.rates)


@dataclass(frozen=True)
class EstimateResult:
    slowest_rank: int
    est_total_s: float
    est_breakdown: ClassBreakdown
    improvements: ImprovementSpec


def apply_improvement(b: ClassBreakdown, imp: ImprovementSpec) -> ClassBreakdown:
    return ClassBreakdown(b.rank, b.epoch, {c: b[c] * imp.factor(c) for c in IoClass})


def estimate_slowest(all_ranks: Mapping[int, ClassBreakdown], imp: ImprovementSpec) -> EstimateResult:
    if not all_ranks:
        raise InvalidArgument('cannot estimate the slowest process of an empty breakdown')
    improved = {rank: apply_improvement(b, imp) for rank, b in all_ranks.items()}
    rank, total = slowest_of((rank, b.total()) for rank, b in improved.items())
    return EstimateResult(slowest_rank=rank, est_total_s=total, est_breakdown=improved[rank], improvements=imp)


def _improved_totals(cell: SweepCell, factors: np.ndarray) -> np.ndarray:
    # Same operation order as apply_improvement + ClassBreakdown.total, so both paths agree bit for bit.
    scaled = cell.matrix * factors
    return scaled[:, 0] + scaled[:, 1] + scaled[:, 2] + scaled[:, 3]


def _slowest_in_cell(cell: SweepCell, factors: np.ndarray) -> tuple[int, float]:
    totals = _improved_totals(cell, factors)
    # argmax returns the first maximum and rank_ids is ascending, so ties go to the lowest rank.
    idx = int(np.argmax(totals))
    return int(cell.rank_ids[idx]), float(totals[idx])


def estimate_curve(sweep: SweepResult, epoch: int, imp: ImprovementSpec) -> dict[Fraction, EstimateResult]:
    factors = imp.factors
    curve = {}
    for rate, cell in sweep.cells_for_epoch(epoch):
        rank, total = _slowest_in_cell(cell, factors)
        curve[rate] = EstimateResult(rank, total, apply_improvement(cell.ranks[rank], imp), imp)
    return curve


def best_cache_rate(sweep: SweepResult, epoch: int, imp: ImprovementSpec) -> tuple[Fraction, EstimateResult]:
    best = None
    for rate, result in estimate_curve(sweep, epoch, imp).items():
        if best is None or result.est_total_s < best[1].est_total_s:
            best = (rate, result)
    return best


@dataclass(frozen=True)
class GridCell:
    feasible: bool
    min_cache_rate: Fraction | None
    best_time_s: float
    best_cache_rate: Fraction


@dataclass(frozen=True)
class FeasibilityGrid:
    class_a: IoClass
    class_b: IoClass
    rates: tuple[float, ...]
    goal_s: float
    cells: dict[tuple[float, float], GridCell] = field(default_factory=dict)

    def feasible_count(self) -> int:
        return sum(cell.feasible for cell in self.cells.values())


def grid_values(max_percent: float, step: float) -> tuple[float, ...]:
    count = math.floor(max_percent / step + 1e-9)
    return tuple(i * step for i in range(count + 1))


def explore_grid(
        sweep: SweepResult,
        epoch: int,
        class_a: IoClass,
        class_b: IoClass,
        max_percent: float,
        step: float,
        goal_s: float,
) -> FeasibilityGrid:
    class_a, class_b = IoClass.from_token(class_a), IoClass.from_token(class_b)
    if class_a == class_b:
        raise InvalidArgument(f'both grid axes improve {class_a}')
    if isinstance(step, bool) or not isinstance(step, int | float) or not step > 0:
        raise InvalidArgument(f'step must be positive, got {step!r}')
    if isinstance(max_percent, bool) or not isinstance(max_percent, int | float) or not max_percent >= 0:
        raise InvalidArgument(f'max_percent must be non-negative, got {max_percent!r}')
    if isinstance(goal_s, bool) or not isinstance(goal_s, int | float) or math.isnan(goal_s):
        raise InvalidArgument(f'goal must be a number of seconds, got {goal_s!r}')
    cells_by_rate = sweep.cells_for_epoch(epoch)
    values = grid_values(max_percent, step)
    grid = FeasibilityGrid(class_a, class_b, values, goal_s)
    for imp_a in values:
        for imp_b in values:
            factors = ImprovementSpec(((class_a, imp_a), (class_b, imp_b))).factors
            best_rate, best_time, min_rate = None, math.inf, None
            for rate, cell in cells_by_rate:
                _rank, total = _slowest_in_cell(cell, factors)
                if best_rate is None or total < best_time:
                    best_rate, best_time = rate, total
                if min_rate is None and total <= goal_s:
                    min_rate = rate
            grid.cells[imp_a, imp_b] = GridCell(min_rate is not None, min_rate, best_time, best_rate)
    logger.info(
        '%d of %d improvement combinations meet %s s',
        grid.feasible_count(),
        len(grid.cells),
        format_number(goal_s),
    )
    return grid
