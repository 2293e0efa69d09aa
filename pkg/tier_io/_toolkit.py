import asyncio
import contextlib
import json
import logging
import pathlib
import re
import sys
from collections.abc import (
    Iterable,
    Iterator,
)
from fractions import Fraction
from typing import TextIO

from tier_io._console import console
from tier_io._trace import (
    DarshanTextParser,
    format_native_record,
    parse_native_trace,
    write_native_trace,
)
from tier_io.breakdown import (
    SweepResult,
    read_breakdown_lines,
    sweep_analysis,
    write_breakdown_lines,
)
from tier_io.config import (
    RunConfig,
    load_config,
)
from tier_io.data_types import (
    IoClass,
    IoRecord,
    MountMap,
)
from tier_io.errors import (
    ConfigError,
    InvalidArgument,
    ToolkitError,
    TraceFormatError,
)
from tier_io.helpers import (
    format_number,
    format_pct,
    format_seconds,
    rate_from_percent,
    read_lines,
    rich_table,
    write_csv,
    write_text,
)
from tier_io.presets import (
    get_preset,
    preset_names,
)
from tier_io.storage_sim import simulate_sweep
from tier_io.whatif import (
    DEFAULT_EPOCH,
    ImprovementSpec,
    best_cache_rate,
    estimate_curve,
    explore_grid,
)
from tier_io.workload import lfs_bytes_per_ssd

SUMMARY_COLUMNS = ['cache_rate_pct', 'epoch', 'slowest_rank', *(c.column for c in IoClass), 'total_s']
CURVE_COLUMNS = ['cache_rate_pct', 'slowest_rank', *(c.column for c in IoClass), 'total_s']
ESTIMATE_COLUMNS = ['epoch', 'baseline_rate_pct', 'baseline_s', 'improved_rate_pct', 'improved_s', 'reduction_pct']
GRID_COLUMNS = ['imp_a_pct', 'imp_b_pct', 'feasible', 'min_cache_rate_pct', 'best_time_s']
TRACE_NAME_RE = re.compile(r'trace_r(?P<pct>\d+(?:\.\d+)?)_e(?P<epoch>\d+)\.jsonl$')
TRACE_GLOB = 'trace_r*_e*.jsonl'

logger = logging.getLogger(__name__)


def trace_file_name(rate: Fraction, epoch: int) -> str:
    return f'trace_r{format_pct(rate)}_e{epoch}.jsonl'


def _split_prefixes(value) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, list | tuple):
        return tuple(str(v) for v in value)
    return tuple(p for p in str(value).split(',') if p)


def _existing(path) -> pathlib.Path:
    path = pathlib.Path(path)
    if not path.exists():
        raise ConfigError(f'{path}: no such file or directory')
    return path


def _not_utf8(name: str, e: UnicodeDecodeError) -> TraceFormatError:
    return TraceFormatError(f'{name}: not UTF-8 text ({e.reason} at byte {e.start})')


@contextlib.contextmanager
def _output(out) -> Iterator[TextIO]:
    if out in {None, '-'}:
        yield sys.stdout
        return
    path = pathlib.Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as f:
        yield f


def _breakdown_row(breakdown) -> dict[str, str]:
    return {c.column: format_seconds(breakdown[c]) for c in IoClass}


class Toolkit:
    """Analyse and predict DNN-training I/O on a two-tier (global + local) storage system."""

    def __init__(self, verbose: bool = False):
        if verbose:
            logging.getLogger('tier_io').setLevel(logging.DEBUG)

    # Commands

    def simulate(self, out_dir: str = 'traces', config: str | None = None, preset: str | None = None):
        """
        Run the storage simulator over the cache-rate sweep of the configuration and write one native trace per
        cache rate and epoch into OUT_DIR.
        """
        run = self._load_run_config(config, preset)
        sweep = simulate_sweep(run)
        out = pathlib.Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        asyncio.run(self._write_traces(out, sweep))
        console.log(f'Wrote {len(sweep)} traces to {out}')

    def ingest(
            self,
            input: str = '-',
            out: str = '-',
            epoch: int = 0,
            strict: bool = False,
            gfs: str | None = None,
            lfs: str | None = None,
            config: str | None = None,
    ):
        """Convert darshan-parser text output of one epoch into a native trace."""
        mounts = self._mounts(gfs, lfs, config)
        parser = DarshanTextParser(mounts, epoch, strict=strict)
        try:
            if input == '-':
                records = parser.parse(sys.stdin)
            else:
                with _existing(input).open(encoding='utf-8') as f:
                    records = parser.parse(f)
        except UnicodeDecodeError as e:
            raise _not_utf8(pathlib.Path(input).name, e) from None
        with _output(out) as f:
            write_native_trace(records, f)
        if parser.skipped:
            console.log(f'[yellow]Skipped {parser.skipped} counter lines')
        console.log(f'Ingested {len(records)} records from {parser.consumed} counter lines')

    def analyze(
            self,
            *traces: str,
            summary: str = 'summary.csv',
            breakdowns: str = 'breakdowns.jsonl',
            cache_rate: float | None = None,
    ):
        """
        Break the I/O time of every rank into GFS-READ, GFS-META, LFS-READ and LFS-META and report the slowest
        process of every (cache rate, epoch).
        """
        files = self._trace_files(traces)
        records_by_file = asyncio.run(self._read_traces(files))
        cells: dict[tuple[Fraction, int], list[IoRecord]] = {}
        for fn, records in records_by_file.items():
            rate = self._cache_rate_of(fn, cache_rate)
            for record in records:
                cells.setdefault((rate, record.epoch), []).append(record)
        if not cells:
            raise ConfigError(f'traces: no records in {", ".join(fn.name for fn in files)}')
        sweep = sweep_analysis(dict(sorted(cells.items())))
        rows = [
            {
                'cache_rate_pct': format_pct(rate),
                'epoch': str(epoch),
                'slowest_rank': str(cell.analysis.slowest_rank),
                **_breakdown_row(cell.analysis.breakdown),
                'total_s': format_seconds(cell.analysis.total_s),
            }
            for (rate, epoch), cell in sweep.items()
        ]
        with _output(summary) as f:
            write_csv(rows, SUMMARY_COLUMNS, f)
        with _output(breakdowns) as f:
            write_breakdown_lines(sweep, f)
        console.print(self._sweep_table(sweep))

    def estimate(self, breakdowns: str, *improvements: str, epoch: int = DEFAULT_EPOCH, curve: str | None = None):
        """
        Estimate the best slowest-process I/O time when I/O classes get faster, e.g. GFS-META=50 for a 50%
        throughput improvement of GFS metadata operations.
        """
        sweep = self._read_breakdowns(breakdowns)
        imp = ImprovementSpec.parse(improvements)
        baseline_rate, baseline = best_cache_rate(sweep, epoch, ImprovementSpec())
        improved_rate, improved = best_cache_rate(sweep, epoch, imp)
        if baseline.est_total_s > 0:
            reduction = 100 * (1 - improved.est_total_s / baseline.est_total_s)
        else:
            reduction = 0.0
        row = {
            'epoch': str(epoch),
            'baseline_rate_pct': format_pct(baseline_rate),
            'baseline_s': format_seconds(baseline.est_total_s),
            'improved_rate_pct': format_pct(improved_rate),
            'improved_s': format_seconds(improved.est_total_s),
            'reduction_pct': format_seconds(reduction),
        }
        write_csv([row], ESTIMATE_COLUMNS, sys.stdout)
        if curve is not None:
            curve_rows = [
                {
                    'cache_rate_pct': format_pct(rate),
                    'slowest_rank': str(result.slowest_rank),
                    **_breakdown_row(result.est_breakdown),
                    'total_s': format_seconds(result.est_total_s),
                }
                for rate, result in estimate_curve(sweep, epoch, imp).items()
            ]
            with _output(curve) as f:
                write_csv(curve_rows, CURVE_COLUMNS, f)
        console.log(
            f'{imp}: best {format_pct(improved_rate)}% at {improved.est_total_s:.3f} s '
            f'(was {format_pct(baseline_rate)}% at {baseline.est_total_s:.3f} s), '
            f'bottleneck {improved.est_breakdown.dominant_class} on rank {improved.slowest_rank}',
        )

    def explore(
            self,
            breakdowns: str,
            class_a: str,
            class_b: str,
            goal: float,
            max_percent: float = 200,
            step: float = 10,
            epoch: int = DEFAULT_EPOCH,
            out: str = '-',
    ):
        """
        Find the improvement combinations of two I/O classes that meet an I/O time GOAL (seconds per epoch) and the
        smallest cache rate that suffices for each.
        """
        sweep = self._read_breakdowns(breakdowns)
        grid = explore_grid(sweep, epoch, str(class_a), str(class_b), max_percent, step, goal)
        rows = [
            {
                'imp_a_pct': format_number(imp_a),
                'imp_b_pct': format_number(imp_b),
                'feasible': 'true' if cell.feasible else 'false',
                'min_cache_rate_pct': format_pct(cell.min_cache_rate) if cell.feasible else '',
                'best_time_s': format_seconds(cell.best_time_s),
            }
            for (imp_a, imp_b), cell in grid.cells.items()
        ]
        with _output(out) as f:
            write_csv(rows, GRID_COLUMNS, f)
        console.log(f'{grid.feasible_count()} of {len(grid.cells)} combinations meet {format_number(goal)} s')

    def presets(self):
        """Show the built-in presets."""
        data = []
        for name in preset_names():
            run = get_preset(name)
            procs = run.cluster.total_procs
            gfs_bw = run.cluster.gfs_ost_count * run.storage.ost_read_bw / procs
            lfs_bw = run.storage.ssd_read_bw / (run.cluster.procs_per_node * run.cluster.nodes_per_ssd)
            data.append({
                'preset': name,
                'ranks': procs,
                'files_per_rank': run.dataset.file_count // procs,
                'file_size_kib': run.dataset.file_size_bytes // 1024,
                'gfs_mib_s_per_rank': round(gfs_bw / 2**20, 3),
                'lfs_mib_s_per_rank': round(lfs_bw / 2**20, 3),
                'lfs_gib_per_ssd_full': round(lfs_bytes_per_ssd(run.dataset, run.cluster, 1) / 2**30, 2),
            })
        console.print(rich_table(data, title='built-in presets'))

    def dump_config(self, preset: str, out: str = '-'):
        """Write a preset as a configuration file."""
        contents = json.dumps(get_preset(preset).to_dict(), indent=2) + '\n'
        with _output(out) as f:
            f.write(contents)

    # Internals

    @staticmethod
    def _load_run_config(config: str | None, preset: str | None) -> RunConfig:
        if config is not None and preset is not None:
            raise ConfigError('give either --config or --preset, not both')
        if preset is not None:
            return get_preset(str(preset))
        return load_config(config)

    @staticmethod
    def _mounts(gfs, lfs, config) -> MountMap:
        if gfs is not None or lfs is not None:
            try:
                return MountMap(_split_prefixes(gfs), _split_prefixes(lfs))
            except InvalidArgument as e:
                raise ConfigError(f'mounts: {e}') from None
        if config is not None:
            mounts = load_config(config).mounts
            if mounts is not None:
                return mounts
        raise ConfigError('mounts: give --gfs and --lfs prefixes or a config with a mounts section')

    @staticmethod
    def _trace_files(traces: Iterable[str]) -> list[pathlib.Path]:
        files = []
        for trace in traces:
            path = _existing(trace)
            if path.is_dir():
                files.extend(sorted(path.glob(TRACE_GLOB)))
            else:
                files.append(path)
        if not files:
            raise ConfigError('traces: no trace files given')
        return files

    @staticmethod
    def _cache_rate_of(fn: pathlib.Path, cache_rate) -> Fraction:
        if cache_rate is not None:
            return rate_from_percent(cache_rate)
        if m := TRACE_NAME_RE.search(fn.name):
            return rate_from_percent(m['pct'])
        raise ConfigError(f'cache_rate: {fn.name} does not name its cache rate, pass --cache_rate')

    @staticmethod
    async def _read_trace(fn: pathlib.Path) -> list[IoRecord]:
        try:
            lines = await read_lines(fn)
        except UnicodeDecodeError as e:
            raise _not_utf8(fn.name, e) from None
        try:
            return parse_native_trace(lines)
        except TraceFormatError as e:
            raise TraceFormatError(f'{fn.name}: {e}') from e

    @classmethod
    async def _read_traces(cls, files: list[pathlib.Path]) -> dict[pathlib.Path, list[IoRecord]]:
        try:
            async with asyncio.TaskGroup() as tg:
                tasks = {fn: tg.create_task(cls._read_trace(fn)) for fn in files}
        except BaseExceptionGroup as group:
            # The first failure cancels the remaining reads.
            errors = group.subgroup(ToolkitError)
            if errors is None:
                raise
            raise errors.exceptions[0] from None
        return {fn: task.result() for fn, task in tasks.items()}

    @staticmethod
    async def _write_traces(out: pathlib.Path, sweep):
        async with asyncio.TaskGroup() as tg:
            for (rate, epoch), sim in sweep.items():
                contents = ''.join(format_native_record(r) for r in sim.iter_records())
                tg.create_task(write_text(out / trace_file_name(rate, epoch), contents))

    @staticmethod
    def _read_breakdowns(path) -> SweepResult:
        path = _existing(path)
        try:
            with path.open(encoding='utf-8') as f:
                return read_breakdown_lines(f)
        except UnicodeDecodeError as e:
            raise _not_utf8(path.name, e) from None

    @staticmethod
    def _sweep_table(sweep: SweepResult):
        data = [
            {
                'cache_rate': f'{format_pct(rate)}%',
                'epoch': epoch,
                'slowest_rank': cell.analysis.slowest_rank,
                'bottleneck': str(cell.analysis.dominant_class),
                'total_s': round(cell.analysis.total_s, 3),
            }
            for (rate, epoch), cell in sweep.items()
        ]
        return rich_table(data, title='slowest process per cache rate and epoch')
