import logging
import pathlib
from collections.abc import (
    Iterable,
    Mapping,
)
from fractions import Fraction
from typing import (
    Any,
    TextIO,
)

import pandas as pd
import stringcase
from aiopath import AsyncPath
from rich.highlighter import ReprHighlighter
from rich.protocol import is_renderable
from rich.table import Table

from tier_io.errors import InvalidArgument

logger = logging.getLogger(__name__)

_hl = ReprHighlighter()


def hl(obj):
    return _hl(str(obj))


def rich_table(data: list[dict[str, Any]], title: str | None = None):
    if not data:
        raise ValueError
    columns = data[0].keys()
    table = Table(title=stringcase.sentencecase(title) if title else None)
    for column in columns:
        table.add_column(stringcase.sentencecase(column))
    for row in data:
        table.add_row(*((v if is_renderable(v) else hl(v)) for v in row.values()))
    return table


def as_rate(value) -> Fraction:
    """
    Convert a cache rate to an exact rational. Floats go through their shortest decimal text, so that 0.65
    means 65/100 and not the nearest binary fraction.
    """
    if isinstance(value, bool):
        raise InvalidArgument(f'not a rate: {value!r}')
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError:
            raise InvalidArgument(f'not a number: {value!r}') from None
    raise InvalidArgument(f'not a rate: {value!r}')


def rate_from_percent(value) -> Fraction:
    return as_rate(value) / 100


def format_pct(rate: Fraction) -> str:
    pct = rate * 100
    if pct.denominator == 1:
        return str(pct.numerator)
    return f'{float(pct):.9g}'


def format_number(value) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return f'{value:.9g}' if isinstance(value, float) else str(value)


def format_seconds(seconds: float) -> str:
    return f'{seconds:.9f}'


def write_csv(rows: Iterable[Mapping[str, str]], columns: list[str], out: str | pathlib.Path | TextIO) -> None:
    frame = pd.DataFrame(list(rows), columns=columns, dtype=str)
    frame.to_csv(out, index=False, lineterminator='\n')
    logger.debug('Wrote %d CSV rows', len(frame))


async def read_lines(fn: pathlib.Path) -> list[str]:
    async with AsyncPath(fn).open('r', encoding='utf-8') as f:
        lines = await f.readlines()
    logger.debug('Read %d lines from %s', len(lines), fn.name)
    return lines


async def write_text(fn: pathlib.Path, contents: str) -> None:
    async with AsyncPath(fn).open('w', encoding='utf-8', newline='\n') as f:
        await f.write(contents)
    logger.debug('Wrote %d bytes to %s', len(contents), fn.name)
