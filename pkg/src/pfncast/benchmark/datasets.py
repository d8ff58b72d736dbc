"""Delimited-text dataset loading with daily aggregation of sub-daily rows."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ..series import DatedSeries
from ..timebase import Frequency, date_add


@dataclass
class Dataset:
    name: str
    freq: Frequency
    series: dict[str, DatedSeries] = field(default_factory=dict)


def _timestamp_column(frame: pd.DataFrame, column: str | None) -> str:
    if column is not None:
        return column
    for name in frame.columns:
        if str(name).lower() in ("date", "timestamp", "time", "datetime", "ds"):
            return name
    return frame.columns[0]


def _regular_grid(dates, freq: Frequency) -> bool:
    # offsets from the first date, so month-end grids survive day clamping
    return all(date_add(dates[0], i, freq) == d for i, d in enumerate(dates))


def load_dataset(
    path,
    frequency_hint: Frequency | str = "daily",
    name: str | None = None,
    time_column: str | None = None,
) -> Dataset:
    """Read a CSV-like file into one univariate series per value column.

    Rows are summed per calendar date, so hourly data becomes daily totals and
    duplicate dates merge. Daily data is reindexed onto a gap-free grid with
    absent days masked. Blank cells are masked, not zero.
    """
    path = Path(path)
    freq = Frequency(frequency_hint)
    frame = pd.read_csv(path, sep=None, engine="python")
    tcol = _timestamp_column(frame, time_column)
    try:
        stamps = pd.to_datetime(frame[tcol], errors="raise")
    except (ValueError, TypeError) as exc:
        raise ValueError(f"{path}: unparseable timestamps in column {tcol!r}: {exc}") from exc
    values = frame.drop(columns=[tcol]).apply(pd.to_numeric, errors="coerce")
    if values.shape[1] == 0:
        raise ValueError(f"{path}: no value columns")

    day = stamps.dt.normalize()
    # consecutive-run grouping keeps file order, so out-of-order rows surface
    run = (day != day.shift()).cumsum()
    grouped = values.groupby(run, sort=True).sum(min_count=1)
    days = day.groupby(run, sort=True).first()
    dates = [ts.date() for ts in days]
    if any(b <= a for a, b in zip(dates, dates[1:])):
        raise ValueError(f"{path}: dates are not monotonically increasing after aggregation")

    if freq is Frequency.DAILY:
        full = pd.date_range(days.iloc[0], days.iloc[-1], freq="D")
        grouped = grouped.set_axis(days.values).reindex(full)
        dates = [ts.date() for ts in full]
    elif not _regular_grid(dates, freq):
        raise ValueError(f"{path}: dates do not lie on a regular {freq.value} grid")

    dataset = Dataset(name or path.stem, freq)
    for column in grouped.columns:
        v = grouped[column].to_numpy(dtype=np.float64)
        dataset.series[str(column)] = DatedSeries(list(dates), v, np.isfinite(v))
    return dataset
