"""Plain containers shared by the model, training and benchmark code."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timebase import Date


@dataclass
class DatedSeries:
    """Univariate series on a date grid with an explicit presence mask."""

    dates: list[Date]
    values: np.ndarray
    present: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.present is None:
            self.present = np.isfinite(self.values)
        else:
            self.present = np.asarray(self.present, dtype=bool) & np.isfinite(self.values)
        if not (len(self.dates) == len(self.values) == len(self.present)):
            raise ValueError("dates, values and mask must share length")

    def __len__(self):
        return len(self.dates)

    def __getitem__(self, item: slice) -> DatedSeries:
        return DatedSeries(self.dates[item], self.values[item], self.present[item])

    @property
    def present_values(self) -> np.ndarray:
        return self.values[self.present]

    @property
    def last_date(self) -> Date:
        return self.dates[-1]


@dataclass
class Task:
    """One forecasting query: an input window and a single future date."""

    input: DatedSeries
    query_date: Date
    target_observed: float = float("nan")
    target_noiseless: float | None = None
    horizon: int = 0

    def __post_init__(self):
        if len(self.input) and not self.query_date > max(self.input.dates):
            raise ValueError("query date must be after every input date")
