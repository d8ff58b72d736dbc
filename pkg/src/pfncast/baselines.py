"""Last, Mean and SeasonalNaive forecasts from the input window alone."""

from __future__ import annotations

import numpy as np

from .series import DatedSeries
from .timebase import Date

ALGORITHMS = ("last", "mean", "seasonal_naive")


def _present(series: DatedSeries) -> np.ndarray:
    values = series.present_values
    if len(values) == 0:
        raise ValueError("input series has no present values")
    return values


def last_forecast(series: DatedSeries, horizon: list[Date]) -> np.ndarray:
    return np.full(len(horizon), _present(series)[-1])


def mean_forecast(series: DatedSeries, horizon: list[Date]) -> np.ndarray:
    return np.full(len(horizon), _present(series).mean())


def seasonal_naive_forecast(
    series: DatedSeries, horizon: list[Date], by_month: bool = False
) -> np.ndarray:
    """Mean of the inputs sharing each horizon date's weekday.

    With ``by_month`` the buckets are calendar months instead, which suits
    monthly grids where every point falls on the same weekday. Empty buckets
    fall back to the overall input mean.
    """
    overall = _present(series).mean()
    key = (lambda d: d.month) if by_month else (lambda d: d.weekday())
    buckets: dict[int, list[float]] = {}
    for d, v, ok in zip(series.dates, series.values, series.present):
        if ok:
            buckets.setdefault(key(d), []).append(v)
    return np.array([np.mean(buckets[key(d)]) if key(d) in buckets else overall for d in horizon])


def forecast(algorithm: str, series: DatedSeries, horizon: list[Date]) -> np.ndarray:
    if algorithm == "last":
        return last_forecast(series, horizon)
    if algorithm == "mean":
        return mean_forecast(series, horizon)
    if algorithm == "seasonal_naive":
        return seasonal_naive_forecast(series, horizon)
    raise ValueError(f"unknown baseline {algorithm!r}; known: {', '.join(ALGORITHMS)}")
