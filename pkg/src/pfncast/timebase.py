"""Calendar arithmetic and date features used to tokenize timestamps."""

from __future__ import annotations

import calendar
import datetime as _dt
import enum
from dataclasses import dataclass

import numpy as np

Date = _dt.date

N_TIME_FEATURES = 5


class Frequency(str, enum.Enum):
    DAILY = "daily"
    WEEKLY = "weekly"
    MONTHLY = "monthly"

    @property
    def unit_days(self) -> float:
        """Length of one time step in days."""
        return _UNIT_DAYS[self]


_UNIT_DAYS = {Frequency.DAILY: 1.0, Frequency.WEEKLY: 7.0, Frequency.MONTHLY: 30.5}


@dataclass(frozen=True)
class TimeFeatures:
    year: int
    month: int
    day: int
    day_of_week: int  # 0 = Monday
    day_of_year: int


def make_date(year: int, month: int, day: int) -> Date:
    """Build a validated date; raises ValueError on impossible dates."""
    return _dt.date(year, month, day)


def parse_date(text: str) -> Date:
    return _dt.date.fromisoformat(text.strip()[:10])


def features_of(date: Date) -> TimeFeatures:
    if not isinstance(date, _dt.date):
        raise ValueError(f"not a date: {date!r}")
    if isinstance(date, _dt.datetime):
        date = date.date()
    return TimeFeatures(
        year=date.year,
        month=date.month,
        day=date.day,
        day_of_week=date.weekday(),
        day_of_year=date.timetuple().tm_yday,
    )


def _add_months(date: Date, n: int) -> Date:
    index = date.year * 12 + (date.month - 1) + n
    year, month0 = divmod(index, 12)
    last = calendar.monthrange(year, month0 + 1)[1]
    return _dt.date(year, month0 + 1, min(date.day, last))


def date_add(date: Date, n: int, freq: Frequency | str) -> Date:
    """Advance ``date`` by ``n`` steps of ``freq``.

    Monthly steps keep the day of month, clamped to the end of the target
    month. The clamp is applied relative to ``date`` so that
    ``date_add(d, a + b, monthly)`` never drifts the way repeated single
    steps through February would.
    """
    freq = Frequency(freq)
    if n < 0:
        raise ValueError("n must be non-negative")
    if freq is Frequency.DAILY:
        return date + _dt.timedelta(days=n)
    if freq is Frequency.WEEKLY:
        return date + _dt.timedelta(days=7 * n)
    return _add_months(date, n)


def date_range(start: Date, length: int, freq: Frequency | str) -> list[Date]:
    return [date_add(start, i, freq) for i in range(length)]


def normalize_features(tf: TimeFeatures, reference_year: int) -> np.ndarray:
    return np.array(
        [
            (tf.year - reference_year) / 10.0,
            tf.month / 12.0,
            tf.day / 31.0,
            tf.day_of_week / 7.0,
            tf.day_of_year / 366.0,
        ]
    )


def raw_feature_matrix(dates) -> np.ndarray:
    """Integer feature rows ``(year, month, day, dow, doy)`` for many dates."""
    out = np.empty((len(dates), N_TIME_FEATURES), dtype=np.int64)
    for i, d in enumerate(dates):
        tf = features_of(d)
        out[i] = (tf.year, tf.month, tf.day, tf.day_of_week, tf.day_of_year)
    return out


_FEATURE_SCALE = np.array([10.0, 12.0, 31.0, 7.0, 366.0])


def normalize_raw(raw: np.ndarray, reference_year) -> np.ndarray:
    """Vectorized :func:`normalize_features` over the last axis of ``raw``.

    ``reference_year`` broadcasts against ``raw[..., 0]``.
    """
    out = raw.astype(np.float64)
    out[..., 0] = out[..., 0] - np.asarray(reference_year, dtype=np.float64)
    return out / _FEATURE_SCALE
