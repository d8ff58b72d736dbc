"""Synthetic series prior: trend x seasonality x multiplicative Weibull noise.

A series is ``y_t = trend(t) * seasonal(t) * z_t`` where ``t`` counts
steps of the series frequency from 0. The noiseless product is kept
separately from the noise factor so training can target it directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .series import DatedSeries, Task
from .timebase import Date, Frequency, date_add, make_date

SEASONS = ("week", "month", "year")


@dataclass(frozen=True)
class PriorHyperparams:
    mu_m: float = -0.01
    sigma_m: float = 0.5
    sigma_lin: float = 0.01
    sigma_exp: float = 0.005
    m_noise_scale: float = 1.0
    weibull_k: float = 2.0

    def __post_init__(self):
        if min(self.sigma_m, self.sigma_lin, self.sigma_exp) < 0:
            raise ValueError("prior standard deviations must be non-negative")
        if self.weibull_k <= 0:
            raise ValueError("weibull_k must be positive")
        if self.m_noise_scale < 0:
            raise ValueError("m_noise_scale must be non-negative")


@dataclass(frozen=True)
class SeasonSpec:
    component: str
    period: float
    amplitude_range: tuple[float, float]

    def __post_init__(self):
        lo, hi = self.amplitude_range
        if self.period <= 0 or not 0 <= lo <= hi:
            raise ValueError(f"bad season spec {self}")

    @property
    def n_harmonics(self) -> int:
        return int(math.floor(self.period / 2))


# Periods are in units of the series' own time step.
SEASON_TABLE: dict[Frequency, tuple[SeasonSpec, ...]] = {
    Frequency.DAILY: (
        SeasonSpec("week", 7.0, (0.0, 1.0)),
        SeasonSpec("month", 30.5, (0.0, 0.2)),
    ),
    Frequency.WEEKLY: (
        SeasonSpec("month", 2.0, (0.0, 0.3)),
        SeasonSpec("year", 52.0, (0.0, 0.1)),
    ),
    Frequency.MONTHLY: (SeasonSpec("year", 12.0, (0.0, 0.5)),),
}


@dataclass
class Season:
    component: str
    period: float
    amplitude: float
    sin_coefs: np.ndarray
    cos_coefs: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.amplitude == 0.0 or len(self.sin_coefs) == 0:
            return np.ones_like(t)
        f = np.arange(1, len(self.sin_coefs) + 1)
        angle = 2.0 * np.pi * np.multiply.outer(t, f) / self.period
        wave = np.sin(angle) @ self.sin_coefs + np.cos(angle) @ self.cos_coefs
        return 1.0 + self.amplitude * wave


@dataclass
class SeriesParams:
    m_lin: float
    c_lin: float
    m_exp: float
    c_exp: float
    m_noise: float
    weibull_k: float
    seasons: list[Season] = field(default_factory=list)

    def season(self, component: str) -> Season | None:
        for s in self.seasons:
            if s.component == component:
                return s
        return None

    def amplitude(self, component: str) -> float:
        s = self.season(component)
        return 0.0 if s is None else s.amplitude


def _unit_coefficients(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    scale = 1.0 / np.arange(1, n + 1)
    c = rng.normal(0.0, scale)
    d = rng.normal(0.0, scale)
    norm = math.sqrt(float(np.sum(c * c) + np.sum(d * d)))
    if norm == 0.0:
        c[0], norm = 1.0, 1.0
    return c / norm, d / norm


def sample_series_params(
    hyper: PriorHyperparams,
    freq: Frequency | str,
    rng: np.random.Generator,
    season_table: dict | None = None,
) -> SeriesParams:
    freq = Frequency(freq)
    m_lin = rng.normal(hyper.mu_m, hyper.sigma_m)
    m_exp = rng.normal(hyper.mu_m, hyper.sigma_m)
    c_lin = rng.normal(0.0, hyper.sigma_lin)
    c_exp = rng.normal(1.0, hyper.sigma_exp)
    while c_exp <= 0.0:
        c_exp = rng.normal(1.0, hyper.sigma_exp)

    seasons = []
    for spec in (season_table or SEASON_TABLE)[freq]:
        lo, hi = spec.amplitude_range
        amplitude = rng.uniform(lo, hi)
        c, d = _unit_coefficients(spec.n_harmonics, rng)
        seasons.append(Season(spec.component, spec.period, amplitude, c, d))

    return SeriesParams(
        m_lin=float(m_lin),
        c_lin=float(c_lin),
        m_exp=float(m_exp),
        c_exp=float(c_exp),
        m_noise=hyper.m_noise_scale,
        weibull_k=hyper.weibull_k,
        seasons=seasons,
    )


def trend_at(params: SeriesParams, t):
    t = np.asarray(t, dtype=np.float64)
    return (1.0 + params.m_lin * t + params.c_lin) * (params.m_exp * params.c_exp**t)


def seasonal_at(params: SeriesParams, t):
    out = np.ones_like(np.asarray(t, dtype=np.float64))
    for season in params.seasons:
        out = out * season(t)
    return out


def underlying_at(params: SeriesParams, t):
    return trend_at(params, t) * seasonal_at(params, t)


def weibull_inverse(u, k: float):
    """Weibull(scale 1, shape k) quantile of ``1 - u``: ``(-ln u)^(1/k)``."""
    return (-np.log(u)) ** (1.0 / k)


def noise_from_uniform(params: SeriesParams, u):
    z = weibull_inverse(u, params.weibull_k)
    z_bar = math.log(2.0) ** (1.0 / params.weibull_k)
    return 1.0 + params.m_noise * (z - z_bar)


def noise_draw(params: SeriesParams, rng: np.random.Generator, size=None):
    # 1 - random() lies in (0, 1], keeping -log finite
    u = 1.0 - rng.random(size)
    return noise_from_uniform(params, u)


@dataclass
class SyntheticSeries:
    start_date: Date
    freq: Frequency
    dates: list[Date]
    underlying: np.ndarray
    noise: np.ndarray
    observed: np.ndarray
    params: SeriesParams | None = None

    def __len__(self):
        return len(self.dates)


def generate_series(
    hyper: PriorHyperparams,
    freq: Frequency | str,
    start: Date,
    length: int,
    rng: np.random.Generator,
) -> SyntheticSeries:
    if length < 1:
        raise ValueError("length must be >= 1")
    freq = Frequency(freq)
    params = sample_series_params(hyper, freq, rng)
    t = np.arange(length, dtype=np.float64)
    underlying = underlying_at(params, t)
    noise = noise_draw(params, rng, length)
    return SyntheticSeries(
        start_date=start,
        freq=freq,
        dates=[date_add(start, i, freq) for i in range(length)],
        underlying=underlying,
        noise=noise,
        observed=underlying * noise,
        params=params,
    )


def series_rng(root_seed: int, index: int) -> np.random.Generator:
    """Independent stream for series ``index``; order of generation is irrelevant."""
    return np.random.default_rng([int(root_seed), int(index)])


START_RANGE = (make_date(1990, 1, 1), make_date(2020, 12, 31))


def random_start(freq: Frequency, rng: np.random.Generator) -> Date:
    lo, hi = START_RANGE
    d = lo.fromordinal(lo.toordinal() + int(rng.integers(0, (hi - lo).days + 1)))
    if freq is Frequency.MONTHLY:
        d = d.replace(day=min(d.day, 28))
    return d


def extend(series: SyntheticSeries, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Render ``n`` further steps past the end: ``(underlying, observed)``."""
    if series.params is None:
        raise ValueError("series has no generating parameters to extend with")
    t = np.arange(len(series), len(series) + n, dtype=np.float64)
    underlying = underlying_at(series.params, t)
    return underlying, underlying * noise_draw(series.params, rng, n)


def make_tasks(
    series: SyntheticSeries,
    window: int = 100,
    max_horizon: int = 10,
    rng: np.random.Generator | None = None,
) -> list[Task]:
    """Sliding-window tasks with stride 1, one random-offset query per window.

    Queries that fall past the rendered end of ``series`` are evaluated from
    its generating parameters, so a length-200 series still yields 101 tasks.
    """
    n = len(series)
    if n < window:
        raise ValueError(f"series of length {n} is shorter than window {window}")
    if rng is None:
        rng = np.random.default_rng(0)
    tail_u, tail_y = extend(series, max_horizon, rng) if series.params is not None else (None, None)

    tasks = []
    for start in range(n - window + 1):
        end = start + window - 1
        h = int(rng.integers(1, max_horizon + 1))
        q = end + h
        if q < n:
            noiseless, observed = series.underlying[q], series.observed[q]
        elif tail_u is not None:
            noiseless, observed = tail_u[q - n], tail_y[q - n]
        else:
            raise ValueError("query beyond series end and no parameters to extend")
        tasks.append(
            Task(
                input=DatedSeries(series.dates[start : end + 1], series.observed[start : end + 1]),
                query_date=date_add(series.start_date, q, series.freq),
                target_observed=float(observed),
                target_noiseless=float(noiseless),
                horizon=h,
            )
        )
    return tasks
