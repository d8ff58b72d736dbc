"""Prior fitting: train the forecaster on sliding-window tasks from synthetic series."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from . import scaling
from .model import ModelConfig, PFNModel, task_arrays
from .prior import PriorHyperparams, extend, generate_series, random_start, series_rng
from .series import Task
from .timebase import Frequency, date_add, normalize_raw, raw_feature_matrix

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 128
    steps_per_epoch: int = 200
    epochs: int = 20
    noise_removal: bool = True
    scaler_kind: str = "robust"
    m_noise_scale: float = 1.0
    seed: int = 0
    series_per_freq: int = 2000
    series_length: int = 200
    window: int = 100
    max_horizon: int = 10
    # Each batch uses the most recent L points of its windows, L uniform in
    # [min_context, window]; min_context == window trains on full windows only.
    min_context: int = 36
    val_fraction: float = 0.05
    val_noise_scale: float = 1.0
    val_tasks: int = 1024
    val_context: int = 36
    freqs: tuple[str, ...] = ("daily", "weekly", "monthly")

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.series_length < self.window:
            raise ValueError(
                f"series length {self.series_length} is shorter than the task window {self.window}"
            )
        if not 1 <= self.min_context <= self.window:
            raise ValueError("min_context must lie in [1, window]")
        if self.scaler_kind not in ("robust", "minmax"):
            raise ValueError(f"unknown scaler kind {self.scaler_kind!r}")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    def rows(self):
        return [
            {"epoch": i + 1, "train_loss": t, "val_loss": v, "seconds": s}
            for i, (t, v, s) in enumerate(zip(self.train_loss, self.val_loss, self.seconds))
        ]


def loss_divisor(scaled_inputs) -> np.ndarray:
    """``max(1, max |x|)^2`` over the last axis of the scaled inputs."""
    return np.maximum(1.0, np.max(np.abs(scaled_inputs), axis=-1)) ** 2


def task_loss(
    model: PFNModel, task: Task, scaler_kind: str = "robust", noise_removal: bool = True
) -> torch.Tensor:
    """Scaled squared error of a single task, differentiable w.r.t. the model."""
    if noise_removal:
        if task.target_noiseless is None:
            raise ValueError("noise removal needs a noiseless target")
        target = task.target_noiseless
    else:
        target = task.target_observed
    state = scaling.fit(scaler_kind, task.input.values, task.input.present)
    feats, values, query = task_arrays(task, state)
    y = float(scaling.transform(state, target))
    dt = model.dtype
    pred = model(
        torch.as_tensor(feats[None], dtype=dt),
        torch.as_tensor(values[None], dtype=dt),
        torch.as_tensor(query[None], dtype=dt),
    )[0]
    return (pred - y) ** 2 / float(loss_divisor(values))


class SeriesBank:
    """Pre-rendered synthetic series with ``max_horizon`` hidden extra steps each.

    Columns ``[0, length)`` are the series proper; the tail only ever serves
    as query targets.
    """

    def __init__(self, raw_feats, observed, underlying, length: int):
        self.raw_feats = raw_feats  # (n, length + h, 5) int
        self.observed = observed  # (n, length + h)
        self.underlying = underlying
        self.length = length

    def __len__(self):
        return len(self.observed)

    @classmethod
    def generate(
        cls,
        hyper: PriorHyperparams,
        freqs,
        series_per_freq: int,
        length: int,
        max_horizon: int,
        root_seed: int,
        indices=None,
        noise_scale_for=None,
    ) -> SeriesBank:
        """Render series ``indices`` of each frequency (default: all of them).

        ``noise_scale_for(index)`` may override the noise scale per series.
        """
        feats, obs, und = [], [], []
        for fi, freq in enumerate(freqs):
            freq = Frequency(freq)
            for i in range(series_per_freq) if indices is None else indices:
                gid = fi * series_per_freq + i
                h = hyper
                if noise_scale_for is not None:
                    h = PriorHyperparams(**{**hyper.__dict__, "m_noise_scale": noise_scale_for(i)})
                rng = series_rng(root_seed, gid)
                start = random_start(freq, rng)
                s = generate_series(h, freq, start, length, rng)
                tail_u, tail_y = extend(s, max_horizon, rng)
                dates = s.dates + [date_add(start, length + j, freq) for j in range(max_horizon)]
                feats.append(raw_feature_matrix(dates).astype(np.int32))
                obs.append(np.concatenate([s.observed, tail_y]))
                und.append(np.concatenate([s.underlying, tail_u]))
        return cls(np.stack(feats), np.stack(obs), np.stack(und), length)

    def batch(
        self,
        series_idx: np.ndarray,
        window_end: np.ndarray,
        horizon: np.ndarray,
        context: int,
        scaler_kind: str,
        noise_removal: bool,
        with_stats: bool = False,
    ):
        """Vectorized equivalent of building :class:`Task` objects and scaling them.

        Returns ``(feats, scaled_inputs, query_feats, scaled_target, divisor)``,
        followed by the per-row ``(center, spread)`` when ``with_stats``.
        """
        cols = window_end[:, None] + np.arange(-context + 1, 1)[None, :]
        rows = series_idx[:, None]
        inputs = self.observed[rows, cols]
        raw = self.raw_feats[rows, cols]
        q = window_end + horizon
        ref_year = raw[:, -1, 0]
        feats = normalize_raw(raw, ref_year[:, None])
        query = normalize_raw(self.raw_feats[series_idx, q], ref_year)
        target = (self.underlying if noise_removal else self.observed)[series_idx, q]
        center, spread = scaling.fit_batch(scaler_kind, inputs)
        x = scaling.transform_batch(scaler_kind, center, spread, inputs)
        y = scaling.transform_batch(scaler_kind, center, spread, target)
        if with_stats:
            return feats, x, query, y, loss_divisor(x), center, spread
        return feats, x, query, y, loss_divisor(x)


def batch_loss(model: PFNModel, arrays) -> torch.Tensor:
    feats, x, query, y, divisor = arrays
    dt = model.dtype
    pred = model(torch.as_tensor(feats, dtype=dt), torch.as_tensor(x, dtype=dt), torch.as_tensor(query, dtype=dt))
    err = (pred - torch.as_tensor(y, dtype=dt)) ** 2 / torch.as_tensor(divisor, dtype=dt)
    return err.mean()


def _split_indices(series_per_freq: int, val_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    # every k-th series index is held out, in each frequency
    every = max(1, int(round(1.0 / val_fraction))) if val_fraction > 0 else 0
    idx = np.arange(series_per_freq)
    val_mask = (idx % every == 0) if every else np.zeros(series_per_freq, bool)
    return idx[~val_mask], idx[val_mask]


@dataclass
class ValidationSet:
    bank: SeriesBank
    series_idx: np.ndarray
    window_end: np.ndarray
    horizon: np.ndarray
    context: int

    def loss(self, model: PFNModel, scaler_kind: str, chunk: int = 256) -> float:
        """Mean loss against observed (noisy) targets, parameters frozen.

        Errors are measured in robust-scaled units whatever scaler the model
        uses, so losses of differently scaled models are comparable.
        """
        total, n = 0.0, len(self.series_idx)
        dt = model.dtype
        with torch.no_grad():
            for lo in range(0, n, chunk):
                sl = slice(lo, lo + chunk)
                args = (self.series_idx[sl], self.window_end[sl], self.horizon[sl], self.context)
                feats, x, query, _, _, center, spread = self.bank.batch(*args, scaler_kind, False, with_stats=True)
                pred = model(torch.as_tensor(feats, dtype=dt), torch.as_tensor(x, dtype=dt), torch.as_tensor(query, dtype=dt))
                pred = pred.double().numpy() * spread + center
                _, _, _, y_r, div_r, center_r, spread_r = self.bank.batch(*args, "robust", False, with_stats=True)
                err = ((pred - center_r) / spread_r - y_r) ** 2 / div_r
                total += float(err.sum())
        return total / n


def _sample_tasks(bank: SeriesBank, n: int, window: int, max_horizon: int, rng) -> tuple[np.ndarray, ...]:
    n_windows = bank.length - window + 1
    flat = rng.choice(len(bank) * n_windows, size=n, replace=len(bank) * n_windows < n)
    series_idx, start = np.divmod(flat, n_windows)
    return series_idx, start + window - 1, rng.integers(1, max_horizon + 1, size=n)


def build_data(train_config: TrainConfig, prior_hyper: PriorHyperparams) -> tuple[SeriesBank, ValidationSet]:
    tc = train_config
    hyper = PriorHyperparams(**{**prior_hyper.__dict__, "m_noise_scale": tc.m_noise_scale})
    train_idx, val_idx = _split_indices(tc.series_per_freq, tc.val_fraction)
    common = dict(
        freqs=tc.freqs,
        series_per_freq=tc.series_per_freq,
        length=tc.series_length,
        max_horizon=tc.max_horizon,
        root_seed=tc.seed,
    )
    train_bank = SeriesBank.generate(hyper, indices=train_idx, **common)
    val_bank = SeriesBank.generate(
        hyper, indices=val_idx, noise_scale_for=lambda i: tc.val_noise_scale, **common
    )
    rng = np.random.default_rng([tc.seed, 7])
    val = ValidationSet(
        val_bank,
        *_sample_tasks(val_bank, tc.val_tasks, tc.window, tc.max_horizon, rng),
        context=min(tc.val_context, tc.window),
    )
    return train_bank, val


def train(
    model_config: ModelConfig,
    train_config: TrainConfig,
    prior_hyper: PriorHyperparams | None = None,
    data: tuple[SeriesBank, ValidationSet] | None = None,
    on_epoch=None,
) -> tuple[PFNModel, TrainHistory]:
    """Fit a fresh model; deterministic for a fixed ``train_config.seed``."""
    tc = train_config
    prior_hyper = prior_hyper or PriorHyperparams()
    torch.manual_seed(tc.seed)
    model = PFNModel(model_config, seed=tc.seed)
    bank, val = data if data is not None else build_data(tc, prior_hyper)
    optimizer = torch.optim.Adam(model.parameters(), lr=tc.learning_rate, betas=(0.9, 0.999), eps=1e-8)
    history = TrainHistory()
    started = time.perf_counter()

    for epoch in range(tc.epochs):
        rng = np.random.default_rng([tc.seed, 11, epoch])
        n = tc.steps_per_epoch * tc.batch_size
        series_idx, window_end, horizon = _sample_tasks(bank, n, tc.window, tc.max_horizon, rng)
        contexts = rng.integers(tc.min_context, tc.window + 1, size=tc.steps_per_epoch)
        model.train()
        losses = []
        for step in range(tc.steps_per_epoch):
            sl = slice(step * tc.batch_size, (step + 1) * tc.batch_size)
            arrays = bank.batch(
                series_idx[sl], window_end[sl], horizon[sl], int(contexts[step]), tc.scaler_kind, tc.noise_removal
            )
            loss = batch_loss(model, arrays)
            if not torch.isfinite(loss):
                raise TrainingDiverged(f"non-finite training loss at epoch {epoch + 1}, step {step + 1}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
        model.eval()
        history.train_loss.append(float(np.mean(losses)))
        history.val_loss.append(val.loss(model, tc.scaler_kind) if len(val.series_idx) else float("nan"))
        history.seconds.append(time.perf_counter() - started)
        log.info(
            "epoch %d/%d train %.5f val %.5f (%.0fs)",
            epoch + 1, tc.epochs, history.train_loss[-1], history.val_loss[-1], history.seconds[-1],
        )
        if on_epoch is not None:
            on_epoch(epoch, model, history)
    return model, history


def fit_tasks(
    model: PFNModel,
    tasks: list[Task],
    steps: int,
    learning_rate: float = 1e-3,
    scaler_kind: str = "robust",
    noise_removal: bool = True,
) -> list[float]:
    """Full-batch Adam on a fixed task list; returns the loss before each step."""
    if not tasks:
        raise ValueError("no tasks")
    arrays = stack_tasks(tasks, scaler_kind, noise_removal)
    optimizer = torch.optim.Adam(model.parameters(), lr=learning_rate, betas=(0.9, 0.999), eps=1e-8)
    losses = []
    for _ in range(steps):
        loss = batch_loss(model, arrays)
        if not torch.isfinite(loss):
            raise TrainingDiverged("non-finite loss while fitting tasks")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        losses.append(loss.item())
    return losses


def fixed_noiseless_tasks(n_tasks: int = 32, seed: int = 0, window: int = 36, n_series: int = 8) -> list[Task]:
    """A fixed set of noise-free daily tasks for overfitting smoke checks."""
    from .prior import make_tasks

    hyper = PriorHyperparams(m_noise_scale=0.0)
    pool = []
    for i in range(n_series):
        rng = series_rng(seed, i)
        s = generate_series(hyper, Frequency.DAILY, random_start(Frequency.DAILY, rng), window + 24, rng)
        pool += make_tasks(s, window, 10, rng)
    pick = np.random.default_rng(seed).choice(len(pool), min(n_tasks, len(pool)), replace=False)
    return [pool[i] for i in pick]


def stack_tasks(tasks: list[Task], scaler_kind: str = "robust", noise_removal: bool = True):
    """Batch arrays for fully present tasks of equal input length."""
    rows = []
    for task in tasks:
        target = task.target_noiseless if noise_removal else task.target_observed
        if target is None:
            raise ValueError("noise removal needs a noiseless target")
        state = scaling.fit(scaler_kind, task.input.values, task.input.present)
        feats, x, query = task_arrays(task, state)
        rows.append((feats, x, query, float(scaling.transform(state, target))))
    feats, x, query, y = (np.stack([r[i] for r in rows]) for i in range(4))
    return feats, x, query, y, loss_divisor(x)
