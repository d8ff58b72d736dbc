"""Per-window value scaling: robust (2-sigma screened, 3-sigma clipped) and min-max."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = 1e-6
CLIP = 3.0


@dataclass(frozen=True)
class ScalerState:
    kind: str
    center: float
    spread: float
    clip_lo: float = -np.inf
    clip_hi: float = np.inf


def _present(values, present_mask) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    mask = np.isfinite(values)
    if present_mask is not None:
        mask &= np.asarray(present_mask, dtype=bool)
    if not mask.any():
        raise ValueError("no present values to fit a scaler on")
    return values[mask]


def fit_robust(values, present_mask=None) -> ScalerState:
    """Moments of the points within two standard deviations of the mean.

    Uses population moments and a single screening pass.
    """
    x = _present(values, present_mask)
    mu0, sd0 = x.mean(), x.std()
    kept = x[np.abs(x - mu0) <= 2.0 * sd0]
    if kept.size == 0:  # rounding can leave no point within 2 * sd0 of a near-constant window
        kept = x
    return ScalerState("robust", float(kept.mean()), max(float(kept.std()), EPS), -CLIP, CLIP)


def fit_minmax(values, present_mask=None) -> ScalerState:
    x = _present(values, present_mask)
    lo, hi = float(x.min()), float(x.max())
    return ScalerState("minmax", lo, max(hi - lo, EPS))


def fit(kind: str, values, present_mask=None) -> ScalerState:
    if kind == "robust":
        return fit_robust(values, present_mask)
    if kind == "minmax":
        return fit_minmax(values, present_mask)
    raise ValueError(f"unknown scaler kind {kind!r}")


def transform(state: ScalerState, values):
    """Scale values; NaN (missing) entries stay NaN."""
    scaled = (np.asarray(values, dtype=np.float64) - state.center) / state.spread
    return np.clip(scaled, state.clip_lo, state.clip_hi)


def inverse(state: ScalerState, scaled):
    return np.asarray(scaled, dtype=np.float64) * state.spread + state.center


def fit_batch(kind: str, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise ``(center, spread)`` for a fully present ``(batch, length)`` array.

    Matches :func:`fit` applied to every row independently.
    """
    values = np.asarray(values, dtype=np.float64)
    if kind == "minmax":
        lo = values.min(axis=1)
        return lo, np.maximum(values.max(axis=1) - lo, EPS)
    if kind != "robust":
        raise ValueError(f"unknown scaler kind {kind!r}")
    mu0 = values.mean(axis=1, keepdims=True)
    sd0 = values.std(axis=1, keepdims=True)
    keep = np.abs(values - mu0) <= 2.0 * sd0
    keep |= ~keep.any(axis=1, keepdims=True)
    n = keep.sum(axis=1)
    center = np.where(keep, values, 0.0).sum(axis=1) / n
    var = np.where(keep, (values - center[:, None]) ** 2, 0.0).sum(axis=1) / n
    return center, np.maximum(np.sqrt(var), EPS)


def transform_batch(kind: str, center, spread, values):
    """Scale ``values`` (``(batch, ...)``) with per-row statistics."""
    values = np.asarray(values, dtype=np.float64)
    shape = (-1,) + (1,) * (values.ndim - 1)
    scaled = (values - np.reshape(center, shape)) / np.reshape(spread, shape)
    if kind == "robust":
        scaled = np.clip(scaled, -CLIP, CLIP)
    return scaled
