"""Evaluation task construction: anchors, data budgets and prediction lengths."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from ..series import DatedSeries
from .datasets import Dataset

log = logging.getLogger(__name__)

INPUT_LENGTH = 36
DEFAULT_ANCHOR = 500
VALIDATION_FRACTION = 0.1


@dataclass(frozen=True)
class EvalTask:
    """Index layout around anchor ``T0`` (0-based positions)::

        train  = [T0 - x + 1, T0]       (x = data budget points)
        input  = [T0 + 1, T0 + L]       (L = input length, 36)
        target = [T0 + L + 1, T0 + L + ell]
    """

    dataset: str
    series_id: str
    series: DatedSeries
    anchor: int
    data_budget: int
    prediction_length: int
    budget_kind: str = "data"
    budget_value: float = 0.0
    input_length: int = INPUT_LENGTH

    @property
    def validation_length(self) -> int:
        return math.ceil(VALIDATION_FRACTION * self.data_budget)

    def train_slice(self) -> DatedSeries:
        """Full budgeted history; the last ``validation_length`` points are the validation part."""
        return self.series[self.anchor - self.data_budget + 1 : self.anchor + 1]

    def fit_slice(self) -> DatedSeries:
        return self.train_slice()[: self.data_budget - self.validation_length]

    def validation_slice(self) -> DatedSeries:
        return self.train_slice()[self.data_budget - self.validation_length :]

    def test_input(self) -> DatedSeries:
        return self.series[self.anchor + 1 : self.anchor + 1 + self.input_length]

    def target_indices(self) -> range:
        first = self.anchor + self.input_length + 1
        return range(first, first + self.prediction_length)

    def targets(self) -> DatedSeries:
        r = self.target_indices()
        return self.series[r.start : r.stop]


def default_anchor(length: int, max_pred_length: int, input_length: int = INPUT_LENGTH) -> int:
    """``DEFAULT_ANCHOR`` when it fits, else the largest feasible anchor (may be negative)."""
    return min(DEFAULT_ANCHOR, length - 1 - input_length - max_pred_length)


def build_tasks(
    dataset: Dataset,
    anchor: int | list[int] | None,
    data_budgets,
    pred_lengths,
    time_budgets=(),
    time_train_points: int = 500,
    input_length: int = INPUT_LENGTH,
) -> list[EvalTask]:
    """Budgets x prediction lengths for every long-enough series.

    Time-budget tasks train on up to ``time_train_points`` of history. With
    several anchors each (series, anchor) pair is its own configuration and
    series ids gain an ``@anchor`` suffix.
    """
    pred_lengths = list(pred_lengths)
    anchors = [anchor] if anchor is None or isinstance(anchor, int) else list(anchor)
    tasks = []
    for sid, series in dataset.series.items():
        for a in anchors:
            label = f"{sid}@{a}" if len(anchors) > 1 else sid
            tasks += _series_tasks(
                dataset.name, label, series, a, data_budgets, pred_lengths, time_budgets, time_train_points, input_length
            )
    return tasks


def _series_tasks(
    dataset, sid, series, anchor, data_budgets, pred_lengths, time_budgets, time_train_points, input_length
) -> list[EvalTask]:
    tasks = []
    max_len = max(pred_lengths)
    t0 = default_anchor(len(series), max_len, input_length) if anchor is None else anchor
    if t0 < 0 or t0 + input_length + max_len > len(series) - 1:
        log.warning("series %s/%s too short (%d points) for anchor %s; skipped", dataset, sid, len(series), t0)
        return tasks
    grid = [("data", float(x), int(x)) for x in data_budgets]
    grid += [("time", float(s), min(time_train_points, t0 + 1)) for s in time_budgets]
    for kind, value, points in grid:
        if points > t0 + 1 or points < 1:
            log.warning("budget %s of %s/%s exceeds available history; skipped", value, dataset, sid)
            continue
        for ell in pred_lengths:
            tasks.append(EvalTask(dataset, sid, series, t0, points, int(ell), kind, value, input_length))
    return tasks
