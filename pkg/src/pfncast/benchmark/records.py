"""Result rows: one per (task, algorithm, seed), stored as append-only CSV."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .metrics import METRICS


@dataclass(frozen=True)
class ResultRecord:
    dataset: str
    series_id: str
    algorithm: str
    budget_kind: str
    budget_value: float
    prediction_length: int
    seed: int
    mse: float
    mae: float
    mape: float
    mspe: float
    runtime_seconds: float
    failed: bool

    def metric(self, name: str) -> float:
        if name not in METRICS:
            raise ValueError(f"unknown metric {name!r}")
        return getattr(self, name)

    def config_key(self) -> tuple:
        return (
            self.dataset,
            self.series_id,
            self.prediction_length,
            self.seed,
            self.budget_kind,
            self.budget_value,
        )


COLUMNS = [f.name for f in fields(ResultRecord)]
_TYPES = {f.name: f.type for f in fields(ResultRecord)}


def append_records(path, records) -> None:
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS)
        if new:
            writer.writeheader()
        for record in records:
            row = asdict(record)
            row["failed"] = int(record.failed)
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def _convert(name: str, text: str):
    kind = _TYPES[name]
    if kind in ("float", float):
        return float(text)
    if kind in ("int", int):
        return int(text)
    if kind in ("bool", bool):
        return text.strip().lower() in ("1", "true")
    return text


def read_records(path) -> list[ResultRecord]:
    path = Path(path)
    if not path.exists() or path.stat().st_size == 0:
        return []
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    records = [ResultRecord(**{k: _convert(k, row[k]) for k in COLUMNS}) for row in rows]
    for r in records:
        if not all(math.isfinite(r.metric(m)) for m in METRICS):
            raise ValueError(f"non-finite metric in record {r}")
    return records
