"""Budgeted benchmark harness: datasets, tasks, adapters, metrics and aggregation."""

from .aggregate import aggregate, rank_configuration
from .adapters import Adapter, BaselineAdapter, PFNAdapter, SubprocessAdapter, run_with_time_budget
from .datasets import Dataset, load_dataset
from .metrics import compute_metrics
from .records import ResultRecord, append_records, read_records
from .runner import registry, run_benchmark
from .tasks import EvalTask, build_tasks

__all__ = [
    "Adapter",
    "BaselineAdapter",
    "Dataset",
    "EvalTask",
    "PFNAdapter",
    "ResultRecord",
    "SubprocessAdapter",
    "aggregate",
    "append_records",
    "build_tasks",
    "compute_metrics",
    "load_dataset",
    "rank_configuration",
    "read_records",
    "registry",
    "run_benchmark",
    "run_with_time_budget",
]
