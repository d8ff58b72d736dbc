"""Run every task of a benchmark grid through every registered algorithm."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

from .. import baselines
from .adapters import Adapter, BaselineAdapter, PFNAdapter, SubprocessAdapter, run_with_time_budget
from .metrics import compute_metrics
from .records import ResultRecord
from .tasks import EvalTask

log = logging.getLogger(__name__)

AdapterFactory = Callable[[int], Adapter]


def registry(weights=None, subprocess_adapters=()) -> dict[str, AdapterFactory]:
    """Known algorithm names mapped to ``seed -> Adapter`` factories."""
    reg: dict[str, AdapterFactory] = {name: (lambda seed, n=name: BaselineAdapter(n)) for name in baselines.ALGORITHMS}
    if weights is not None:
        adapter = PFNAdapter(weights)
        reg["pfn"] = lambda seed: adapter
    for name, command in subprocess_adapters:
        reg[name] = lambda seed, n=name, c=command: SubprocessAdapter(n, list(c), seed)
    return reg


def evaluate_task(task: EvalTask, name: str, adapter: Adapter, seed: int) -> ResultRecord | None:
    targets = task.targets()
    if not targets.present.any():
        log.warning("no observed targets for %s/%s; skipped", task.dataset, task.series_id)
        return None
    budget = task.budget_value if task.budget_kind == "time" else None
    try:
        pred, runtime, failed = run_with_time_budget(
            adapter, task.fit_slice(), task.validation_slice(), task.test_input(), targets.dates, budget
        )
    finally:
        adapter.close()
    metrics = compute_metrics(pred[targets.present], targets.values[targets.present])
    return ResultRecord(
        dataset=task.dataset,
        series_id=task.series_id,
        algorithm=name,
        budget_kind=task.budget_kind,
        budget_value=float(task.budget_value),
        prediction_length=task.prediction_length,
        seed=seed,
        runtime_seconds=float(runtime),
        failed=bool(failed),
        **metrics,
    )


def run_benchmark(
    tasks: list[EvalTask],
    algorithms: dict[str, AdapterFactory],
    seeds=(0,),
    workers: int = 1,
    parallel_time: bool = False,
) -> list[ResultRecord]:
    """Records in task x seed x algorithm order.

    With ``workers > 1`` data-budget runs go to a thread pool. Time-budget
    runs stay serial, on an uncontended core, unless ``parallel_time``.
    """
    jobs = [(task, seed, name) for task in tasks for seed in seeds for name in algorithms]

    def run(job):
        task, seed, name = job
        return evaluate_task(task, name, algorithms[name](seed), seed)

    results: list[ResultRecord | None] = [None] * len(jobs)
    pooled = [i for i, (t, _, _) in enumerate(jobs) if workers > 1 and (parallel_time or t.budget_kind != "time")]
    if pooled:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, record in zip(pooled, pool.map(run, [jobs[i] for i in pooled])):
                results[i] = record
    done = set(pooled)
    for i, job in enumerate(jobs):
        if i not in done:
            results[i] = run(job)
    return [r for r in results if r is not None]
