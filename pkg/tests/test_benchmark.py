import sys
import textwrap
import time

import numpy as np
import pytest

from conftest import daily_series
from pfncast.benchmark import (
    Adapter,
    BaselineAdapter,
    EvalTask,
    ResultRecord,
    SubprocessAdapter,
    aggregate,
    append_records,
    build_tasks,
    compute_metrics,
    load_dataset,
    rank_configuration,
    read_records,
    registry,
    run_benchmark,
    run_with_time_budget,
)
from pfncast.benchmark.adapters import decode_series, parse_subprocess_spec
from pfncast.benchmark.datasets import Dataset
from pfncast.benchmark.report import build_tables, write_report
from pfncast.benchmark.runner import evaluate_task
from pfncast.benchmark.synthetic import evaluate_holdout, synthetic_holdout
from pfncast.benchmark.tasks import default_anchor
from pfncast.timebase import Frequency, make_date

# -- loading -----------------------------------------------------------------


def test_hourly_rows_sum_to_days(tmp_path):
    path = tmp_path / "hourly.csv"
    start = np.datetime64("2021-05-01T00:00")
    rows = [f"{start + np.timedelta64(h, 'h')},1" for h in range(48)]
    path.write_text("date,load\n" + "\n".join(rows) + "\n")
    ds = load_dataset(path, "daily")
    s = ds.series["load"]
    assert s.values.tolist() == [24.0, 24.0]
    assert s.dates == [make_date(2021, 5, 1), make_date(2021, 5, 2)]
    assert ds.name == "hourly" and ds.freq is Frequency.DAILY


def test_columns_become_series_and_duplicates_sum(tmp_path):
    path = tmp_path / "multi.csv"
    path.write_text(
        "timestamp;a;b;c\n2020-01-01;1;2;3\n2020-01-01;1;2;3\n2020-01-02;5;;7\n2020-01-04;1;1;1\n"
    )
    ds = load_dataset(path, "daily")
    assert sorted(ds.series) == ["a", "b", "c"]
    a, b = ds.series["a"], ds.series["b"]
    assert a.values[0] == 2.0 and b.values[0] == 4.0
    # blank cell and the absent 3rd of January are masked, not zero
    assert b.present.tolist() == [True, False, False, True]
    assert len(a) == 4 and not a.present[2]


def test_loader_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("date,x\nnot-a-date,1\n")
    with pytest.raises(ValueError):
        load_dataset(bad)
    backwards = tmp_path / "backwards.csv"
    backwards.write_text("date,x\n2020-01-02,1\n2020-01-01,1\n")
    with pytest.raises(ValueError):
        load_dataset(backwards)
    irregular = tmp_path / "irregular.csv"
    irregular.write_text("date,x\n2020-01-01,1\n2020-02-01,1\n2020-04-01,1\n")
    with pytest.raises(ValueError):
        load_dataset(irregular, "monthly")
    monthly = tmp_path / "monthly.csv"
    monthly.write_text("date,x\n2020-01-31,1\n2020-02-29,2\n2020-03-31,3\n")
    assert load_dataset(monthly, "monthly").series["x"].values.tolist() == [1.0, 2.0, 3.0]


# -- tasks -------------------------------------------------------------------


def series_of(n, start=make_date(2015, 1, 1)):
    return daily_series(np.arange(n, dtype=float), start=start)


def dataset_of(*lengths):
    return Dataset("toy", Frequency.DAILY, {f"s{i}": series_of(n) for i, n in enumerate(lengths)})


def test_grid_size_and_layout():
    tasks = build_tasks(dataset_of(600), 500, [50, 500], [6, 48])
    assert len(tasks) == 4
    t = next(t for t in tasks if t.data_budget == 50 and t.prediction_length == 6)
    assert t.validation_length == 5
    assert list(t.target_indices()) == list(range(537, 543))
    assert t.test_input().values.tolist() == list(range(501, 537))
    assert t.train_slice().values.tolist() == list(range(451, 501))
    assert t.fit_slice().values.tolist() == list(range(451, 496))
    assert t.validation_slice().values.tolist() == list(range(496, 501))
    assert t.targets().values.tolist() == list(range(537, 543))


def test_short_series_skipped_with_warning(caplog):
    tasks = build_tasks(dataset_of(600, 40), None, [50], [6])
    assert {t.series_id for t in tasks} == {"s0"}
    assert "too short" in caplog.text


def test_default_anchor():
    assert default_anchor(1000, 48) == 500
    assert default_anchor(300, 48) == 300 - 1 - 36 - 48


def test_multiple_anchors_are_separate_configurations():
    tasks = build_tasks(dataset_of(700), [400, 500], [50], [6])
    assert sorted(t.series_id for t in tasks) == ["s0@400", "s0@500"]


def test_time_budget_tasks():
    tasks = build_tasks(dataset_of(700), 500, [], [6], time_budgets=[1, 5])
    assert [(t.budget_kind, t.budget_value, t.data_budget) for t in tasks] == [
        ("time", 1.0, 500),
        ("time", 5.0, 500),
    ]


# -- metrics -----------------------------------------------------------------


def test_metric_examples():
    assert compute_metrics([1.0, 2.0], [1.0, 2.0]) == {"mse": 0.0, "mae": 0.0, "mape": 0.0, "mspe": 0.0}
    m = compute_metrics([2.0, 2.0], [1.0, 3.0])
    assert (m["mse"], m["mae"]) == (1.0, 1.0)
    assert m["mape"] == pytest.approx((1 + 1 / 3) / 2)
    z = compute_metrics([1.0], [0.0])
    assert np.isfinite(z["mape"]) and z["mape"] == 1e8
    with pytest.raises(ValueError):
        compute_metrics([1.0], [1.0, 2.0])


# -- aggregation -------------------------------------------------------------


def record(alg, value, series="s", ell=6, seed=0, dataset="d", budget=50.0, **kw):
    return ResultRecord(dataset, series, alg, "data", budget, ell, seed, value, value, value, value, 0.0, False, **kw)


def test_rank_examples():
    assert rank_configuration({"A": 1.0, "B": 2.0}) == ({"A": 1.0, "B": 2.0}, {"A"})
    assert rank_configuration({"A": 1.0, "B": 1.0}) == ({"A": 1.5, "B": 1.5}, {"A", "B"})
    summary = aggregate([record("A", 1.0), record("B", 2.0)])
    assert summary[("d",)] == {
        "A": {"wins": 1, "mean_rank": 1.0, "configs": 1},
        "B": {"wins": 0, "mean_rank": 2.0, "configs": 1},
    }


def brute_force(tables):
    """Ranks by counting: 1 + #better + (#equal - 1) / 2; winners hold the minimum."""
    wins, rank_sum = {}, {}
    for scores in tables:
        best = min(scores.values())
        for a, v in scores.items():
            better = sum(1 for w in scores.values() if w < v)
            equal = sum(1 for w in scores.values() if w == v)
            rank_sum[a] = rank_sum.get(a, 0.0) + 1 + better + (equal - 1) / 2
            wins[a] = wins.get(a, 0) + (v == best)
    return wins, {a: s / len(tables) for a, s in rank_sum.items()}


def test_aggregation_matches_brute_force_on_200_tables():
    rng = np.random.default_rng(0)
    algs = ["pfn", "last", "mean", "seasonal_naive", "arima"]
    tables, records = [], []
    for i in range(200):
        # a small value pool forces frequent exact ties
        pool = rng.choice([0.5, 1.0, 1.25, 2.0, 3.0], size=len(algs)) if i % 2 else rng.random(len(algs))
        scores = dict(zip(algs, map(float, pool)))
        tables.append(scores)
        records += [record(a, v, series=f"s{i}") for a, v in scores.items()]
    assert sum(len(set(t.values())) < len(algs) for t in tables) > 50
    wins, mean_rank = brute_force(tables)
    rng.shuffle(records)
    got = aggregate(records)[("d",)]
    for a in algs:
        assert got[a]["wins"] == wins[a]
        assert got[a]["mean_rank"] == pytest.approx(mean_rank[a], abs=1e-12)
        assert got[a]["configs"] == 200
    assert sum(got[a]["mean_rank"] for a in algs) == pytest.approx((len(algs) + 1) / 2 * len(algs))
    assert sum(got[a]["wins"] for a in algs) >= 200


def test_configuration_missing_an_algorithm_is_excluded(caplog):
    records = [record("A", 1.0), record("B", 2.0), record("A", 1.0, series="t")]
    summary = aggregate(records)[("d",)]
    assert summary["A"]["configs"] == 1
    assert "excluded" in caplog.text


def test_grouping_dimensions():
    records = [record("A", 1.0, budget=50.0), record("B", 2.0, budget=50.0), record("A", 3.0, budget=100.0), record("B", 2.0, budget=100.0)]
    summary = aggregate(records, group_by=("budget_value",))
    assert summary[(50.0,)]["A"]["wins"] == 1 and summary[(100.0,)]["B"]["wins"] == 1


# -- records and report ------------------------------------------------------


def test_records_round_trip(tmp_path):
    path = tmp_path / "r.csv"
    rs = [record("A", 0.1 + 0.2), record("B", 1e-300)]
    append_records(path, rs[:1])
    append_records(path, rs[1:])
    assert read_records(path) == rs
    assert read_records(tmp_path / "missing.csv") == []


def test_report_tables(tmp_path):
    records = [record(a, v, series=f"s{i}") for i in range(3) for a, v in (("A", 1.0), ("B", 2.0), ("C", 1.0))]
    rows = build_tables(records)
    assert sum(r["configs"] for r in rows) == 9
    paths = write_report(records, tmp_path)
    names = sorted(p.name for p in paths)
    assert names == ["wins_mse.csv", "wins_mse.json", "wins_mse_data.png"]


# -- adapters and budgets ----------------------------------------------------


class SlowAdapter(Adapter):
    """Every step sleeps ``step_seconds``; usable after ``ready_after`` steps."""

    zero_shot = False
    name = "slow"

    def __init__(self, step_seconds, total_steps, ready_after):
        self.step_seconds, self.total_steps, self.ready_after = step_seconds, total_steps, ready_after
        self.steps = 0

    def step(self):
        time.sleep(self.step_seconds)
        self.steps += 1
        return self.steps < self.total_steps

    @property
    def ready(self):
        return self.steps >= self.ready_after

    def predict(self, inputs, horizon):
        return np.full(len(horizon), 1.0)


def _task(budget_kind="time", budget_value=1.0):
    return EvalTask("toy", "s0", series_of(700), 500, 100, 6, budget_kind, budget_value)


def test_slow_adapter_under_one_second_is_zero_filled():
    adapter = SlowAdapter(2.0, total_steps=100, ready_after=2)
    t0 = time.perf_counter()
    rec = evaluate_task(_task("time", 1.0), "slow", adapter, 0)
    elapsed = time.perf_counter() - t0
    assert adapter.steps == 1
    assert rec.failed
    targets = _task().targets().values
    assert rec.mse == pytest.approx(np.mean(targets**2))
    assert abs(rec.runtime_seconds - 2.0) < 0.5
    assert rec.runtime_seconds <= elapsed


def test_slow_adapter_stops_within_one_step_of_ten_seconds():
    adapter = SlowAdapter(2.0, total_steps=100, ready_after=2)
    t0 = time.perf_counter()
    rec = evaluate_task(_task("time", 10.0), "slow", adapter, 0)
    elapsed = time.perf_counter() - t0
    assert not rec.failed
    # first post-step check at or past 10 s is after step 5
    assert adapter.steps == 5
    assert 10.0 <= rec.runtime_seconds < 10.0 + 2.0
    assert abs(rec.runtime_seconds - elapsed) < 0.5


def test_budget_check_placement_with_fake_clock():
    now = [0.0]

    class FakeStep(SlowAdapter):
        def step(self):
            now[0] += 4.0
            self.steps += 1
            return True

    adapter = FakeStep(0, 100, 1)
    pred, runtime, failed = run_with_time_budget(
        adapter, series_of(5), series_of(1), series_of(36), [make_date(2020, 1, 1)], 10.0, clock=lambda: now[0]
    )
    assert (adapter.steps, runtime, failed) == (3, 12.0, False)


def test_baseline_never_fails_on_time():
    rec = evaluate_task(_task("time", 1.0), "mean", BaselineAdapter("mean"), 0)
    assert not rec.failed and rec.runtime_seconds == 0.0


def test_crashing_adapter_is_zero_filled():
    class Boom(Adapter):
        def predict(self, inputs, horizon):
            raise RuntimeError("boom")

    pred, _, failed = run_with_time_budget(Boom(), series_of(5), series_of(1), series_of(36), [make_date(2020, 1, 1)] * 3)
    assert failed and pred.tolist() == [0.0, 0.0, 0.0]


def test_invalid_budget():
    with pytest.raises(ValueError):
        run_with_time_budget(BaselineAdapter("mean"), series_of(5), series_of(1), series_of(3), [], 0.0)


ADAPTER_SCRIPT = textwrap.dedent(
    """
    import json, sys
    state = {}
    for line in sys.stdin:
        req = json.loads(line)
        op = req["op"]
        if op == "start":
            vals = [v for v in req["train"]["values"] if v is not None]
            state.update(mean=sum(vals) / len(vals), steps=0, seed=req["seed"])
            print(json.dumps({"ok": True}), flush=True)
        elif op == "step":
            state["steps"] += 1
            print(json.dumps({"ok": True, "more": state["steps"] < 3, "ready": True}), flush=True)
        elif op == "predict":
            preds = [state["mean"] + state["seed"]] * len(req["horizon"])
            print(json.dumps({"ok": True, "predictions": preds}), flush=True)
        elif op == "close":
            print(json.dumps({"ok": True}), flush=True)
            break
    """
)


def test_subprocess_adapter(tmp_path):
    script = tmp_path / "adapter.py"
    script.write_text(ADAPTER_SCRIPT)
    name, command = parse_subprocess_spec(f"ext={sys.executable} {script}")
    assert name == "ext"
    task = _task("data", 100.0)
    rec = evaluate_task(task, "ext", SubprocessAdapter(name, command, seed=2), 2)
    fit = task.fit_slice().values
    expected = compute_metrics(np.full(6, fit.mean() + 2), task.targets().values)
    assert not rec.failed
    assert rec.mse == pytest.approx(expected["mse"])


def test_subprocess_adapter_that_dies_is_a_failure(tmp_path):
    script = tmp_path / "die.py"
    script.write_text("import sys\nsys.exit(3)\n")
    adapter = SubprocessAdapter("die", [sys.executable, str(script)])
    pred, _, failed = run_with_time_budget(adapter, series_of(5), series_of(1), series_of(36), [make_date(2020, 1, 1)])
    adapter.close()
    assert failed and pred.tolist() == [0.0]


def test_series_json_round_trip():
    s = daily_series([1.0, np.nan, 3.0])
    from pfncast.benchmark.adapters import _encode_series

    back = decode_series(_encode_series(s))
    assert back.dates == s.dates and back.present.tolist() == [True, False, True]


def test_parse_spec_errors():
    with pytest.raises(ValueError):
        parse_subprocess_spec("no-command")


# -- runner ------------------------------------------------------------------


def test_zero_shot_outputs_ignore_the_data_budget():
    from pfncast.model import PFNModel

    reg = registry(PFNModel())
    tasks = build_tasks(dataset_of(700), 500, [50, 100, 500], [6])
    records = run_benchmark(tasks, reg)
    assert len(records) == 3 * 4
    for alg in reg:
        metrics = {(r.mse, r.mae) for r in records if r.algorithm == alg}
        assert len(metrics) == 1


def test_parallel_runner_matches_serial():
    reg = registry()
    tasks = build_tasks(dataset_of(700, 650), None, [50, 100], [6, 12], time_budgets=[1])
    serial = run_benchmark(tasks, reg, seeds=(0, 1))
    parallel = run_benchmark(tasks, reg, seeds=(0, 1), workers=3)
    assert serial == parallel


def test_holdout_cases():
    cases = synthetic_holdout(n_series=6, max_horizon=10)
    assert [c.freq for c in cases[:3]] == [Frequency.DAILY, Frequency.WEEKLY, Frequency.MONTHLY]
    for c in cases:
        assert len(c.inputs) == 36 and len(c.horizon) == len(c.actuals) == 10
        assert c.horizon[0] > c.inputs.last_date
        assert c.seasonal_amplitude > 0
    again = synthetic_holdout(n_series=6)
    assert all(np.array_equal(a.actuals, b.actuals) for a, b in zip(cases, again))
    records = evaluate_holdout(cases, {"mean": BaselineAdapter("mean")})
    assert len(records) == 6 and not any(r.failed for r in records)
