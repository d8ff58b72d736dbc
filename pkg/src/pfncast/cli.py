"""Command line entry point: ``pfncast synth-gen | train | predict | benchmark | report``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("pfncast")

DEFAULT_WEIGHTS = Path(__file__).with_name("data") / "default.pfnw"
ENV_THREADS = "PFNCAST_THREADS"
ENV_OUTPUT_DIR = "PFNCAST_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _on_off(text: str) -> bool:
    if text.lower() in ("on", "true", "1", "yes"):
        return True
    if text.lower() in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _int_list(text) -> list[int]:
    if isinstance(text, list):
        return [int(x) for x in text]
    return [int(x) for x in str(text).split(",") if x.strip()]


def _float_list(text) -> list[float]:
    if isinstance(text, list):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _str_list(text) -> list[str]:
    if isinstance(text, list):
        return [str(x) for x in text]
    return [x.strip() for x in str(text).split(",") if x.strip()]


def _output_path(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(ENV_OUTPUT_DIR)
    return Path(base) / p if base and not p.is_absolute() else p


def _write_manifest(path: Path, command: str, args: argparse.Namespace, started, artifacts) -> Path:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    manifest = {
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "code_version": __version__,
        "started": started.isoformat(timespec="seconds"),
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "artifacts": [str(a) for a in artifacts],
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _manifest_path(artifact: Path) -> Path:
    return artifact.with_name(artifact.name + ".manifest.json")


# -- synth-gen ---------------------------------------------------------------


def cmd_synth_gen(args) -> int:
    from .prior import PriorHyperparams, generate_series, random_start, series_rng
    from .timebase import Frequency

    if args.window is not None and args.length < args.window:
        raise UsageError(f"--length {args.length} is shorter than --window {args.window}")
    out = _output_path(args.out)
    hyper = PriorHyperparams(m_noise_scale=args.noise_scale, weibull_k=args.weibull_k)
    freqs = list(Frequency) if args.freq == "all" else [Frequency(args.freq)]
    started = _dt.datetime.now(_dt.timezone.utc)
    counts = {}
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series_id", "date", "underlying", "noise", "observed"])
        for fi, freq in enumerate(freqs):
            counts[freq.value] = args.series
            for i in range(args.series):
                rng = series_rng(args.seed, fi * args.series + i)
                s = generate_series(hyper, freq, random_start(freq, rng), args.length, rng)
                sid = f"{freq.value}-{i}"
                for d, u, z, y in zip(s.dates, s.underlying, s.noise, s.observed):
                    writer.writerow([sid, d.isoformat(), repr(float(u)), repr(float(z)), repr(float(y))])
    args.hyperparameters = asdict(hyper)
    args.frequency_counts = counts
    _write_manifest(_manifest_path(out), "synth-gen", args, started, [out])
    print(f"wrote {sum(counts.values())} series to {out}")
    return 0


# -- train -------------------------------------------------------------------


def cmd_train(args) -> int:
    if not args.out:
        raise UsageError("--out is required")
    out = _output_path(args.out)
    if args.length < args.window:
        raise UsageError(f"--length {args.length} is shorter than --window {args.window}")
    out.parent.mkdir(parents=True, exist_ok=True)

    import torch

    from .model import ModelConfig, PFNModel, save_weights
    from .prior import PriorHyperparams
    from .training import TrainConfig, batch_loss, fit_tasks, fixed_noiseless_tasks, stack_tasks, train

    started = _dt.datetime.now(_dt.timezone.utc)
    model_config = ModelConfig(d_model=args.d_model)
    history_path = out.with_name(out.name + ".history.csv")
    if args.overfit_tasks:
        tasks = fixed_noiseless_tasks(args.overfit_tasks, seed=args.seed)
        torch.manual_seed(args.seed)
        model = PFNModel(model_config, seed=args.seed)
        losses = fit_tasks(model, tasks, args.overfit_steps, args.lr, args.scaler)
        with torch.no_grad():
            final = float(batch_loss(model, stack_tasks(tasks, args.scaler)))
        rows = [{"epoch": i + 1, "train_loss": l, "val_loss": "", "seconds": ""} for i, l in enumerate(losses)]
    else:
        tc = TrainConfig(
            learning_rate=args.lr,
            batch_size=args.batch_size,
            steps_per_epoch=args.steps_per_epoch,
            epochs=args.epochs,
            noise_removal=args.noise_removal,
            scaler_kind=args.scaler,
            m_noise_scale=args.noise_scale,
            seed=args.seed,
            series_per_freq=args.series_per_freq,
            series_length=args.length,
            window=args.window,
            min_context=min(args.min_context, args.window),
        )
        model, history = train(model_config, tc, PriorHyperparams(weibull_k=args.weibull_k))
        rows = history.rows()
        final = history.train_loss[-1] if rows else float("nan")
        args.final_val_loss = history.val_loss[-1] if rows else None
    save_weights(model, out)
    with history_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "train_loss", "val_loss", "seconds"])
        writer.writeheader()
        writer.writerows(rows)
    args.final_train_loss = final
    _write_manifest(_manifest_path(out), "train", args, started, [out, history_path])
    print(f"final train loss {final:.6g}; weights written to {out}")
    return 0


# -- predict -----------------------------------------------------------------


def _read_input_series(path: Path):
    from .series import DatedSeries
    from .timebase import parse_date

    dates, values = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) < 2:
            raise ValueError(f"{path}: expected columns date,value")
        for row in reader:
            if not row:
                continue
            dates.append(parse_date(row[0]))
            cell = row[1].strip() if len(row) > 1 else ""
            values.append(float(cell) if cell else np.nan)
    return DatedSeries(dates, np.array(values))


def _infer_freq(dates):
    from .timebase import Frequency

    gaps = sorted((b - a).days for a, b in zip(dates, dates[1:]))
    if not gaps:
        return Frequency.DAILY
    step = gaps[0]
    if step >= 28:
        return Frequency.MONTHLY
    if step == 7:
        return Frequency.WEEKLY
    return Frequency.DAILY


def cmd_predict(args) -> int:
    from .model import load_weights, predict
    from .timebase import Frequency, date_add

    out = _output_path(args.out)
    started = _dt.datetime.now(_dt.timezone.utc)
    series = _read_input_series(Path(args.input))
    if len(series) == 0:
        raise ValueError("input file has no rows")
    freq = Frequency(args.freq) if args.freq else _infer_freq(series.dates)
    horizon = [date_add(series.last_date, h, freq) for h in range(1, args.horizon + 1)]
    model = load_weights(args.weights)
    forecasts = predict(model, series, horizon, args.scaler)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "prediction"])
        for d, v in zip(horizon, forecasts):
            writer.writerow([d.isoformat(), repr(float(v))])
    args.inferred_freq = freq.value
    _write_manifest(_manifest_path(out), "predict", args, started, [out])
    print(f"wrote {len(horizon)} forecasts to {out}")
    return 0


# -- benchmark ---------------------------------------------------------------


def cmd_benchmark(args) -> int:
    from .benchmark import append_records, build_tasks, load_dataset, registry, run_benchmark
    from .benchmark.adapters import parse_subprocess_spec

    subprocess_adapters = [parse_subprocess_spec(s) for s in args.adapter or []]
    weights = args.weights if args.weights and Path(args.weights).exists() else None
    reg = registry(weights, subprocess_adapters)
    algorithms = _str_list(args.algorithms)
    unknown = [a for a in algorithms if a not in reg]
    if unknown:
        raise UsageError(f"unknown algorithm(s) {', '.join(unknown)}; registered: {', '.join(sorted(reg))}")
    if not args.dataset:
        raise UsageError("at least one --dataset is required")
    results = _output_path(args.results)
    started = _dt.datetime.now(_dt.timezone.utc)
    records = []
    for spec in args.dataset:
        path, _, freq = spec.partition(":")
        dataset = load_dataset(path, freq or "daily")
        tasks = build_tasks(
            dataset,
            _int_list(args.anchor) if args.anchor else None,
            _int_list(args.data_budgets),
            _int_list(args.pred_lengths),
            time_budgets=_float_list(args.time_budgets) if args.time_budgets else (),
            input_length=args.input_length,
        )
        records += run_benchmark(
            tasks,
            {a: reg[a] for a in algorithms},
            seeds=_int_list(args.seeds),
            workers=args.workers,
            parallel_time=args.parallel_time,
        )
    results.parent.mkdir(parents=True, exist_ok=True)
    append_records(results, records)
    _write_manifest(_manifest_path(results), "benchmark", args, started, [results])
    print(f"appended {len(records)} records to {results}")
    return 0


# -- report ------------------------------------------------------------------


def cmd_report(args) -> int:
    from .benchmark import read_records
    from .benchmark.report import write_report

    started = _dt.datetime.now(_dt.timezone.utc)
    records = read_records(args.results)
    out_dir = _output_path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not records:
        print("no records")
        _write_manifest(out_dir / "report.manifest.json", "report", args, started, [])
        return 0
    paths = write_report(records, out_dir, args.metric, tuple(_str_list(args.group_by)))
    _write_manifest(out_dir / "report.manifest.json", "report", args, started, paths)
    for p in paths:
        print(p)
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="pfncast",
        description="Zero-shot forecasting with a transformer fitted to a synthetic series prior.",
        epilog="Exit codes: 0 success, 1 usage error, 2 runtime failure.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="flat JSON file of option defaults (flags override it)")
        p.add_argument("--threads", type=int, default=None, help=f"torch threads (env {ENV_THREADS})")
        p.add_argument("--seed", type=int, default=0, help="root random seed")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress")

    p = sub.add_parser("synth-gen", help="sample synthetic series from the prior")
    common(p)
    p.add_argument("--series", type=int, default=10, help="series per frequency")
    p.add_argument("--length", type=int, default=200, help="points per series")
    p.add_argument("--freq", choices=["daily", "weekly", "monthly", "all"], default="daily")
    p.add_argument("--noise-scale", type=float, default=1.0, help="m_noise multiplier")
    p.add_argument("--weibull-k", type=float, default=2.0, help="Weibull noise shape")
    p.add_argument("--window", type=int, default=None, help="fail unless --length covers this training window")
    p.add_argument("--out", default="synthetic.csv", help="output CSV")
    p.set_defaults(func=cmd_synth_gen)

    p = sub.add_parser("train", help="fit the forecaster on synthetic tasks")
    common(p)
    p.add_argument("--out", help="weight file to write (required)")
    p.add_argument("--lr", type=float, default=1e-4, help="Adam learning rate")
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--steps-per-epoch", type=int, default=200)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--series-per-freq", type=int, default=2000)
    p.add_argument("--length", type=int, default=200, help="synthetic series length")
    p.add_argument("--window", type=int, default=100, help="sliding task window")
    p.add_argument("--min-context", type=int, default=36, help="shortest input used in training batches")
    p.add_argument("--scaler", choices=["robust", "minmax"], default="robust")
    p.add_argument("--noise-removal", type=_on_off, default=True, metavar="on|off")
    p.add_argument("--noise-scale", type=float, default=1.0, help="m_noise multiplier of training data")
    p.add_argument("--weibull-k", type=float, default=2.0)
    p.add_argument("--d-model", type=int, default=32)
    p.add_argument("--overfit-tasks", type=int, default=0, help="smoke mode: fit this many fixed noiseless tasks")
    p.add_argument("--overfit-steps", type=int, default=2000)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="zero-shot forecast for one input series")
    common(p)
    p.add_argument("--weights", default=str(DEFAULT_WEIGHTS), help="weight file")
    p.add_argument("--input", required=True, help="CSV with columns date,value (blank = missing)")
    p.add_argument("--horizon", type=int, default=48, help="number of future steps")
    p.add_argument("--freq", choices=["daily", "weekly", "monthly"], default=None, help="default: inferred")
    p.add_argument("--scaler", choices=["robust", "minmax"], default="robust")
    p.add_argument("--out", default="forecast.csv")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("benchmark", help="run the budgeted evaluation grid")
    common(p)
    p.add_argument("--dataset", action="append", help="PATH[:daily|weekly|monthly], repeatable")
    p.add_argument("--weights", default=str(DEFAULT_WEIGHTS))
    p.add_argument("--algorithms", default="pfn,last,mean,seasonal_naive")
    p.add_argument("--adapter", action="append", help="external adapter NAME=COMMAND, repeatable")
    p.add_argument("--data-budgets", default="50,100,150,200,250,300,500")
    p.add_argument("--time-budgets", default="", help="e.g. 1,5,10,15,30,45,60,120")
    p.add_argument("--pred-lengths", default="6,8,14,18,24,36,48")
    p.add_argument("--seeds", default="0")
    p.add_argument(
        "--anchor", default=None, help="comma-separated anchor indices; default: 500 or the largest feasible index"
    )
    p.add_argument("--workers", type=int, default=1, help="parallel runs for data-budget tasks")
    p.add_argument(
        "--parallel-time", action="store_true", help="also run time-budget tasks in parallel (skews wall clock)"
    )
    p.add_argument("--input-length", type=int, default=36)
    p.add_argument("--results", default="results.csv", help="append-only results CSV")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("report", help="wins / mean-rank tables and plots")
    common(p)
    p.add_argument("--results", default="results.csv")
    p.add_argument("--metric", choices=["mse", "mae", "mape", "mspe"], default="mse")
    p.add_argument("--group-by", default="budget_kind,budget_value")
    p.add_argument("--out-dir", default="report")
    p.set_defaults(func=cmd_report)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or not known.command:
        return
    try:
        values = json.loads(Path(known.config).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config file {known.config}: {exc}") from exc
    if not isinstance(values, dict):
        raise UsageError("config file must hold a flat JSON object")
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = subparsers.choices.get(known.command)
    if sp is None:
        return
    dests = {a.dest for a in sp._actions}
    unknown = sorted(k.replace("-", "_") for k in values if k.replace("-", "_") not in dests)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    sp.set_defaults(**{k.replace("-", "_"): v for k, v in values.items()})


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
    except UsageError as exc:
        print(f"pfncast: error: {exc}", file=sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    threads = args.threads or (int(os.environ[ENV_THREADS]) if os.environ.get(ENV_THREADS) else None)
    if threads:
        import torch

        torch.set_num_threads(threads)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pfncast: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"pfncast: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
