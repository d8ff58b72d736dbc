"""Algorithm adapters and the wall-clock budget runner.

An adapter is driven in three phases: ``start`` (data loading, untimed),
``step`` (one training step, timed; returns False once training is done)
and ``predict``. Zero-shot adapters have no steps.
"""

from __future__ import annotations

import json
import logging
import math
import shlex
import subprocess
import time

import numpy as np

from .. import baselines
from ..model import PFNModel, load_weights, predict
from ..series import DatedSeries
from ..timebase import Date, parse_date

log = logging.getLogger(__name__)


class Adapter:
    name = "adapter"
    zero_shot = True

    def start(self, train: DatedSeries, validation: DatedSeries) -> None:
        pass

    def step(self) -> bool:
        return False

    @property
    def ready(self) -> bool:
        return True

    def predict(self, inputs: DatedSeries, horizon: list[Date]) -> np.ndarray:
        raise NotImplementedError

    def close(self) -> None:
        pass


class BaselineAdapter(Adapter):
    def __init__(self, algorithm: str):
        if algorithm not in baselines.ALGORITHMS:
            raise ValueError(f"unknown baseline {algorithm!r}")
        self.name = algorithm

    def predict(self, inputs, horizon):
        return baselines.forecast(self.name, inputs, horizon)


class PFNAdapter(Adapter):
    name = "pfn"

    def __init__(self, model: PFNModel | str):
        self.model = load_weights(model) if isinstance(model, str) else model

    def predict(self, inputs, horizon):
        return predict(self.model, inputs, horizon)


def _encode_series(series: DatedSeries) -> dict:
    return {
        "dates": [d.isoformat() for d in series.dates],
        "values": [float(v) if ok else None for v, ok in zip(series.values, series.present)],
    }


class SubprocessAdapter(Adapter):
    """Adapter backed by an external program speaking JSON lines on stdin/stdout.

    Requests are ``{"op": "start" | "step" | "predict" | "close", ...}``
    (``start`` carries ``seed``, ``train`` and ``validation``);
    every reply carries ``"ok"`` and, on failure, ``"error"``. ``step``
    replies with ``"more"`` and ``"ready"``; ``predict`` with
    ``"predictions"``.
    """

    zero_shot = False

    def __init__(self, name: str, command: list[str], seed: int = 0):
        self.name = name
        self.command = command
        self.seed = seed
        self._proc = None
        self._ready = False

    def _call(self, **request) -> dict:
        if self._proc is None:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
            )
        self._proc.stdin.write(json.dumps(request) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise RuntimeError(f"{self.name}: adapter process exited")
        reply = json.loads(line)
        if not reply.get("ok", False):
            raise RuntimeError(f"{self.name}: {reply.get('error', 'unknown error')}")
        return reply

    def start(self, train, validation):
        self._call(op="start", seed=self.seed, train=_encode_series(train), validation=_encode_series(validation))

    def step(self):
        reply = self._call(op="step")
        self._ready = bool(reply.get("ready", False))
        return bool(reply.get("more", False))

    @property
    def ready(self):
        return self._ready

    def predict(self, inputs, horizon):
        reply = self._call(
            op="predict", input=_encode_series(inputs), horizon=[d.isoformat() for d in horizon]
        )
        return np.asarray(reply["predictions"], dtype=np.float64)

    def close(self):
        if self._proc is not None:
            try:
                self._call(op="close")
            except (RuntimeError, OSError, ValueError):
                pass
            self._proc.terminate()
            self._proc.wait()
            self._proc = None


def run_with_time_budget(
    adapter: Adapter,
    train: DatedSeries,
    validation: DatedSeries,
    inputs: DatedSeries,
    horizon: list[Date],
    budget_seconds: float | None = None,
    clock=time.perf_counter,
) -> tuple[np.ndarray, float, bool]:
    """Train under a wall-clock budget, then predict.

    The clock covers training steps only. The budget is checked after each
    step, so a run overshoots by at most one step. Returns
    ``(predictions, runtime_seconds, failed)``; failures are zero-filled.
    """
    if budget_seconds is not None and budget_seconds <= 0:
        raise ValueError("budget must be positive")
    zeros = np.zeros(len(horizon))
    runtime = 0.0
    try:
        adapter.start(train, validation)
        if not adapter.zero_shot:
            began = clock()
            while True:
                more = adapter.step()
                runtime = clock() - began
                if not more:
                    break
                if budget_seconds is not None and runtime >= budget_seconds:
                    log.info("%s stopped after %.2fs (budget %.2fs)", adapter.name, runtime, budget_seconds)
                    break
        if not adapter.ready:
            return zeros, runtime, True
        predictions = np.asarray(adapter.predict(inputs, horizon), dtype=np.float64)
        if predictions.shape != zeros.shape or not np.all(np.isfinite(predictions)):
            return zeros, runtime, True
        return predictions, runtime, False
    except Exception as exc:  # any adapter crash becomes a zero-filled failure
        log.warning("%s failed: %s", adapter.name, exc)
        return zeros, runtime, True


def parse_subprocess_spec(spec: str) -> tuple[str, list[str]]:
    """``name=command args...`` as used on the command line."""
    name, _, command = spec.partition("=")
    if not name or not command:
        raise ValueError(f"expected NAME=COMMAND, got {spec!r}")
    return name, shlex.split(command)


def decode_series(payload: dict) -> DatedSeries:
    """Inverse of the JSON encoding sent to subprocess adapters."""
    values = [math.nan if v is None else v for v in payload["values"]]
    return DatedSeries([parse_date(d) for d in payload["dates"]], np.array(values, dtype=np.float64))
