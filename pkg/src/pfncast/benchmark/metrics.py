from __future__ import annotations

import numpy as np

EPS_Y = 1e-8
METRICS = ("mse", "mae", "mape", "mspe")


def compute_metrics(predictions, actuals) -> dict[str, float]:
    """MSE, MAE and the percentage errors, guarding ``|y|`` below by 1e-8."""
    pred = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(actuals, dtype=np.float64)
    if pred.shape != y.shape:
        raise ValueError(f"length mismatch: {pred.shape} predictions vs {y.shape} actuals")
    if pred.size == 0:
        raise ValueError("need at least one prediction")
    err = pred - y
    rel = err / np.maximum(np.abs(y), EPS_Y)
    return {
        "mse": float(np.mean(err**2)),
        "mae": float(np.mean(np.abs(err))),
        "mape": float(np.mean(np.abs(rel))),
        "mspe": float(np.mean(rel**2)),
    }
