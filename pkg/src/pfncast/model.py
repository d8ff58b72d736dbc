"""Encoder-only transformer that maps a set of dated values plus a query date
to a point forecast for that date.

Tokens carry no positional encoding: order enters only through the date
features, so the model treats its input as an unordered set and gaps in
the input simply mean fewer tokens.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from . import scaling
from .scaling import ScalerState
from .series import DatedSeries, Task
from .timebase import N_TIME_FEATURES, Date, normalize_raw, raw_feature_matrix

WEIGHTS_MAGIC = b"PFNW"
WEIGHTS_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 32
    n_blocks: int = 2
    n_heads: int = 4
    ff1_mult: int = 32
    ff2_mult: int = 8
    max_input_len: int = 100

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        if min(self.d_model, self.n_blocks, self.n_heads, self.ff1_mult, self.ff2_mult) < 1:
            raise ValueError("model dimensions must be positive")


def _init_linear(layer: nn.Linear, generator: torch.Generator) -> nn.Linear:
    with torch.no_grad():
        layer.weight.normal_(0.0, 1.0 / math.sqrt(layer.in_features), generator=generator)
        layer.bias.zero_()
    return layer


class EncoderBlock(nn.Module):
    """Post-norm encoder block: self-attention, then a d -> 32d -> 8d -> d feedforward."""

    def __init__(self, config: ModelConfig, generator: torch.Generator):
        super().__init__()
        d = config.d_model
        self.n_heads = config.n_heads

        def linear(n_in, n_out):
            return _init_linear(nn.Linear(n_in, n_out), generator)

        self.q = linear(d, d)
        self.k = linear(d, d)
        self.v = linear(d, d)
        self.o = linear(d, d)
        self.norm1 = nn.LayerNorm(d)
        self.ff1 = linear(d, config.ff1_mult * d)
        self.ff2 = linear(config.ff1_mult * d, config.ff2_mult * d)
        self.ff_out = linear(config.ff2_mult * d, d)
        self.norm2 = nn.LayerNorm(d)

    def _heads(self, x: torch.Tensor) -> torch.Tensor:
        b, n, d = x.shape
        return x.view(b, n, self.n_heads, d // self.n_heads).transpose(1, 2)

    def forward(self, x: torch.Tensor, query_only: bool = False) -> torch.Tensor:
        # query_only: only the last (query) token's output is computed; the
        # result equals the last row of the full computation.
        xq = x[:, -1:] if query_only else x
        q, k, v = self._heads(self.q(xq)), self._heads(self.k(x)), self._heads(self.v(x))
        scores = q @ k.transpose(-1, -2) / math.sqrt(q.shape[-1])
        attended = torch.softmax(scores, dim=-1) @ v
        b, _, n, _ = attended.shape
        attended = attended.transpose(1, 2).reshape(b, n, -1)
        h = self.norm1(xq + self.o(attended))
        ff = self.ff_out(F.silu(self.ff2(F.silu(self.ff1(h)))))
        return self.norm2(h + ff)


class PFNModel(nn.Module):
    def __init__(self, config: ModelConfig | None = None, seed: int = 0):
        super().__init__()
        self.config = config = config or ModelConfig()
        g = torch.Generator().manual_seed(seed)
        d = config.d_model
        self.time_proj = _init_linear(nn.Linear(N_TIME_FEATURES, d), g)
        self.value_proj = _init_linear(nn.Linear(1, d), g)
        self.query_embedding = nn.Parameter(torch.randn(d, generator=g))
        self.blocks = nn.ModuleList(EncoderBlock(config, g) for _ in range(config.n_blocks))
        self.head = _init_linear(nn.Linear(d, 1), g)

    @property
    def dtype(self) -> torch.dtype:
        return self.head.weight.dtype

    def embed(self, feats: torch.Tensor, values: torch.Tensor, query_feats: torch.Tensor) -> torch.Tensor:
        """Token tensor ``(batch, n + 1, d)`` with the query token last."""
        inputs = self.time_proj(feats) + self.value_proj(values.unsqueeze(-1))
        query = self.time_proj(query_feats) + self.query_embedding
        return torch.cat([inputs, query.unsqueeze(1)], dim=1)

    def encode(self, tokens: torch.Tensor) -> torch.Tensor:
        if tokens.ndim != 3 or tokens.shape[-1] != self.config.d_model:
            raise ValueError(
                f"expected tokens of shape (batch, n, {self.config.d_model}), got {tuple(tokens.shape)}"
            )
        x = tokens
        last = len(self.blocks) - 1
        for i, block in enumerate(self.blocks):
            x = block(x, query_only=i == last)
        return self.head(x[:, -1]).squeeze(-1)

    def forward(self, feats, values, query_feats) -> torch.Tensor:
        return self.encode(self.embed(feats, values, query_feats))


def _as_tensor(x, model: PFNModel) -> torch.Tensor:
    return torch.as_tensor(np.asarray(x), dtype=model.dtype)


def task_arrays(task: Task, scaler: ScalerState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalized features and scaled values of present inputs, plus query features."""
    series = task.input
    present = np.flatnonzero(series.present)
    if len(present) == 0:
        raise ValueError("task has no present input values")
    dates = [series.dates[i] for i in present]
    ref_year = max(series.dates).year
    feats = normalize_raw(raw_feature_matrix(dates), ref_year)
    values = scaling.transform(scaler, series.values[present])
    query = normalize_raw(raw_feature_matrix([task.query_date]), ref_year)[0]
    return feats, values, query


def embed_tokens(model: PFNModel, task: Task, scaler: ScalerState) -> torch.Tensor:
    """Token matrix ``(n_present + 1, d)``; missing inputs produce no token."""
    feats, values, query = task_arrays(task, scaler)
    return model.embed(
        _as_tensor(feats[None], model), _as_tensor(values[None], model), _as_tensor(query[None], model)
    )[0]


def forward(model: PFNModel, tokens: torch.Tensor) -> torch.Tensor:
    """Scaled-unit prediction from a single token matrix (query token last)."""
    return model.encode(tokens.unsqueeze(0))[0]


def predict(
    model: PFNModel,
    series: DatedSeries,
    horizon_dates: list[Date],
    scaler_kind: str = "robust",
) -> np.ndarray:
    """Zero-shot forecasts in original units, one query per horizon date."""
    if len(series) == 0 or not series.present.any():
        raise ValueError("input series has no present values")
    last = max(series.dates)
    if any(d <= last for d in horizon_dates):
        raise ValueError("horizon dates must follow the last input date")
    if not horizon_dates:
        return np.empty(0)
    state = scaling.fit(scaler_kind, series.values, series.present)
    present = np.flatnonzero(series.present)
    if len(present) > model.config.max_input_len:
        raise ValueError(f"input has {len(present)} points; model accepts at most {model.config.max_input_len}")
    ref_year = last.year
    feats = normalize_raw(raw_feature_matrix([series.dates[i] for i in present]), ref_year)
    values = scaling.transform(state, series.values[present])
    query = normalize_raw(raw_feature_matrix(horizon_dates), ref_year)
    feats_t, values_t = _as_tensor(feats[None], model), _as_tensor(values[None], model)
    # one forward pass per query keeps each forecast independent of the others
    with torch.no_grad():
        out = torch.cat([model(feats_t, values_t, _as_tensor(q[None], model)) for q in query])
    return scaling.inverse(state, out.double().numpy())


def save_weights(model: PFNModel, path) -> None:
    """Write ``model`` as a header plus little-endian float32 tensors."""
    tensors, payload, offset = [], [], 0
    for name, tensor in model.state_dict().items():
        data = tensor.detach().cpu().to(torch.float32).contiguous().numpy().astype("<f4")
        raw = data.tobytes(order="C")
        tensors.append({"name": name, "shape": list(data.shape), "offset": offset, "nbytes": len(raw)})
        payload.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"format_version": WEIGHTS_VERSION, "config": asdict(model.config), "tensors": tensors},
        sort_keys=True,
    ).encode()
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<II", WEIGHTS_VERSION, len(header)))
        fh.write(header)
        for raw in payload:
            fh.write(raw)


def load_weights(path) -> PFNModel:
    blob = Path(path).read_bytes()
    if blob[:4] != WEIGHTS_MAGIC:
        raise ValueError(f"{path} is not a weight file")
    version, header_len = struct.unpack("<II", blob[4:12])
    if version != WEIGHTS_VERSION:
        raise ValueError(f"unsupported weight format version {version}")
    header = json.loads(blob[12 : 12 + header_len])
    base = 12 + header_len
    model = PFNModel(ModelConfig(**header["config"]))
    expected = model.state_dict()
    state = {}
    for entry in header["tensors"]:
        start = base + entry["offset"]
        arr = np.frombuffer(blob, dtype="<f4", count=int(np.prod(entry["shape"])), offset=start)
        state[entry["name"]] = torch.from_numpy(arr.reshape(entry["shape"]).copy())
    if set(state) != set(expected):
        raise ValueError("weight file tensors do not match the model configuration")
    for name, tensor in state.items():
        if tensor.shape != expected[name].shape:
            raise ValueError(f"shape mismatch for {name}: {tuple(tensor.shape)}")
    model.load_state_dict(state)
    return model
