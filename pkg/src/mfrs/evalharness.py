"""Metrics over stride-1 test windows, naive baselines and the channel-additivity check."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError, ValidationError
from .forecaster import ForecastModel, WindowBatcher
from .refseries import ReferenceSeries
from .seriescore import MultiSeries, count_windows
from .synthbench import OptimalMetrics

__all__ = [
    "EvalReport",
    "evaluate",
    "evaluate_predictor",
    "ChannelCheck",
    "channel_independence_test",
    "naive_baselines",
    "repeat_last",
    "seasonal_naive",
    "zscore",
]


@dataclass
class EvalReport:
    mse: float
    mae: float
    windows: int
    per_horizon: np.ndarray | None = None
    optimal: OptimalMetrics | None = None

    @property
    def gap_ratio(self) -> float | None:
        if self.optimal is None or self.optimal.mse_opt == 0:
            return None
        return self.mse / self.optimal.mse_opt

    def to_json(self) -> dict:
        out = {"mse": self.mse, "mae": self.mae, "windows": self.windows}
        if self.per_horizon is not None:
            out["per_horizon_mse"] = [float(v) for v in self.per_horizon]
        if self.optimal is not None:
            out["optimal"] = self.optimal.to_json()
            out["gap_ratio"] = self.gap_ratio
        return out


class _Accumulator:
    def __init__(self, horizon: int):
        self.sq = np.zeros(horizon)
        self.abs = 0.0
        self.n = 0
        self.count = 0

    def add(self, pred: np.ndarray, target: np.ndarray):
        # pred/target: (batch, T, C)
        err = pred - target
        self.sq += (err ** 2).sum(axis=(0, 2))
        self.abs += float(np.abs(err).sum())
        self.n += err.shape[0] * err.shape[2]
        self.count += err.shape[0]

    def report(self, optimal=None) -> EvalReport:
        per_h = self.sq / self.n
        total = self.n * len(self.sq)
        return EvalReport(float(self.sq.sum() / total), self.abs / total, self.count, per_h, optimal)


def evaluate(model: ForecastModel, test: MultiSeries, rs: ReferenceSeries,
             optimal: OptimalMetrics | None = None, chunk: int = 256) -> EvalReport:
    """MSE/MAE over every stride-1 window of ``test``, all horizons and channels."""
    batcher = WindowBatcher(test, rs, model.config)
    acc = _Accumulator(model.config.horizon)
    for x, r, y in batcher.chunks(chunk):
        acc.add(model.forward(x, r), y)
    return acc.report(optimal)


def evaluate_predictor(predictor: Callable[[np.ndarray], np.ndarray], test: MultiSeries,
                       lookback: int, horizon: int, optimal: OptimalMetrics | None = None,
                       chunk: int = 1024) -> EvalReport:
    """Evaluate a model-free predictor mapping (batch, S, C) lookbacks to (batch, T, C)."""
    n = count_windows(test.length, lookback, horizon)
    if n == 0:
        raise ConfigurationError(
            f"test series of length {test.length} has no window of {lookback} + {horizon}")
    views = sliding_window_view(test.values, lookback + horizon, axis=0)
    acc = _Accumulator(horizon)
    for lo in range(0, n, chunk):
        w = views[lo:min(lo + chunk, n)].transpose(0, 2, 1)
        acc.add(predictor(w[:, :lookback]), w[:, lookback:])
    return acc.report(optimal)


def repeat_last(horizon: int) -> Callable[[np.ndarray], np.ndarray]:
    def f(x):
        return np.repeat(x[:, -1:, :], horizon, axis=1)
    return f


def seasonal_naive(lag: int, horizon: int) -> Callable[[np.ndarray], np.ndarray]:
    """Forecast step h as the lookback value lag * ceil((h+1)/lag) steps earlier."""
    h = np.arange(horizon)
    offsets = h - lag * (h // lag + 1)  # negative offsets from the forecast origin

    def f(x):
        return x[:, x.shape[1] + offsets, :]
    return f


def naive_baselines(test: MultiSeries, lookback: int, horizon: int, lag: int | None = None,
                    optimal: OptimalMetrics | None = None) -> dict[str, EvalReport]:
    """Repeat-last and seasonal-naive (lag = largest primary period) reports.

    Seasonal-naive is skipped with a warning when the lag exceeds the lookback.
    """
    out = {"repeat_last": evaluate_predictor(repeat_last(horizon), test, lookback, horizon, optimal)}
    if lag is not None:
        if lag > lookback:
            warnings.warn(f"seasonal-naive skipped: lag {lag} exceeds lookback {lookback}")
        else:
            out["seasonal_naive"] = evaluate_predictor(
                seasonal_naive(lag, horizon), test, lookback, horizon, optimal)
    return out


@dataclass(frozen=True)
class ChannelCheck:
    passed: bool
    max_deviation: float


def channel_independence_test(model, lookback, rs_block, tol: float = 1e-9) -> ChannelCheck:
    """Compare a joint forecast against one forecast per channel with the same weights."""
    x = np.asarray(lookback, dtype=np.float64)
    if x.shape[-1] < 2:
        raise ValidationError("channel independence needs at least two channels")
    joint = model.forward(x, rs_block)
    alone = np.concatenate([model.forward(x[..., i:i + 1], rs_block) for i in range(x.shape[-1])],
                           axis=-1)
    dev = float(np.max(np.abs(joint - alone)))
    return ChannelCheck(bool(dev < tol) and math.isfinite(dev), dev)


def zscore(train: MultiSeries, *others: MultiSeries) -> tuple[MultiSeries, ...]:
    """Standardize every series with the training segment's per-channel mean and std."""
    mu = train.values.mean(axis=0)
    sd = train.values.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return tuple(MultiSeries((s.values - mu) / sd, s.step_hint, s.channel_names, s.start, s.timestamps)
                 for s in (train,) + others)
