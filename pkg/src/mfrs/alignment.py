"""Recover the time step of an unlabeled window by sliding Pearson correlation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import AlignmentError, ValidationError

__all__ = ["AlignmentResult", "pearson", "align", "intercept"]


@dataclass(frozen=True)
class AlignmentResult:
    xi: int
    score: float
    scores: np.ndarray


def pearson(a, b) -> float:
    """Population Pearson correlation; 0 when either input is constant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(f"pearson needs two equal-length vectors, got {a.shape} and {b.shape}")
    if a.size < 2:
        raise ValidationError("pearson needs length >= 2")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return 0.0
    da = a - a.mean()
    db = b - b.mean()
    r = float(np.dot(da, db) / np.sqrt(np.dot(da, da) * np.dot(db, db)))
    return min(1.0, max(-1.0, r))


def _sliding_corr(obs: np.ndarray, windows: np.ndarray) -> np.ndarray:
    # windows: (n, S); constant windows score 0
    do = obs - obs.mean()
    dw = windows - windows.mean(axis=1, keepdims=True)
    num = dw @ do
    den = np.sqrt(np.einsum("ij,ij->i", dw, dw) * np.dot(do, do))
    flat = np.ptp(windows, axis=1) == 0
    out = np.divide(num, den, out=np.zeros_like(num), where=~flat)
    return np.clip(out, -1.0, 1.0)


def align(observation, intercepted, max_period: int,
          channels: Sequence[int] | None = (0,)) -> AlignmentResult:
    """Score every offset t in [0, max_period) and return the best one.

    ``observation`` is S x C, ``intercepted`` at least (max_period + S) x C.
    ``channels=None`` uses every channel. Ties go to the smallest t.
    """
    obs = np.asarray(observation, dtype=np.float64)
    ref = np.asarray(intercepted, dtype=np.float64)
    if obs.ndim == 1:
        obs = obs[:, None]
    if ref.ndim == 1:
        ref = ref[:, None]
    S, C = obs.shape
    if ref.shape[1] != C:
        raise ValidationError(f"observation has {C} channels, intercepted data {ref.shape[1]}")
    if max_period < 1:
        raise ValidationError(f"max_period must be >= 1, got {max_period}")
    if ref.shape[0] < max_period + S:
        raise ValidationError(
            f"intercepted data needs >= {max_period + S} rows, got {ref.shape[0]}")
    chans = list(range(C)) if channels is None else list(channels)
    if not chans:
        raise ValidationError("channels_to_use is empty")

    scores = np.zeros(max_period)
    used = 0
    for i in chans:
        if np.ptp(obs[:, i]) == 0:
            warnings.warn(f"observation channel {i} is constant; dropped from alignment")
            continue
        wins = sliding_window_view(ref[:max_period + S - 1, i], S)
        scores += _sliding_corr(obs[:, i], wins)
        used += 1
    if used == 0:
        raise AlignmentError("every selected observation channel is constant")
    xi = int(np.argmax(scores))
    return AlignmentResult(xi, float(scores[xi]), scores)


def intercept(train_values, max_period: int, lookback: int) -> tuple[np.ndarray, int]:
    """Final max_period + lookback rows of the training block, with their row offset."""
    train_values = np.asarray(train_values)
    n = max_period + lookback
    if train_values.shape[0] < n:
        raise ValidationError(
            f"training data has {train_values.shape[0]} rows, alignment needs {n}")
    off = train_values.shape[0] - n
    return train_values[off:], off
