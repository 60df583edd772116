"""Magnitude spectrum of a channel and its period-indexed view.

The spectrum keeps bins ``l`` with ``0 < l < L/2`` (DC and Nyquist dropped).
The period view re-reads it at integer periods: ``psi[T] = |X[round(L/T)]|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError

__all__ = [
    "SpectrumView",
    "PeriodView",
    "magnitude_spectrum",
    "to_period_domain",
    "default_conversion_length",
    "nearest_bin",
    "dump_spectrum_csv",
    "dump_period_csv",
]


@dataclass(frozen=True)
class SpectrumView:
    """``magnitudes[l - 1]`` holds the amplitude of bin ``l``."""

    magnitudes: np.ndarray
    length_L: int

    @property
    def max_bin(self) -> int:
        return len(self.magnitudes)

    def at_bin(self, l: int) -> float:
        if 1 <= l <= self.max_bin:
            return float(self.magnitudes[l - 1])
        return 0.0

    def frequencies(self) -> np.ndarray:
        return np.arange(1, self.max_bin + 1) / self.length_L


@dataclass(frozen=True)
class PeriodView:
    """``psi[T]`` for ``T = 0..L_p``; entries 0 and 1 are always zero."""

    psi: np.ndarray
    conversion_length: int

    def __getitem__(self, period: int) -> float:
        return float(self.psi[period])


def default_conversion_length(L: int) -> int:
    return min(5000, L // 4)


def nearest_bin(L: int, num: int, den: int) -> int:
    """round(L * num / den), halves rounded up, in integer arithmetic."""
    return (2 * L * num + den) // (2 * den)


def magnitude_spectrum(channel) -> SpectrumView:
    x = np.asarray(channel, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError(f"channel must be 1-D, got shape {x.shape}")
    L = x.shape[0]
    if L < 4:
        raise ValidationError(f"spectrum needs L >= 4, got {L}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("channel contains non-finite values")
    X = np.fft.rfft(x - x.mean())
    top = (L + 1) // 2 - 1  # largest l with l < L/2
    mags = np.abs(X[1:top + 1])
    return SpectrumView(mags, L)


def to_period_domain(spec: SpectrumView, L_p: int | None = None) -> PeriodView:
    L = spec.length_L
    if L_p is None:
        L_p = default_conversion_length(L)
    if not (2 <= L_p and 2 * L_p < L):
        raise ValidationError(f"conversion length must satisfy 2 <= L_p < L/2, got L_p={L_p}, L={L}")
    periods = np.arange(2, L_p + 1)
    bins = (2 * L + periods) // (2 * periods)
    psi = np.zeros(L_p + 1)
    ok = (bins >= 1) & (bins <= spec.max_bin)
    psi[periods[ok]] = spec.magnitudes[bins[ok] - 1]
    return PeriodView(psi, L_p)


def dump_spectrum_csv(path: str | Path, spec: SpectrumView):
    bins = np.arange(1, spec.max_bin + 1)
    with open(path, "w") as fh:
        fh.write("bin,frequency,magnitude\n")
        for l, m in zip(bins, spec.magnitudes):
            fh.write(f"{l},{float(l) / spec.length_L!r},{float(m)!r}\n")


def dump_period_csv(path: str | Path, pv: PeriodView):
    with open(path, "w") as fh:
        fh.write("period,psi\n")
        for T in range(1, pv.conversion_length + 1):
            fh.write(f"{T},{float(pv.psi[T])!r}\n")
