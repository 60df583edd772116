"""Reference-series bank: one deterministic waveform column per base-pattern frequency.

A frequency ``k/T`` (a :class:`~fractions.Fraction`) is evaluated at integer
steps ``t = 0..L-1``:

=========  =============================
sine       sin(2*pi * ((k*t) mod T) / T)
sawtooth   (k*t) mod T
rectangle  floor(2*k*t / T) mod 2
pulse      1 if (k*t) mod T == 0 else 0
=========  =============================

The sine argument is reduced modulo T in integers first, which keeps columns
exactly periodic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import RangeError, ValidationError
from .seriescore import write_matrix_csv

__all__ = ["WAVEFORMS", "ReferenceSeries", "generate", "slice_rs", "column_name"]

WAVEFORMS = ("sine", "sawtooth", "rectangle", "pulse")


def _as_fraction(f) -> Fraction:
    if isinstance(f, Fraction):
        return f
    if isinstance(f, (int, np.integer)):
        return Fraction(int(f))
    if isinstance(f, tuple) and len(f) == 2:
        return Fraction(int(f[0]), int(f[1]))
    raise ValidationError(f"frequency {f!r} is not an exact rational k/T")


def column_name(f: Fraction) -> str:
    return f"rs_{f.numerator}_over_{f.denominator}"


def _column(k: int, T: int, L: int, waveform: str) -> np.ndarray:
    t = np.arange(L, dtype=np.int64)
    kt = k * t
    if waveform == "sine":
        return np.sin(2.0 * np.pi * (kt % T) / T)
    if waveform == "sawtooth":
        return (kt % T).astype(np.float64)
    if waveform == "rectangle":
        return ((2 * kt // T) % 2).astype(np.float64)
    return (kt % T == 0).astype(np.float64)


@dataclass(frozen=True)
class ReferenceSeries:
    values: np.ndarray
    frequencies: tuple[Fraction, ...]
    waveform: str

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]

    def header(self) -> list[str]:
        return [column_name(f) for f in self.frequencies]

    def metadata(self) -> dict:
        return {
            "waveform": self.waveform,
            "length": self.length,
            "frequencies": [{"num": f.numerator, "den": f.denominator} for f in self.frequencies],
        }

    def save(self, directory: str | Path, stem: str = "rs"):
        directory = Path(directory)
        write_matrix_csv(directory / f"{stem}.csv", self.values, self.header())
        (directory / f"{stem}.json").write_text(json.dumps(self.metadata(), indent=2) + "\n")


def generate(frequencies: Sequence, L: int, waveform: str = "sine") -> ReferenceSeries:
    if L < 1:
        raise ValidationError(f"reference length must be >= 1, got {L}")
    if waveform not in WAVEFORMS:
        raise ValidationError(f"unknown waveform {waveform!r}; choose from {WAVEFORMS}")
    freqs = tuple(_as_fraction(f) for f in frequencies)
    if not freqs:
        raise ValidationError("no frequencies given")
    for f in freqs:
        if f.numerator < 1 or f.denominator < 2:
            raise ValidationError(f"frequency {f} must be k/T with k >= 1, T >= 2")
    cols = [_column(f.numerator, f.denominator, L, waveform) for f in freqs]
    values = np.stack(cols, axis=1)
    values.flags.writeable = False
    return ReferenceSeries(values, freqs, waveform)


def slice_rs(rs: ReferenceSeries, start: int, span: int) -> np.ndarray:
    if start < 0 or span < 1 or start + span > rs.length:
        raise RangeError(f"rs slice [{start}, {start + span}) outside [0, {rs.length})")
    return rs.values[start:start + span].copy()
