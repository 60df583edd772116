"""Multichannel series container, windows, splits and CSV I/O.

All time indices are 0-based. A ``MultiSeries`` remembers ``start``, the
absolute position of its first row on the timeline of the dataset it was cut
from, so that reference series can be sliced in step with any split.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigurationError, RangeError, ValidationError

__all__ = [
    "MultiSeries",
    "Window",
    "SplitSpec",
    "slice_window",
    "chronological_split",
    "iter_windows",
    "count_windows",
    "read_csv",
    "write_csv",
    "write_matrix_csv",
]


@dataclass(frozen=True)
class MultiSeries:
    """An L x C real matrix, one column per channel.

    ``values`` is copied to a read-only float64 array on construction.
    """

    values: np.ndarray
    step_hint: str | None = None
    channel_names: tuple[str, ...] | None = None
    start: int = 0
    timestamps: tuple[str, ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ValidationError(f"values must be 2-D (L x C), got shape {arr.shape}")
        L, C = arr.shape
        if L < 2 or C < 1:
            raise ValidationError(f"need L >= 2 and C >= 1, got L={L}, C={C}")
        if not np.all(np.isfinite(arr)):
            r, c = np.argwhere(~np.isfinite(arr))[0]
            raise ValidationError(f"non-finite value at row {r}, column {c}")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        if self.channel_names is not None:
            names = tuple(str(n) for n in self.channel_names)
            if len(names) != C:
                raise ValidationError(f"{len(names)} channel names for {C} channels")
            object.__setattr__(self, "channel_names", names)
        if self.timestamps is not None:
            ts = tuple(self.timestamps)
            if len(ts) != L:
                raise ValidationError(f"{len(ts)} timestamps for {L} rows")
            object.__setattr__(self, "timestamps", ts)
        if self.start < 0:
            raise ValidationError(f"start must be >= 0, got {self.start}")

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    def rows(self, lo: int, hi: int) -> "MultiSeries":
        """Contiguous sub-series of rows [lo, hi) with ``start`` shifted accordingly."""
        if not 0 <= lo < hi <= self.length:
            raise RangeError(f"row range [{lo}, {hi}) outside [0, {self.length})")
        ts = self.timestamps[lo:hi] if self.timestamps is not None else None
        return MultiSeries(self.values[lo:hi], self.step_hint, self.channel_names,
                           self.start + lo, ts)

    def channel(self, i: int) -> "MultiSeries":
        names = (self.channel_names[i],) if self.channel_names is not None else None
        return MultiSeries(self.values[:, i:i + 1], self.step_hint, names,
                           self.start, self.timestamps)


@dataclass(frozen=True)
class Window:
    start: int
    lookback: int
    horizon: int

    def __post_init__(self):
        if self.lookback < 1:
            raise ValidationError(f"lookback must be >= 1, got {self.lookback}")
        if self.horizon < 1:
            raise ValidationError(f"horizon must be >= 1, got {self.horizon}")
        if self.start < 0:
            raise RangeError(f"window start {self.start} is negative")

    @property
    def stop(self) -> int:
        return self.start + self.lookback + self.horizon


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.7
    val_frac: float = 0.1
    test_frac: float = 0.2

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if not all(0.0 < f < 1.0 for f in fracs):
            raise ValidationError(f"split fractions must lie in (0, 1), got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must sum to 1, got {sum(fracs)!r}")


def slice_window(series: MultiSeries, w: Window) -> tuple[np.ndarray, np.ndarray]:
    """Return copies of the lookback (S x C) and horizon (T x C) blocks."""
    if w.stop > series.length:
        raise RangeError(
            f"window start={w.start} needs rows up to index {w.stop - 1}, "
            f"series has L={series.length}"
        )
    mid = w.start + w.lookback
    return series.values[w.start:mid].copy(), series.values[mid:w.stop].copy()


def count_windows(length: int, lookback: int, horizon: int) -> int:
    return max(0, length - lookback - horizon + 1)


def iter_windows(series: MultiSeries, lookback: int, horizon: int) -> Iterator[Window]:
    """All stride-1 windows of the series, in time order."""
    for t in range(count_windows(series.length, lookback, horizon)):
        yield Window(t, lookback, horizon)


def chronological_split(series: MultiSeries, spec: SplitSpec = SplitSpec()
                        ) -> tuple[MultiSeries, MultiSeries, MultiSeries]:
    L = series.length
    n_train = math.floor(spec.train_frac * L)
    n_val = math.floor(spec.val_frac * L)
    n_test = L - n_train - n_val
    for name, n in (("train", n_train), ("val", n_val), ("test", n_test)):
        if n < 2:
            raise ConfigurationError(f"{name} segment has length {n} < 2 (L={L}, {spec})")
    return (series.rows(0, n_train),
            series.rows(n_train, n_train + n_val),
            series.rows(n_train + n_val, L))


def _is_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_csv(source: str | Path | io.TextIOBase, step_hint: str | None = None) -> MultiSeries:
    """Parse a CSV file into a MultiSeries.

    A first row containing any non-numeric cell is a header. A leading column
    whose data cells are non-numeric is treated as timestamps and kept as
    metadata. Any other unparsable cell raises with its 1-based row/column.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    else:
        rows = [r for r in csv.reader(source) if r]
    if not rows:
        raise ValidationError("empty CSV")

    header = None
    first_data = 0
    if not all(_is_float(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        first_data = 1
    if len(rows) - first_data < 2:
        raise ValidationError("CSV needs at least two data rows")

    has_ts = not _is_float(rows[first_data][0])
    col0 = 1 if has_ts else 0
    width = len(rows[first_data])
    values = np.empty((len(rows) - first_data, width - col0))
    timestamps = [] if has_ts else None
    for i, row in enumerate(rows[first_data:]):
        lineno = i + first_data + 1
        if len(row) != width:
            raise ValidationError(f"row {lineno}: expected {width} columns, got {len(row)}")
        if has_ts:
            timestamps.append(row[0])
        for j in range(col0, width):
            try:
                values[i, j - col0] = float(row[j])
            except ValueError:
                raise ValidationError(
                    f"unparsable cell {row[j]!r} at row {lineno}, column {j + 1}") from None
    names = tuple(header[col0:]) if header is not None else None
    return MultiSeries(values, step_hint=step_hint, channel_names=names,
                       timestamps=tuple(timestamps) if has_ts else None)


def write_matrix_csv(path: str | Path, values: np.ndarray, header: Sequence[str] | None = None):
    """Write a matrix with round-trip exact float formatting."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in values:
            w.writerow([repr(float(v)) for v in row])


def write_csv(path: str | Path, series: MultiSeries):
    names = series.channel_names or tuple(f"ch{i}" for i in range(series.channels))
    if series.timestamps is None:
        write_matrix_csv(path, series.values, names)
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("timestamp",) + tuple(names))
        for ts, row in zip(series.timestamps, series.values):
            w.writerow([ts] + [repr(float(v)) for v in row])
