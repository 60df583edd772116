"""Primary and harmonic base-pattern extraction.

Primary patterns are integer periods picked from the period view by a
left-to-right argmax sweep; harmonic patterns are integer multiples of the
primary frequencies, ranked by their spectral amplitude summed over channels.
Frequencies are carried as :class:`fractions.Fraction` so downstream waveform
generation stays in integer arithmetic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .seriescore import MultiSeries
from .spectral import (PeriodView, SpectrumView, default_conversion_length,
                       magnitude_spectrum, nearest_bin, to_period_domain)

__all__ = [
    "ExtractionConfig",
    "BasePatternSet",
    "extract_pbp",
    "pbp_sweep",
    "harmonic_candidates",
    "harmonic_orders",
    "extract_hbp",
    "merge_manual",
    "all_frequencies",
    "max_period",
    "analyze",
    "channel_spectra",
    "pooled_period_view",
]


@dataclass(frozen=True)
class ExtractionConfig:
    L_p: int | None = None  # None: min(5000, L // 4)
    Q: int = 8
    min_channels: int | None = None  # None: every channel

    def __post_init__(self):
        if self.Q < 0:
            raise ValidationError(f"Q must be >= 0, got {self.Q}")
        if self.L_p is not None and self.L_p < 2:
            raise ValidationError(f"L_p must be >= 2, got {self.L_p}")
        if self.min_channels is not None and self.min_channels < 1:
            raise ValidationError(f"min_channels must be >= 1, got {self.min_channels}")


@dataclass(frozen=True)
class BasePatternSet:
    primary_periods: tuple[int, ...] = ()
    harmonic_freqs: tuple[tuple[Fraction, float], ...] = ()
    manual_periods: tuple[int, ...] = field(default=())

    def __post_init__(self):
        p = tuple(int(x) for x in self.primary_periods)
        if any(b <= a for a, b in zip(p, p[1:])):
            raise ValidationError(f"primary periods must be strictly increasing: {p}")
        if p and p[0] < 2:
            raise ValidationError(f"primary periods must be >= 2: {p}")
        object.__setattr__(self, "primary_periods", p)
        object.__setattr__(self, "harmonic_freqs",
                           tuple((Fraction(f), float(s)) for f, s in self.harmonic_freqs))
        object.__setattr__(self, "manual_periods", tuple(int(x) for x in self.manual_periods))

    def is_empty(self) -> bool:
        return not (self.primary_periods or self.harmonic_freqs or self.manual_periods)

    def to_json(self) -> dict:
        return {
            "primary": list(self.primary_periods),
            "harmonics": [{"num": f.numerator, "den": f.denominator, "score": s}
                          for f, s in self.harmonic_freqs],
            "manual": list(self.manual_periods),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BasePatternSet":
        return cls(tuple(obj.get("primary", ())),
                   tuple((Fraction(h["num"], h["den"]), h.get("score", 0.0))
                         for h in obj.get("harmonics", ())),
                   tuple(obj.get("manual", ())))

    def save(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "BasePatternSet":
        return cls.from_json(json.loads(Path(path).read_text()))


def pbp_sweep(psi: np.ndarray, conversion_length: int) -> tuple[list[int], np.ndarray]:
    """One pass of the primary-period sweep; returns the hits and the zeroed working copy."""
    psi = np.array(psi, dtype=np.float64, copy=True)
    found = []
    for T in range(2, conversion_length // 2 + 1):
        # psi[1 : 2T + 1] holds periods 1..2T; np.argmax returns the first max
        if int(np.argmax(psi[1:2 * T + 1])) + 1 == T:
            found.append(T)
            psi[1:2 * T + 1] = 0.0
    return found, psi


def extract_pbp(pv: PeriodView, rtol: float = 1e-9) -> list[int]:
    """Sweep T = 2 .. L_p // 2; keep T when it is the argmax of psi[1..2T].

    Ties resolve to the smaller period. Each hit zeroes psi[1..2T] on a
    working copy before the sweep continues. Entries below ``rtol * max(psi)``
    are FFT round-off and are zeroed up front.
    """
    psi = np.array(pv.psi, dtype=np.float64, copy=True)
    if psi.size:
        psi[psi <= rtol * psi.max()] = 0.0
    return pbp_sweep(psi, pv.conversion_length)[0]


def harmonic_orders(primaries: Sequence[int]) -> list[tuple[int, int]]:
    """(period, K) per primary, periods ascending.

    K = floor(T_1 / 2) for the shortest period and floor(T_m / (2 T_{m-1}))
    for the rest.
    """
    periods = sorted(int(p) for p in primaries)
    out = []
    for m, T in enumerate(periods):
        K = T // 2 if m == 0 else T // (2 * periods[m - 1])
        out.append((T, K))
    return out


def harmonic_candidates(primaries: Sequence[int]) -> list[Fraction]:
    """Every k / T_m with 2 <= k <= K_m, first occurrence order, deduplicated."""
    orders = harmonic_orders(primaries)
    primary = {Fraction(1, T) for T, _ in orders}
    seen = {}
    for T, K in orders:
        for k in range(2, K + 1):
            f = Fraction(k, T)
            if f not in primary:
                seen.setdefault(f, None)
    return list(seen)


def _phi(spec: SpectrumView, f: Fraction) -> float:
    return spec.at_bin(nearest_bin(spec.length_L, f.numerator, f.denominator))


def extract_hbp(spectra: Sequence[SpectrumView], primaries: Sequence[int],
                cfg: ExtractionConfig = ExtractionConfig(),
                rtol: float = 1e-9) -> list[tuple[Fraction, float]]:
    """Top-Q harmonic candidates scored by magnitude relative to the fundamental.

    Each channel contributes phi(f) / phi(1 / T_1); channels with no energy at
    the fundamental (at or below ``rtol`` of the channel's peak) are skipped. Scores at or below ``rtol`` per contributing
    channel are round-off and dropped before ranking.
    """
    if not primaries:
        raise ValidationError("harmonic extraction needs at least one primary period")
    if not spectra:
        raise ValidationError("harmonic extraction needs at least one spectrum")
    periods = sorted(int(p) for p in primaries)
    base = Fraction(1, periods[0])
    used = spectra if cfg.min_channels is None else spectra[:cfg.min_channels]

    scores: dict[Fraction, float] = {f: 0.0 for f in harmonic_candidates(periods)}
    contributing = 0
    for spec in used:
        norm = _phi(spec, base)
        if norm <= rtol * float(spec.magnitudes.max(initial=0.0)) or norm <= 0.0:
            continue
        contributing += 1
        for f in scores:
            scores[f] += _phi(spec, f) / norm
    floor = rtol * contributing
    ranked = sorted(((f, s) for f, s in scores.items() if s > floor), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:cfg.Q]


def merge_manual(bps: BasePatternSet, manual: Iterable[int]) -> BasePatternSet:
    manual = [int(p) for p in manual]
    bad = [p for p in manual if p < 2]
    if bad:
        raise ValidationError(f"manual periods must be >= 2, got {bad}")
    taken = {Fraction(1, p) for p in bps.primary_periods + bps.manual_periods}
    taken.update(f for f, _ in bps.harmonic_freqs)
    extra = []
    for p in manual:
        f = Fraction(1, p)
        if f not in taken:
            taken.add(f)
            extra.append(p)
    if not extra:
        return bps
    return BasePatternSet(bps.primary_periods, bps.harmonic_freqs,
                          tuple(sorted(bps.manual_periods + tuple(extra))))


def all_frequencies(bps: BasePatternSet) -> list[Fraction]:
    if bps.is_empty():
        raise ValidationError("base-pattern set is empty")
    freqs = {Fraction(1, p) for p in bps.primary_periods + bps.manual_periods}
    freqs.update(f for f, _ in bps.harmonic_freqs)
    return sorted(freqs)


def max_period(bps: BasePatternSet) -> int:
    """Longest period among all patterns (a harmonic k/T counts as T/gcd = its denominator)."""
    return max(f.denominator for f in all_frequencies(bps))


def channel_spectra(series: MultiSeries) -> list[SpectrumView]:
    return [magnitude_spectrum(series.values[:, c]) for c in range(series.channels)]


def pooled_period_view(spectra: Sequence[SpectrumView], L_p: int | None = None) -> PeriodView:
    """Period view of the channel-averaged magnitude spectrum."""
    mean = np.mean([s.magnitudes for s in spectra], axis=0)
    return to_period_domain(SpectrumView(mean, spectra[0].length_L), L_p)


def analyze(series: MultiSeries, cfg: ExtractionConfig = ExtractionConfig(),
            manual: Iterable[int] = ()) -> BasePatternSet:
    """Primary + harmonic patterns of a whole series, then manual additions."""
    spectra = channel_spectra(series)
    L_p = cfg.L_p if cfg.L_p is not None else default_conversion_length(series.length)
    primaries = extract_pbp(pooled_period_view(spectra, L_p))
    harmonics = extract_hbp(spectra, primaries, cfg) if primaries else []
    return merge_manual(BasePatternSet(tuple(primaries), tuple(harmonics)), manual)
