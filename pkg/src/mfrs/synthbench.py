"""Compose synthetic benchmarks and their closed-form optimal errors.

X = Z + U, where Z is a per-channel sum of four sines and U is i.i.d. noise
(Gaussian or Poisson). The best any forecaster can do is predict Z exactly and
E[U] for the noise, so the optimal MSE is Var[U] and the optimal MAE is the
mean absolute deviation of U.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .seriescore import MultiSeries

__all__ = [
    "SHORT_PERIODS",
    "LONG_PERIODS",
    "FAMILIES",
    "GaussianNoise",
    "PoissonNoise",
    "ComposeSpec",
    "ComposeData",
    "OptimalMetrics",
    "OptimalityReport",
    "compose_spec",
    "generate_compose",
    "poisson_inverse_cdf",
    "optimal_metrics",
    "optimal_prediction_check",
]

SHORT_PERIODS = (72, 36, 24, 18)
LONG_PERIODS = (720, 360, 240, 180)
MC_SAMPLES = 1_000_000


@dataclass(frozen=True)
class GaussianNoise:
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.sigma >= 0 and math.isfinite(self.sigma) and math.isfinite(self.mu)):
            raise ValidationError(f"invalid Gaussian parameters mu={self.mu}, sigma={self.sigma}")

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def variance(self) -> float:
        return self.sigma ** 2

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.sigma * rng.standard_normal(size) + self.mu


@dataclass(frozen=True)
class PoissonNoise:
    lam: float = 1.0

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValidationError(f"Poisson intensity must be > 0, got {self.lam}")

    @property
    def mean(self) -> float:
        return self.lam

    @property
    def variance(self) -> float:
        return self.lam

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return poisson_inverse_cdf(rng.random(size), self.lam)


FAMILIES = {
    "compose1": (SHORT_PERIODS, "gaussian"),
    "compose2": (LONG_PERIODS, "gaussian"),
    "compose3": (SHORT_PERIODS, "poisson"),
    "compose4": (LONG_PERIODS, "poisson"),
}


def poisson_inverse_cdf(u: np.ndarray, lam: float) -> np.ndarray:
    """Map uniforms in [0, 1) to Poisson(lam) counts by CDF inversion."""
    u = np.asarray(u, dtype=np.float64)
    kmax = int(lam + 12.0 * math.sqrt(lam) + 30)
    k = np.arange(kmax + 1)
    logpmf = k * math.log(lam) - lam - np.array([math.lgamma(i + 1) for i in k])
    cdf = np.cumsum(np.exp(logpmf))
    return np.minimum(np.searchsorted(cdf, u, side="right"), kmax).astype(np.float64)


@dataclass(frozen=True)
class ComposeSpec:
    periods: tuple[int, ...] = SHORT_PERIODS
    noise: GaussianNoise | PoissonNoise = field(default_factory=GaussianNoise)
    channels: int = 4
    length: int | None = None  # None: 20 * lcm(periods), capped at 100000
    seed: int = 0
    amplitudes: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        periods = tuple(int(p) for p in self.periods)
        if not periods or any(p < 1 for p in periods):
            raise ValidationError(f"periods must be positive integers, got {self.periods}")
        object.__setattr__(self, "periods", periods)
        if self.channels < 1:
            raise ValidationError(f"channels must be >= 1, got {self.channels}")
        if self.length is None:
            object.__setattr__(self, "length", min(20 * math.lcm(*periods), 100_000))
        if self.length < 2:
            raise ValidationError(f"length must be >= 2, got {self.length}")
        if self.amplitudes is not None:
            amps = np.asarray(self.amplitudes, dtype=np.float64)
            if amps.shape != (self.channels, len(periods)) or not np.all(np.isfinite(amps)):
                raise ValidationError(
                    f"amplitudes must be finite with shape {(self.channels, len(periods))}")
            object.__setattr__(self, "amplitudes", amps)

    def to_json(self) -> dict:
        noise = {"family": "gaussian", "mu": self.noise.mu, "sigma": self.noise.sigma} \
            if isinstance(self.noise, GaussianNoise) else {"family": "poisson", "lambda": self.noise.lam}
        return {"periods": list(self.periods), "noise": noise, "channels": self.channels,
                "length": self.length, "seed": self.seed}


def compose_spec(family: str, *, sigma: float = 1.0, mu: float = 0.0, lam: float = 1.0,
                 channels: int = 4, length: int | None = None, seed: int = 0) -> ComposeSpec:
    """ComposeSpec for one of the four named Compose families.

    compose4 is long-period sines plus Poisson noise.
    """
    if family not in FAMILIES:
        raise ValidationError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    periods, kind = FAMILIES[family]
    noise = GaussianNoise(mu, sigma) if kind == "gaussian" else PoissonNoise(lam)
    return ComposeSpec(periods, noise, channels, length, seed)


@dataclass(frozen=True)
class ComposeData:
    X: MultiSeries
    Z: MultiSeries
    U: MultiSeries
    amplitudes: np.ndarray
    spec: ComposeSpec


def generate_compose(spec: ComposeSpec) -> ComposeData:
    ss = np.random.SeedSequence(spec.seed)
    amp_seq, *chan_seqs = ss.spawn(spec.channels + 1)
    if spec.amplitudes is None:
        amps = np.random.default_rng(amp_seq).uniform(0.5, 2.0, (spec.channels, len(spec.periods)))
    else:
        amps = spec.amplitudes
    t = np.arange(spec.length, dtype=np.int64)
    basis = np.stack([np.sin(2.0 * np.pi * (t % p) / p) for p in spec.periods], axis=1)
    Z = basis @ amps.T
    U = np.stack([spec.noise.sample(np.random.default_rng(s), spec.length) for s in chan_seqs], axis=1)
    names = tuple(f"ch{i}" for i in range(spec.channels))
    return ComposeData(MultiSeries(Z + U, channel_names=names), MultiSeries(Z, channel_names=names),
                       MultiSeries(U, channel_names=names), amps, spec)


@dataclass(frozen=True)
class OptimalMetrics:
    mse_opt: float
    mae_opt: float
    family: str
    monte_carlo: bool = False
    mc_samples: int = 0
    mc_stderr: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)


def _poisson_mad(lam: int) -> float:
    # 2 e^{-lam} sum_{k<lam} (lam - k) lam^k / k!, accumulated in log space
    total = 0.0
    for k in range(lam):
        total += (lam - k) * math.exp(k * math.log(lam) - lam - math.lgamma(k + 1))
    return 2.0 * total


def optimal_metrics(noise: GaussianNoise | PoissonNoise, seed: int = 0,
                    samples: int = MC_SAMPLES) -> OptimalMetrics:
    """Closed-form optimal MSE/MAE; Monte-Carlo MAE for non-integer Poisson intensity."""
    if isinstance(noise, GaussianNoise):
        return OptimalMetrics(noise.sigma ** 2, math.sqrt(2.0 / math.pi) * noise.sigma, "gaussian")
    lam = noise.lam
    if float(lam).is_integer():
        return OptimalMetrics(lam, _poisson_mad(int(lam)), "poisson")
    u = noise.sample(np.random.default_rng(seed), samples)
    dev = np.abs(u - lam)
    return OptimalMetrics(lam, float(dev.mean()), "poisson", True, samples,
                          float(dev.std() / math.sqrt(samples)))


@dataclass(frozen=True)
class OptimalityReport:
    deltas: np.ndarray
    mse: np.ndarray  # empirical MSE of predicting E[U] + delta
    best_delta: float
    variance: float
    stderr: float  # standard error of the empirical MSE at delta = 0
    passed: bool


def optimal_prediction_check(noise: GaussianNoise | PoissonNoise, samples: int = 100_000,
                             deltas: Sequence[float] | None = None, seed: int = 0
                             ) -> OptimalityReport:
    """Empirically confirm that predicting E[U] minimizes the squared error.

    Passes when delta = 0 has the lowest MSE on the grid and that MSE is within
    three standard errors of Var[U].
    """
    if samples < 10_000:
        raise ValidationError(f"need at least 10^4 samples, got {samples}")
    if deltas is None:
        deltas = np.linspace(-1.0, 1.0, 41)
    deltas = np.asarray(deltas, dtype=np.float64)
    u = noise.sample(np.random.default_rng(seed), samples)
    err = u[None, :] - (noise.mean + deltas[:, None])
    mse = (err ** 2).mean(axis=1)
    sq0 = (u - noise.mean) ** 2
    stderr = float(sq0.std() / math.sqrt(samples))
    best = float(deltas[int(np.argmin(mse))])
    zero = int(np.argmin(np.abs(deltas)))
    passed = bool(deltas[zero] == 0.0 and int(np.argmin(mse)) == zero
                  and abs(sq0.mean() - noise.variance) <= 3 * stderr)
    return OptimalityReport(deltas, mse, best, noise.variance, stderr, passed)
