"""End-to-end wiring: analyze the training split, build references, train, evaluate."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .alignment import AlignmentResult, align, intercept
from .basepatterns import BasePatternSet, ExtractionConfig, all_frequencies, analyze, max_period
from .evalharness import EvalReport, evaluate, naive_baselines
from .forecaster import ForecastModel, ModelConfig, TrainConfig, predict, train
from .refseries import ReferenceSeries, generate
from .seriescore import MultiSeries, SplitSpec, chronological_split
from .synthbench import OptimalMetrics

__all__ = ["PipelineResult", "run_pipeline", "forecast_unlabeled", "model_meta"]


@dataclass
class PipelineResult:
    patterns: BasePatternSet
    rs: ReferenceSeries
    model: ForecastModel
    history: list[dict]
    report: EvalReport
    baselines: dict[str, EvalReport] = field(default_factory=dict)
    splits: tuple[MultiSeries, MultiSeries, MultiSeries] | None = None


def model_meta(patterns: BasePatternSet, rs: ReferenceSeries) -> dict:
    return {"patterns": patterns.to_json(), "waveform": rs.waveform, "rs_length": rs.length}


def run_pipeline(series: MultiSeries, *, model_cfg: ModelConfig = ModelConfig(),
                 train_cfg: TrainConfig = TrainConfig(), split: SplitSpec = SplitSpec(),
                 extraction: ExtractionConfig = ExtractionConfig(), manual: Iterable[int] = (),
                 waveform: str = "sine", optimal: OptimalMetrics | None = None,
                 patterns: BasePatternSet | None = None) -> PipelineResult:
    """Train on the first split, early-stop on the second, report on the third.

    Base patterns come from the training split only unless ``patterns`` is given.
    """
    tr, va, te = chronological_split(series, split)
    if patterns is None:
        patterns = analyze(tr, extraction, manual)
    rs = generate(all_frequencies(patterns), series.length, waveform)
    model = ForecastModel.init(model_cfg, seed=train_cfg.seed)
    model.meta = model_meta(patterns, rs)
    model, history = train(model, tr, va, rs, train_cfg)
    report = evaluate(model, te, rs, optimal)
    lag = max(patterns.primary_periods + patterns.manual_periods, default=None)
    baselines = naive_baselines(te, model_cfg.lookback, model_cfg.horizon, lag, optimal)
    return PipelineResult(patterns, rs, model, history, report, baselines, (tr, va, te))


def forecast_unlabeled(model: ForecastModel, observation, train_values, rs: ReferenceSeries,
                       patterns: BasePatternSet, train_start: int = 0,
                       all_channels: bool = False) -> tuple[np.ndarray, AlignmentResult, int]:
    """Align an untimed observation against training data, then forecast.

    Returns the forecast, the alignment result and the absolute reference step used.
    """
    S = np.asarray(observation).shape[0]
    TM = max_period(patterns)
    block, off = intercept(train_values, TM, S)
    res = align(observation, block, TM, None if all_channels else (0,))
    step = train_start + off + res.xi
    return predict(model, observation, rs, step), res, step
