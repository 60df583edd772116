"""Multi-frequency reference-series forecasting toolkit.

Extract dominant periods from a series, build a bank of synchronized periodic
reference signals, and train a small cross-attention forecaster that reads
both the recent observations and the references.
"""

from .alignment import AlignmentResult, align, intercept, pearson
from .basepatterns import BasePatternSet, ExtractionConfig, analyze, extract_hbp, extract_pbp
from .errors import (AlignmentError, ConfigurationError, MFRSError, NumericalError, RangeError,
                     ValidationError)
from .evalharness import EvalReport, channel_independence_test, evaluate, naive_baselines
from .forecaster import ForecastModel, ModelConfig, TrainConfig, predict, train
from .pipeline import PipelineResult, forecast_unlabeled, run_pipeline
from .refseries import ReferenceSeries, generate
from .seriescore import MultiSeries, SplitSpec, Window, chronological_split, read_csv, write_csv
from .spectral import magnitude_spectrum, to_period_domain
from .synthbench import compose_spec, generate_compose, optimal_metrics

__version__ = "0.1.0"
