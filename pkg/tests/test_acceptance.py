"""Acceptance checks, one test per criterion, each recording a PASS/FAIL line.

The training-based criteria (4, 5, 7, 9) take several minutes in total on one
core; everything else runs in seconds.
"""

import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from mfrs.alignment import align, intercept
from mfrs.basepatterns import BasePatternSet, analyze, harmonic_candidates
from mfrs.cli import main
from mfrs.evalharness import channel_independence_test
from mfrs.forecaster import ForecastModel, ModelConfig, TrainConfig, backward
from mfrs.pipeline import run_pipeline
from mfrs.seriescore import MultiSeries, write_csv
from mfrs.spectral import magnitude_spectrum, to_period_domain
from mfrs.synthbench import (GaussianNoise, PoissonNoise, compose_spec, generate_compose,
                             optimal_metrics)

from acceptance_log import record
from oracles import direct_dft_magnitudes, finite_difference_errors, sum_of_sines

# Optimal (MSE, MAE) at three decimals, Compose1 sigma = 1..5 and Compose3 lambda = 1..5
TABLE_GAUSSIAN = {1: (1, 0.798), 2: (4, 1.596), 3: (9, 2.394), 4: (16, 3.192), 5: (25, 3.989)}
TABLE_POISSON = {1: (1, 0.736), 2: (2, 1.083), 3: (3, 1.344), 4: (4, 1.563), 5: (5, 1.755)}
COMPOSE1_MSE_CEILING = 1.19  # 15% headroom over 1.037
COMPOSE_LENGTH = 14_400
SEED = 1


def _compose1_run(sigma: float, waveform: str = "sine"):
    spec = compose_spec("compose1", sigma=sigma, length=COMPOSE_LENGTH, seed=SEED)
    data = generate_compose(spec)
    t0 = time.perf_counter()
    result = run_pipeline(data.X, model_cfg=ModelConfig(lookback=96, horizon=96),
                          train_cfg=TrainConfig(seed=SEED), waveform=waveform,
                          optimal=optimal_metrics(spec.noise))
    return result, time.perf_counter() - t0


@pytest.fixture(scope="module")
def compose1_sigma1():
    return _compose1_run(1.0)


def test_criterion_01_period_recovery(tmp_path):
    data = generate_compose(compose_spec("compose1", sigma=0.0, length=COMPOSE_LENGTH, seed=SEED))
    write_csv(tmp_path / "X.csv", data.X)
    t0 = time.perf_counter()
    main(["analyze", "--input", str(tmp_path / "X.csv"), "--out", str(tmp_path / "an")])
    elapsed = time.perf_counter() - t0
    primary = set(json.loads((tmp_path / "an" / "basepatterns.json").read_text())["primary"])
    exact = primary == {18, 24, 36, 72}

    rng = np.random.default_rng(2024)
    hits, trials, misses = 0, 0, []
    while trials < 50:
        periods = sorted(set(rng.integers(2, 101, size=int(rng.integers(1, 5))).tolist()))
        L = 40 * math.lcm(*periods)
        if L > 2_000_000:
            continue
        trials += 1
        x = sum_of_sines(periods, L, rng.uniform(0.5, 2.0, len(periods)))
        got = set(analyze(MultiSeries(x)).primary_periods)
        if got == set(periods):
            hits += 1
        elif len(misses) < 3:
            misses.append(f"{periods}->{sorted(got)}")
    ok = exact and elapsed < 5.0 and hits == trials
    record(1, ok, f"Compose {{18,24,36,72}} L={COMPOSE_LENGTH} -> {sorted(primary)} in {elapsed:.2f}s; "
                  f"random subsets exact {hits}/{trials} (e.g. {'; '.join(misses)})")
    assert ok


def test_criterion_02_harmonic_orders():
    expected = {Fraction(k, 24) for k in range(2, 13)} | {Fraction(2, 168), Fraction(3, 168)}
    got = set(harmonic_candidates([24, 168]))
    ok = got == expected
    record(2, ok, f"[24,168] candidates: {len(got)} of {len(expected)} expected, equal={ok}")
    assert ok


def test_criterion_03_optimal_metric_oracles():
    bad = []
    for s, (mse, mae) in TABLE_GAUSSIAN.items():
        m = optimal_metrics(GaussianNoise(0, s))
        if (round(m.mse_opt, 3), round(m.mae_opt, 3)) != (mse, mae):
            bad.append(f"sigma={s}")
    for lam, (mse, mae) in TABLE_POISSON.items():
        m = optimal_metrics(PoissonNoise(lam))
        if (round(m.mse_opt, 3), round(m.mae_opt, 3)) != (mse, mae):
            bad.append(f"lambda={lam}")
    worst_z = 0.0
    for s in (1, 2, 3, 4, 5):
        dev = np.abs(GaussianNoise(0, s).sample(np.random.default_rng(1000 + s), 1_000_000))
        worst_z = max(worst_z, abs(dev.mean() - optimal_metrics(GaussianNoise(0, s)).mae_opt) / (dev.std() / 1000))
    for lam in (1, 2, 3, 4, 5):
        dev = np.abs(PoissonNoise(lam).sample(np.random.default_rng(1000 + lam), 1_000_000) - lam)
        worst_z = max(worst_z, abs(dev.mean() - optimal_metrics(PoissonNoise(lam)).mae_opt) / (dev.std() / 1000))
    ok = not bad and worst_z < 3.0
    record(3, ok, f"table mismatches: {bad or 'none'}; worst Monte-Carlo deviation {worst_z:.2f} SE at 1e6 samples")
    assert ok


def test_criterion_04_compose1_reproduction(compose1_sigma1):
    result, elapsed = compose1_sigma1
    n = result.splits[2].length * result.splits[2].channels
    slack = 3 * math.sqrt(2.0 / n)
    mse = result.report.mse
    noisy_ok = 1.0 - slack <= mse <= COMPOSE1_MSE_CEILING and elapsed < 600
    clean, clean_time = _compose1_run(0.0)
    ok = noisy_ok and clean.report.mse < 0.01 and clean_time < 600
    record(4, ok, f"sigma=1 test MSE {mse:.4f} (bounds [{1 - slack:.4f}, {COMPOSE1_MSE_CEILING:.4f}], "
                  f"{elapsed:.0f}s); sigma=0 test MSE {clean.report.mse:.2e} ({clean_time:.0f}s)")
    assert ok


def test_criterion_05_long_period_advantage():
    spec = compose_spec("compose2", sigma=0.0, length=COMPOSE_LENGTH, seed=SEED)
    data = generate_compose(spec)
    with pytest.warns(UserWarning, match="seasonal-naive skipped"):
        result = run_pipeline(data.X, model_cfg=ModelConfig(lookback=96, horizon=720),
                              train_cfg=TrainConfig(seed=SEED),
                              patterns=BasePatternSet(manual_periods=(180, 240, 360, 720)))
    repeat = result.baselines["repeat_last"].mse
    ok = result.report.mse < 0.2 and "seasonal_naive" not in result.baselines and repeat > 1.0
    record(5, ok, f"Compose2 T=720 test MSE {result.report.mse:.4f} (< 0.2); repeat-last {repeat:.3f} (> 1); "
                  f"seasonal-naive {'skipped' if 'seasonal_naive' not in result.baselines else 'ran'}")
    assert ok


def test_criterion_06_gradient_check():
    t0 = time.perf_counter()
    cfg = ModelConfig(lookback=8, horizon=4, hidden=6, blocks=1, heads=1)
    model = ForecastModel.init(cfg, seed=SEED)
    rng = np.random.default_rng(SEED)
    x, r, y = rng.normal(size=(2, 8, 2)), rng.normal(size=(2, 8, 2)), rng.normal(size=(2, 4, 2))
    _, grads = backward(model, x, r, y)
    errors = finite_difference_errors(model, x, r, y, grads, h=1e-5)
    worst = max(errors, key=errors.get)
    elapsed = time.perf_counter() - t0
    ok = errors[worst] < 1e-4 and elapsed < 30
    record(6, ok, f"max relative error {errors[worst]:.2e} ({worst}) over {len(errors)} tensors in {elapsed:.1f}s")
    assert ok


def test_criterion_07_channel_additivity(compose1_sigma1):
    result, _ = compose1_sigma1
    rng = np.random.default_rng(SEED)
    fresh = ForecastModel.init(ModelConfig(), seed=SEED)
    x_rand, r_rand = rng.normal(size=(96, 4)), rng.normal(size=(96, fresh_n := 5))
    a = channel_independence_test(fresh, x_rand, r_rand)
    te = result.splits[2]
    x = te.values[:96]
    b = channel_independence_test(result.model, x, result.rs.values[te.start:te.start + 96])

    class Coupled:
        def forward(self, lookback, rs_block):
            out = result.model.forward(lookback, rs_block)
            return out + 0.1 * np.asarray(lookback).mean(axis=(-2, -1), keepdims=True)

    c = channel_independence_test(Coupled(), x, result.rs.values[te.start:te.start + 96])
    ok = a.passed and b.passed and not c.passed
    record(7, ok, f"fresh dev {a.max_deviation:.1e}, trained dev {b.max_deviation:.1e}, "
                  f"coupled control dev {c.max_deviation:.1e} ({'caught' if not c.passed else 'missed'}); N={fresh_n}")
    assert ok


def test_criterion_08_alignment():
    # every channel contributes to the score; channel 0 alone is tallied for the record
    rng = np.random.default_rng(SEED)
    correct = single = 0
    S, TM = 96, 72
    for trial in range(100):
        sigma = float(rng.uniform(0.0, 0.5))
        data = generate_compose(compose_spec("compose1", sigma=sigma, length=6000, seed=int(rng.integers(1 << 30))))
        X = data.X.values
        block, off = intercept(X[:4000], TM, S)
        start = int(rng.integers(4000, 6000 - S))
        res = align(X[start:start + S], block, TM, channels=None)
        correct += (off + res.xi) % TM == start % TM
        single += (off + align(X[start:start + S], block, TM).xi) % TM == start % TM

    obs = X[start:start + S].copy()
    base = align(obs, block, TM, channels=None).scores
    obs[:, 2] = 3.7 * obs[:, 2] - 11.0
    drift = float(np.max(np.abs(align(obs, block, TM, channels=None).scores - base)))
    ok = correct >= 99 and drift < 1e-12
    record(8, ok, f"offset recovered in {correct}/100 trials (sigma in [0, 0.5], all channels; "
                  f"channel 0 alone {single}/100); affine score drift {drift:.1e}")
    assert ok


def test_criterion_09_waveform_ablation(compose1_sigma1):
    mses = {"sine": compose1_sigma1[0].report.mse}
    for wf in ("sawtooth", "rectangle", "pulse"):
        mses[wf] = _compose1_run(1.0, wf)[0].report.mse
    spread = max(mses.values()) / min(mses.values())
    ok = spread <= 1.10
    record(9, ok, "test MSE " + ", ".join(f"{k} {v:.4f}" for k, v in mses.items()) + f"; max/min {spread:.4f}")
    assert ok


def test_criterion_10_direct_dft_agreement():
    worst = 0.0
    for L in (16, 97, 256, 1000, 2048):
        x = np.random.default_rng(L).normal(size=L) + sum_of_sines([7, 24], L)
        spec = magnitude_spectrum(x)
        full = direct_dft_magnitudes(x)
        worst = max(worst, float(np.max(np.abs(spec.magnitudes - full[1:spec.max_bin + 1]) / full.max())))
    pv = to_period_domain(magnitude_spectrum(np.sin(2 * np.pi * np.arange(1000) / 24)), 200)
    ok = worst < 1e-9 and int(np.argmax(pv.psi)) == 24
    record(10, ok, f"FFT vs direct DFT worst relative deviation {worst:.1e} on L <= 2048; "
                   "open-dataset benchmark tables out of scope at desk scale")
    assert ok
