from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfrs.errors import ConfigurationError, NumericalError, RangeError, ValidationError
from mfrs.forecaster import (ForecastModel, ModelConfig, TrainConfig, WindowBatcher, backward,
                             loss_mse, normalize_instance, predict, train)
from mfrs.refseries import generate
from mfrs.seriescore import MultiSeries, chronological_split

from oracles import finite_difference_errors, sum_of_sines

TINY = ModelConfig(lookback=8, horizon=4, hidden=6, blocks=1, heads=1)


def tiny_batch(seed=0, batch=3, C=2, N=2, cfg=TINY):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(batch, cfg.lookback, C)) * 2 + 1
    r = rng.normal(size=(batch, cfg.rs_lookback, N))
    y = rng.normal(size=(batch, cfg.horizon, C))
    return x, r, y


class TestNormalize:
    def test_constant(self):
        xn, mean, var = normalize_instance(np.full(5, 3.0))
        np.testing.assert_array_equal(xn, 0.0)
        assert (mean, var) == (3.0, 0.0)

    def test_two_points(self):
        xn, mean, var = normalize_instance(np.array([0.0, 2.0]))
        assert (mean, var) == (1.0, 1.0)
        np.testing.assert_allclose(xn, [-1, 1], rtol=1e-9)

    @settings(max_examples=30)
    @given(seed=st.integers(0, 10_000), n=st.integers(2, 200))
    def test_random_vector_moments(self, seed, n):
        x = np.random.default_rng(seed).normal(size=n) * 5 + 3
        xn, _, _ = normalize_instance(x)
        assert abs(xn.mean()) < 1e-12
        v = x.var()
        assert xn.var() == pytest.approx(v / (v + 1e-10), rel=1e-12)


class TestLoss:
    def test_examples(self):
        assert loss_mse(np.ones((3, 2)), np.ones((3, 2))) == 0.0
        assert loss_mse(np.zeros((4, 2)), np.ones((4, 2))) == 1.0
        assert loss_mse([[1.0], [2.0]], [[0.0], [0.0]]) == 2.5

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            loss_mse(np.zeros((3, 2)), np.zeros((2, 3)))


class TestForward:
    def test_zero_projection_returns_lookback_mean(self):
        model = ForecastModel.init(ModelConfig(lookback=16, horizon=5, hidden=8), seed=1)
        model.params["projection.weight"].data[:] = 0
        model.params["projection.bias"].data[:] = 0
        x = np.random.default_rng(0).normal(size=(16, 3)) + [1, -2, 5]
        pred = model(x, np.random.default_rng(1).normal(size=(16, 4)))
        np.testing.assert_allclose(pred, np.tile(x.mean(axis=0), (5, 1)), atol=1e-12)

    def test_channel_permutation_equivariance(self):
        model = ForecastModel.init(TINY, seed=3)
        x, r, _ = tiny_batch(C=4)
        perm = [2, 0, 3, 1]
        np.testing.assert_allclose(model(x[:, :, perm], r), model(x, r)[:, :, perm], atol=1e-12)

    @pytest.mark.parametrize("heads,blocks", [(1, 1), (2, 2), (3, 1)])
    def test_attention_rows_are_probabilities(self, heads, blocks):
        cfg = ModelConfig(lookback=8, horizon=4, hidden=6, heads=heads, blocks=blocks)
        model = ForecastModel.init(cfg, seed=0)
        model(*tiny_batch(N=5, cfg=cfg)[:2])
        assert len(model.last_attention) == blocks
        for a in model.last_attention:
            assert a.shape == (3, heads, 2, 5)
            assert np.all(a >= 0)
            np.testing.assert_allclose(a.sum(axis=-1), 1.0, atol=1e-12)

    def test_separate_rs_embedding_when_lengths_differ(self):
        cfg = ModelConfig(lookback=8, horizon=4, hidden=6, rs_lookback=12)
        model = ForecastModel.init(cfg)
        assert "rs_embed.weight" in model.params
        x, r, _ = tiny_batch(cfg=cfg)
        assert model(x, r).shape == (3, 4, 2)

    def test_shape_errors_name_expected_shape(self):
        model = ForecastModel.init(TINY)
        with pytest.raises(ValidationError, match=r"expected \(batch, 8, C\)"):
            model(np.zeros((7, 2)), np.zeros((8, 2)))
        with pytest.raises(ValidationError, match="rs block"):
            model(np.zeros((8, 2)), np.zeros((9, 2)))

    @settings(max_examples=20, deadline=None)
    @given(alpha=st.floats(0.5, 100), beta=st.floats(-1e3, 1e3))
    def test_affine_equivariance(self, alpha, beta):
        # exact up to the normalization epsilon, whose relative effect is eps / (alpha^2 var)
        model = ForecastModel.init(TINY, seed=2)
        x, r, _ = tiny_batch()
        base = model(x, r)
        np.testing.assert_allclose(model(alpha * x + beta, r), alpha * base + beta,
                                   rtol=1e-9, atol=1e-9 * max(1.0, abs(beta), alpha))


class TestBackward:
    def test_matches_finite_differences(self):
        model = ForecastModel.init(TINY, seed=4)
        x, r, y = tiny_batch(seed=4)
        _, grads = backward(model, x, r, y)
        errors = finite_difference_errors(model, x, r, y, grads)
        assert max(errors.values()) < 1e-4, errors

    def test_zero_loss_zero_gradient(self):
        model = ForecastModel.init(TINY, seed=1)
        x, r, _ = tiny_batch()
        loss, grads = backward(model, x, r, model(x, r))
        assert loss == 0.0
        for g in grads.values():
            np.testing.assert_array_equal(g, 0.0)

    def test_gradients_cover_every_parameter(self):
        model = ForecastModel.init(ModelConfig(lookback=8, horizon=4, hidden=6, rs_lookback=5), seed=0)
        x, r, y = tiny_batch(cfg=model.config)
        _, grads = backward(model, x, r, y)
        assert set(grads) == set(model.params)
        assert all(np.abs(g).sum() > 0 for g in grads.values())

    def test_non_finite_gradient_names_parameter(self):
        model = ForecastModel.init(TINY)
        model.params["projection.weight"].data[0, 0] = np.inf
        with pytest.raises(NumericalError, match="projection"):
            backward(model, *tiny_batch())


def toy_series(L=600, C=2):
    x = np.stack([sum_of_sines([12, 30], L, [1.0, 0.5 + c]) for c in range(C)], axis=1)
    return MultiSeries(x)


def toy_rs(L=600):
    return generate([Fraction(1, 30), Fraction(1, 12)], L)


class TestTraining:
    cfg = ModelConfig(lookback=24, horizon=6, hidden=8)

    def test_zero_learning_rate_keeps_parameters(self):
        tr, va, _ = chronological_split(toy_series())
        model = ForecastModel.init(self.cfg, seed=0)
        before = model.state()
        train(model, tr, va, toy_rs(), TrainConfig(epochs=1, lr=0.0))
        for k, v in model.state().items():
            assert np.array_equal(v, before[k]), k

    @pytest.mark.parametrize("optimizer", ["adam", "sgd"])
    def test_same_seed_same_history(self, optimizer):
        tr, va, _ = chronological_split(toy_series())
        cfg = TrainConfig(epochs=3, seed=5, optimizer=optimizer, lr=1e-2)
        runs = [train(ForecastModel.init(self.cfg, seed=5), tr, va, toy_rs(), cfg) for _ in range(2)]
        assert runs[0][1] == runs[1][1]
        for k, v in runs[0][0].state().items():
            assert np.array_equal(v, runs[1][0].state()[k])

    def test_loss_decreases(self):
        tr, va, _ = chronological_split(toy_series())
        _, hist = train(ForecastModel.init(self.cfg, seed=0), tr, va, toy_rs(),
                        TrainConfig(epochs=8, lr=3e-3, batch_size=16))
        assert hist[-1]["train_mse"] < hist[0]["train_mse"]

    def test_early_stopping_restores_best(self):
        tr, va, _ = chronological_split(toy_series())
        model, hist = train(ForecastModel.init(self.cfg, seed=0), tr, va, toy_rs(),
                            TrainConfig(epochs=40, lr=5e-2, patience=1))
        assert len(hist) <= 40
        best = min(h["val_mse"] for h in hist)
        batcher = WindowBatcher(va, toy_rs(), self.cfg)
        x, r, y = batcher.batch(np.arange(len(batcher)))
        assert loss_mse(model(x, r), y) == pytest.approx(best, rel=1e-12)

    def test_no_window_is_configuration_error(self):
        s = toy_series(L=20)
        with pytest.raises(ConfigurationError):
            train(ForecastModel.init(self.cfg), s, None, toy_rs(), TrainConfig(epochs=1))

    def test_reference_bank_too_short(self):
        with pytest.raises(RangeError):
            WindowBatcher(toy_series(), toy_rs(L=300), self.cfg)

    def test_batcher_slices_rs_at_absolute_start(self):
        _, va, _ = chronological_split(toy_series())
        rs = toy_rs()
        x, r, y = WindowBatcher(va, rs, self.cfg).batch([3])
        np.testing.assert_array_equal(r[0], rs.values[va.start + 3:va.start + 3 + 24])
        np.testing.assert_array_equal(x[0], va.values[3:27])
        np.testing.assert_array_equal(y[0], va.values[27:33])


class TestPredictAndCheckpoint:
    def test_shift_by_common_period(self):
        model = ForecastModel.init(ModelConfig(lookback=24, horizon=6, hidden=8), seed=0)
        rs = toy_rs()
        obs = toy_series().values[:24]
        np.testing.assert_array_equal(predict(model, obs, rs, 7), predict(model, obs, rs, 7 + 60))

    def test_xi_out_of_range(self):
        model = ForecastModel.init(ModelConfig(lookback=24, horizon=6, hidden=8))
        with pytest.raises(RangeError):
            predict(model, np.zeros((24, 1)), toy_rs(), 600 - 23)

    def test_round_trip(self, tmp_path):
        model = ForecastModel.init(ModelConfig(lookback=8, horizon=4, hidden=6, blocks=2, heads=2), seed=9)
        model.meta = {"note": "x"}
        model.save(tmp_path / "m.json")
        back = ForecastModel.load(tmp_path / "m.json")
        assert back.config == model.config and back.meta == model.meta
        x, r, _ = tiny_batch()
        np.testing.assert_array_equal(back(x, r), model(x, r))

    def test_load_rejects_bad_shapes(self, tmp_path):
        import json
        model = ForecastModel.init(TINY)
        model.save(tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text())
        doc["params"]["projection.bias"]["shape"] = [5]
        (tmp_path / "bad.json").write_text(json.dumps(doc))
        with pytest.raises(ValidationError):
            ForecastModel.load(tmp_path / "bad.json")
        doc["format_version"] = 99
        (tmp_path / "bad.json").write_text(json.dumps(doc))
        with pytest.raises(ValidationError, match="version"):
            ForecastModel.load(tmp_path / "bad.json")
