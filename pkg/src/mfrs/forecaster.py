"""Inverted-encoder cross-attention forecaster.

Every channel's lookback and every reference series is normalized and embedded
as one D-dimensional token. Channel tokens attend to reference tokens only,
never to each other, so channels are forecast independently with shared
weights. A linear head maps each channel token to the horizon and the
lookback mean/std are re-applied.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import autograd as ag
from .errors import ConfigurationError, NumericalError, RangeError, ValidationError
from .refseries import ReferenceSeries, slice_rs
from .seriescore import MultiSeries, count_windows

__all__ = [
    "ModelConfig",
    "TrainConfig",
    "ForecastModel",
    "normalize_instance",
    "loss_mse",
    "backward",
    "train",
    "predict",
    "WindowBatcher",
    "SGD",
    "Adam",
    "CHECKPOINT_VERSION",
]

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
LN_EPS = 1e-5


@dataclass(frozen=True)
class ModelConfig:
    lookback: int = 96
    horizon: int = 96
    hidden: int = 64
    rs_lookback: int | None = None  # None: same as lookback
    blocks: int = 1
    heads: int = 1
    ffn_mult: int = 4
    shared_embedding: bool = True
    epsilon_norm: float = 1e-10

    def __post_init__(self):
        if self.rs_lookback is None:
            object.__setattr__(self, "rs_lookback", self.lookback)
        for name in ("lookback", "horizon", "hidden", "rs_lookback", "blocks", "heads", "ffn_mult"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.hidden % self.heads:
            raise ValidationError(f"heads ({self.heads}) must divide hidden ({self.hidden})")
        if not self.epsilon_norm > 0:
            raise ValidationError("epsilon_norm must be positive")

    @property
    def shares_embedding(self) -> bool:
        return self.shared_embedding and self.rs_lookback == self.lookback


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    optimizer: str = "adam"
    patience: int = 5

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValidationError("epochs, batch_size and patience must be >= 1")
        if self.lr < 0:
            raise ValidationError(f"learning rate must be >= 0, got {self.lr}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")


def normalize_instance(x, eps: float = 1e-10, axis: int = 0):
    """(x - mean) / sqrt(var + eps) along ``axis``; returns (xn, mean, var)."""
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=axis, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=axis, keepdims=True)
    xn = (x - mean) / np.sqrt(var + eps)
    if x.ndim == 1:
        return xn, float(mean[0]), float(var[0])
    return xn, mean, var


def loss_mse(prediction, target) -> float:
    p = np.asarray(prediction, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValidationError(f"shape mismatch: prediction {p.shape}, target {t.shape}")
    return float(np.mean((p - t) ** 2))


class ForecastModel:
    """Parameters plus the forward pass. Build with :meth:`init`."""

    def __init__(self, config: ModelConfig, params: dict[str, ag.Tensor]):
        self.config = config
        self.params = params
        self.last_attention: list[np.ndarray] = []
        self.meta: dict = {}

    @classmethod
    def init(cls, config: ModelConfig, seed: int = 0) -> "ForecastModel":
        rng = np.random.default_rng(seed)
        D, F = config.hidden, config.hidden * config.ffn_mult
        shapes: list[tuple[str, int, int]] = [("variate_embed", config.lookback, D)]
        if not config.shares_embedding:
            shapes.append(("rs_embed", config.rs_lookback, D))
        params: dict[str, ag.Tensor] = {}

        def affine(name, fan_in, fan_out):
            bound = 1.0 / math.sqrt(fan_in)
            params[f"{name}.weight"] = rng.uniform(-bound, bound, (fan_in, fan_out))
            params[f"{name}.bias"] = rng.uniform(-bound, bound, fan_out)

        for name, i, o in shapes:
            affine(name, i, o)
        for b in range(config.blocks):
            p = f"blocks.{b}"
            for proj in ("query", "key", "value", "out"):
                affine(f"{p}.{proj}", D, D)
            params[f"{p}.norm1.gamma"] = np.ones(D)
            params[f"{p}.norm1.beta"] = np.zeros(D)
            affine(f"{p}.ffn1", D, F)
            affine(f"{p}.ffn2", F, D)
            params[f"{p}.norm2.gamma"] = np.ones(D)
            params[f"{p}.norm2.beta"] = np.zeros(D)
        affine("projection", D, config.horizon)
        return cls(config, {k: ag.Tensor(v, requires_grad=True, name=k) for k, v in params.items()})

    # -- forward -------------------------------------------------------

    def _check_shapes(self, lookback: np.ndarray, rs_block: np.ndarray):
        cfg = self.config
        if lookback.ndim != 3 or lookback.shape[1] != cfg.lookback:
            raise ValidationError(
                f"lookback block: expected (batch, {cfg.lookback}, C), got {lookback.shape}")
        if rs_block.ndim != 3 or rs_block.shape[1] != cfg.rs_lookback:
            raise ValidationError(
                f"rs block: expected (batch, {cfg.rs_lookback}, N), got {rs_block.shape}")
        if rs_block.shape[0] != lookback.shape[0]:
            raise ValidationError(
                f"batch mismatch: lookback {lookback.shape[0]}, rs {rs_block.shape[0]}")

    def _affine(self, x, name):
        p = self.params
        return ag.add(ag.matmul(x, p[f"{name}.weight"]), p[f"{name}.bias"])

    def forward_tensor(self, lookback: np.ndarray, rs_block: np.ndarray) -> ag.Tensor:
        """Batched forward returning a graph node of shape (batch, T, C)."""
        cfg = self.config
        self._check_shapes(lookback, rs_block)
        eps = cfg.epsilon_norm
        xn, mean, var = normalize_instance(lookback, eps, axis=1)
        rn, _, _ = normalize_instance(rs_block, eps, axis=1)
        B, _, C = lookback.shape
        N = rs_block.shape[2]
        H = cfg.heads
        dh = cfg.hidden // H

        h = self._affine(np.ascontiguousarray(xn.transpose(0, 2, 1)), "variate_embed")
        rs_name = "variate_embed" if cfg.shares_embedding else "rs_embed"
        r = self._affine(np.ascontiguousarray(rn.transpose(0, 2, 1)), rs_name)

        self.last_attention = []
        scale = 1.0 / math.sqrt(dh)
        for b in range(cfg.blocks):
            p = f"blocks.{b}"
            q = ag.transpose(ag.reshape(self._affine(h, f"{p}.query"), (B, C, H, dh)), (0, 2, 1, 3))
            k = ag.transpose(ag.reshape(self._affine(r, f"{p}.key"), (B, N, H, dh)), (0, 2, 3, 1))
            v = ag.transpose(ag.reshape(self._affine(r, f"{p}.value"), (B, N, H, dh)), (0, 2, 1, 3))
            attn = ag.softmax(ag.mul(ag.matmul(q, k), scale), axis=-1)  # (B, H, C, N)
            self.last_attention.append(attn.data)
            ctx = ag.reshape(ag.transpose(ag.matmul(attn, v), (0, 2, 1, 3)), (B, C, cfg.hidden))
            h = ag.add(h, self._affine(ctx, f"{p}.out"))
            h = ag.add(ag.mul(ag.layer_norm(h, LN_EPS), self.params[f"{p}.norm1.gamma"]),
                       self.params[f"{p}.norm1.beta"])
            f = self._affine(ag.gelu(self._affine(h, f"{p}.ffn1")), f"{p}.ffn2")
            h = ag.add(h, f)
            h = ag.add(ag.mul(ag.layer_norm(h, LN_EPS), self.params[f"{p}.norm2.gamma"]),
                       self.params[f"{p}.norm2.beta"])

        y = ag.transpose(self._affine(h, "projection"), (0, 2, 1))  # (B, T, C)
        return ag.add(ag.mul(y, np.sqrt(var + eps)), mean)

    def forward(self, lookback, rs_block) -> np.ndarray:
        """Prediction for one window (S x C, P x N) or a batch (B x S x C, B x P x N)."""
        x = np.asarray(lookback, dtype=np.float64)
        r = np.asarray(rs_block, dtype=np.float64)
        single = x.ndim == 2
        if single:
            x, r = x[None], r[None]
        out = self.forward_tensor(x, r).data
        return out[0] if single else out

    __call__ = forward

    # -- parameter utilities ---------------------------------------------

    def state(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]):
        for k, t in self.params.items():
            if state[k].shape != t.data.shape:
                raise ValidationError(f"{k}: expected shape {t.data.shape}, got {state[k].shape}")
            t.data = np.array(state[k], dtype=np.float64, copy=True)

    def n_parameters(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def save(self, path: str | Path):
        doc = {
            "format_version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "params": {k: {"shape": list(t.data.shape), "data": t.data.ravel().tolist()}
                       for k, t in self.params.items()},
            "meta": self.meta,
        }
        Path(path).write_text(json.dumps(doc))

    @classmethod
    def load(cls, path: str | Path) -> "ForecastModel":
        doc = json.loads(Path(path).read_text())
        if doc.get("format_version") != CHECKPOINT_VERSION:
            raise ValidationError(f"unsupported checkpoint version {doc.get('format_version')!r}")
        model = cls.init(ModelConfig(**doc["config"]))
        if set(doc["params"]) != set(model.params):
            raise ValidationError("checkpoint parameter names do not match its config")
        state = {}
        for k, entry in doc["params"].items():
            arr = np.asarray(entry["data"], dtype=np.float64)
            if arr.size != int(np.prod(entry["shape"])):
                raise ValidationError(f"{k}: {arr.size} values for declared shape {entry['shape']}")
            state[k] = arr.reshape(entry["shape"])
        model.load_state(state)
        model.meta = doc.get("meta", {})
        return model


def backward(model: ForecastModel, lookback, rs_block, target) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and d(MSE)/d(parameter) for one batch."""
    bad = [k for k, t in model.params.items() if not np.all(np.isfinite(t.data))]
    if bad:
        raise NumericalError(f"non-finite values in parameters {bad}")
    for t in model.params.values():
        t.grad = None
    with np.errstate(over="ignore", invalid="ignore"):
        loss = ag.mse(model.forward_tensor(lookback, rs_block), target)
        ag.backward(loss)
    grads = {k: t.grad if t.grad is not None else np.zeros_like(t.data) for k, t in model.params.items()}
    bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise NumericalError(f"non-finite gradients for parameters {bad}")
    return float(loss.data), grads


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: dict[str, ag.Tensor], grads: dict[str, np.ndarray]):
        for k, t in params.items():
            t.data -= self.lr * grads[k]


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, ag.Tensor], grads: dict[str, np.ndarray]):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, t in params.items():
            g = grads[k]
            m = self.m.setdefault(k, np.zeros_like(g))
            v = self.v.setdefault(k, np.zeros_like(g))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            t.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class WindowBatcher:
    """Stride-1 windows of a series with reference blocks sliced at each window's absolute start."""

    def __init__(self, series: MultiSeries, rs: ReferenceSeries, config: ModelConfig):
        S, T, P = config.lookback, config.horizon, config.rs_lookback
        self.n = count_windows(series.length, S, T)
        if self.n == 0:
            raise ConfigurationError(
                f"series of length {series.length} has no window of lookback {S} + horizon {T}")
        last = series.start + self.n - 1 + P
        if last > rs.length:
            raise RangeError(f"reference bank has {rs.length} rows, windows need {last}")
        self.S, self.T, self.P = S, T, P
        self.views = sliding_window_view(series.values, S + T, axis=0)  # (n', C, S+T)
        self.rs_views = sliding_window_view(rs.values, P, axis=0)  # (L - P + 1, N, P)
        self.start = series.start

    def __len__(self):
        return self.n

    def batch(self, idx) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        idx = np.asarray(idx)
        w = self.views[idx].transpose(0, 2, 1)
        r = self.rs_views[self.start + idx].transpose(0, 2, 1)
        return (np.ascontiguousarray(w[:, :self.S]), np.ascontiguousarray(r),
                np.ascontiguousarray(w[:, self.S:]))

    def chunks(self, size: int = 256):
        for lo in range(0, self.n, size):
            yield self.batch(np.arange(lo, min(lo + size, self.n)))


def _mean_loss(model: ForecastModel, batcher: WindowBatcher) -> float:
    total, count = 0.0, 0
    for x, r, y in batcher.chunks():
        pred = model.forward(x, r)
        total += float(((pred - y) ** 2).sum())
        count += y.size
    return total / count


def train(model: ForecastModel, train_series: MultiSeries, val_series: MultiSeries | None,
          rs: ReferenceSeries, cfg: TrainConfig = TrainConfig()) -> tuple[ForecastModel, list[dict]]:
    """Mini-batch training with early stopping on validation MSE.

    Returns the model (parameters restored to the best validation epoch) and
    one history record per epoch.
    """
    tr = WindowBatcher(train_series, rs, model.config)
    va = WindowBatcher(val_series, rs, model.config) if val_series is not None else None
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(cfg.lr) if cfg.optimizer == "adam" else SGD(cfg.lr)

    history = []
    best, best_state, stale = math.inf, model.state(), 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(tr))
        total, count = 0.0, 0
        for lo in range(0, len(order), cfg.batch_size):
            x, r, y = tr.batch(order[lo:lo + cfg.batch_size])
            loss, grads = backward(model, x, r, y)
            opt.step(model.params, grads)
            bad = [k for k, t in model.params.items() if not np.all(np.isfinite(t.data))]
            if bad:
                raise NumericalError(f"epoch {epoch}: non-finite parameters after update: {bad}")
            total += loss * len(x)
            count += len(x)
        rec = {"epoch": epoch, "train_mse": total / count}
        if va is not None:
            rec["val_mse"] = _mean_loss(model, va)
            monitor = rec["val_mse"]
        else:
            monitor = rec["train_mse"]
        history.append(rec)
        log.info("epoch %d: %s", epoch, rec)
        if monitor < best:
            best, best_state, stale = monitor, model.state(), 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    model.load_state(best_state)
    return model, history


def predict(model: ForecastModel, observation, rs: ReferenceSeries, xi: int) -> np.ndarray:
    """Forecast T x C from an S x C observation aligned to reference step ``xi``."""
    P = model.config.rs_lookback
    if xi < 0 or xi + P > rs.length:
        raise RangeError(f"xi={xi} with rs_lookback {P} exceeds reference length {rs.length}")
    return model.forward(observation, slice_rs(rs, xi, P))
