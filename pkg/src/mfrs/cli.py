"""Command-line entry point.

Subcommands: analyze, rs-gen, synth, align, train, predict, eval, pipeline.
Exit codes: 0 success, 1 validation error, 2 runtime/numeric error,
64 usage error.
"""

from __future__ import annotations

import argparse
import contextlib
import datetime as _dt
import json
import logging
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .alignment import align, intercept
from .basepatterns import BasePatternSet, ExtractionConfig, all_frequencies, analyze, channel_spectra, max_period, pooled_period_view
from .errors import ConfigurationError, MFRSError, RangeError, ValidationError
from .evalharness import evaluate, naive_baselines, zscore
from .forecaster import ForecastModel, ModelConfig, TrainConfig, predict, train
from .pipeline import model_meta
from .refseries import WAVEFORMS, generate
from .seriescore import MultiSeries, SplitSpec, chronological_split, read_csv, write_csv, write_matrix_csv
from .spectral import dump_period_csv, dump_spectrum_csv
from .synthbench import FAMILIES, ComposeSpec, GaussianNoise, PoissonNoise, compose_spec, generate_compose, optimal_metrics

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2, 64
CONFIG_VERSION = 1
COMPOSE4_NOTE = "compose4 generated as long-period sines plus Poisson noise"

log = logging.getLogger("mfrs")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dump(obj):
    print(json.dumps(obj, indent=2))


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest_time(args) -> dict:
    if getattr(args, "no_timestamp", False):
        return {}
    return {"created": _dt.datetime.now(_dt.timezone.utc).isoformat()}


# -- shared flag groups ------------------------------------------------------

def _add_model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--lookback", type=int)
    g.add_argument("--horizon", type=int)
    g.add_argument("--hidden", type=int)
    g.add_argument("--blocks", type=int)
    g.add_argument("--heads", type=int)
    g.add_argument("--rs-lookback", type=int)
    g.add_argument("--ffn-mult", type=int)
    g.add_argument("--separate-embedding", action="store_true", default=None)
    g = p.add_argument_group("training")
    g.add_argument("--seed", type=int)
    g.add_argument("--epochs", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--batch", type=int)
    g.add_argument("--patience", type=int)
    g.add_argument("--optimizer", choices=("adam", "sgd"))
    p.add_argument("--waveform", choices=WAVEFORMS)


def _add_split_flag(p):
    p.add_argument("--split", type=float, nargs=3, metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("--zscore", action="store_true", default=None,
                   help="standardize channels with training-split statistics")


def _model_config(args, base: dict | None = None) -> ModelConfig:
    cfg = dict(base or {})
    for name, flag in (("lookback", "lookback"), ("horizon", "horizon"), ("hidden", "hidden"),
                       ("blocks", "blocks"), ("heads", "heads"), ("rs_lookback", "rs_lookback"),
                       ("ffn_mult", "ffn_mult")):
        v = getattr(args, flag, None)
        if v is not None:
            cfg[name] = v
    if getattr(args, "separate_embedding", None):
        cfg["shared_embedding"] = False
    return ModelConfig(**cfg)


def _train_config(args, base: dict | None = None) -> TrainConfig:
    cfg = dict(base or {})
    for name, flag in (("seed", "seed"), ("epochs", "epochs"), ("lr", "lr"),
                       ("batch_size", "batch"), ("patience", "patience"), ("optimizer", "optimizer")):
        v = getattr(args, flag, None)
        if v is not None:
            cfg[name] = v
    return TrainConfig(**cfg)


def _prepare(series: MultiSeries, split: SplitSpec, standardize: bool):
    tr, va, te = chronological_split(series, split)
    if standardize:
        tr, va, te = zscore(tr, va, te)
    return tr, va, te


# -- subcommands -------------------------------------------------------------

def cmd_synth(args) -> int:
    kw = dict(channels=args.channels, length=args.length, seed=args.seed)
    if args.sigma is not None:
        kw["sigma"] = args.sigma
    if args.mu is not None:
        kw["mu"] = args.mu
    if args.lam is not None:
        kw["lam"] = args.lam
    spec = compose_spec(args.family, **kw)
    data = generate_compose(spec)
    out = _outdir(args.out)
    write_csv(out / "X.csv", data.X)
    write_csv(out / "Z.csv", data.Z)
    write_csv(out / "U.csv", data.U)
    manifest = {"family": args.family, "spec": spec.to_json(),
                "amplitudes": data.amplitudes.tolist(),
                "optimal": optimal_metrics(spec.noise, seed=spec.seed).to_json()}
    if args.family == "compose4":
        manifest["note"] = COMPOSE4_NOTE
    manifest.update(_manifest_time(args))
    _write_json(out / "manifest.json", manifest)
    _dump({"out": str(out), "length": spec.length, "optimal": manifest["optimal"]})
    return EXIT_OK


def cmd_analyze(args) -> int:
    series = read_csv(args.input)
    cfg = ExtractionConfig(args.lp, args.q, args.min_channels)
    bps = analyze(series, cfg, args.manual or ())
    if args.out:
        out = _outdir(args.out)
        bps.save(out / "basepatterns.json")
        if args.dump_spectrum:
            spectra = channel_spectra(series)
            for i, s in enumerate(spectra):
                dump_spectrum_csv(out / f"spectrum_ch{i}.csv", s)
            dump_period_csv(out / "period.csv", pooled_period_view(spectra, cfg.L_p))
    elif args.dump_spectrum:
        raise ValidationError("--dump-spectrum needs --out")
    _dump(bps.to_json())
    return EXIT_OK


def cmd_rs_gen(args) -> int:
    bps = BasePatternSet.load(args.patterns)
    rs = generate(all_frequencies(bps), args.length, args.waveform)
    out = _outdir(args.out)
    rs.save(out)
    _dump(rs.metadata())
    return EXIT_OK


def cmd_align(args) -> int:
    obs = read_csv(args.obs).values
    tr = read_csv(args.train).values
    if args.max_period is not None:
        tm = args.max_period
    elif args.patterns is not None:
        tm = max_period(BasePatternSet.load(args.patterns))
    else:
        raise ValidationError("align needs --patterns or --max-period")
    block, off = intercept(tr, tm, obs.shape[0])
    res = align(obs, block, tm, None if args.all_channels else (0,))
    _dump({"xi": res.xi, "score": res.score, "train_row": off + res.xi})
    return EXIT_OK


def _train_and_save(series: MultiSeries, out: Path, model_cfg: ModelConfig, train_cfg: TrainConfig,
                    split: SplitSpec, standardize: bool, waveform: str,
                    patterns: BasePatternSet | None, extraction: ExtractionConfig, manual):
    tr, va, te = _prepare(series, split, standardize)
    if patterns is None:
        patterns = analyze(tr, extraction, manual)
    rs = generate(all_frequencies(patterns), series.length, waveform)
    model = ForecastModel.init(model_cfg, seed=train_cfg.seed)
    model.meta = model_meta(patterns, rs)
    model.meta.update({"split": [split.train_frac, split.val_frac, split.test_frac],
                       "zscore": standardize})
    model, history = train(model, tr, va, rs, train_cfg)
    patterns.save(out / "basepatterns.json")
    model.save(out / "model.json")
    _write_json(out / "history.json", history)
    return patterns, rs, model, history, (tr, va, te)


def cmd_train(args) -> int:
    series = read_csv(args.input)
    out = _outdir(args.out)
    patterns = BasePatternSet.load(args.patterns) if args.patterns else None
    split = SplitSpec(*args.split) if args.split else SplitSpec()
    _, _, model, history, _ = _train_and_save(
        series, out, _model_config(args), _train_config(args), split, bool(args.zscore),
        args.waveform or "sine", patterns, ExtractionConfig(), args.manual or ())
    _dump({"epochs": len(history), "best_val_mse": min(h.get("val_mse", h["train_mse"]) for h in history),
           "parameters": model.n_parameters()})
    return EXIT_OK


def _model_rs(model: ForecastModel):
    meta = model.meta
    if "patterns" not in meta:
        raise ValidationError("checkpoint lacks base-pattern metadata")
    bps = BasePatternSet.from_json(meta["patterns"])
    return bps, generate(all_frequencies(bps), meta["rs_length"], meta["waveform"])


def cmd_predict(args) -> int:
    model = ForecastModel.load(args.model)
    bps, rs = _model_rs(model)
    obs = read_csv(args.obs).values
    result = {}
    if args.xi is not None:
        step = args.xi
    elif args.train is not None:
        tr = read_csv(args.train).values
        tm = max_period(bps)
        block, off = intercept(tr, tm, obs.shape[0])
        res = align(obs, block, tm, None if args.all_channels else (0,))
        step = off + res.xi
        result.update(xi=res.xi, score=res.score)
    else:
        raise ValidationError("predict needs --xi or --train")
    pred = predict(model, obs, rs, step)
    out = _outdir(args.out)
    write_matrix_csv(out / "prediction.csv", pred, [f"ch{i}" for i in range(pred.shape[1])])
    result["rs_step"] = step
    _dump(result)
    return EXIT_OK


def _plot(path, model, test, rs, window: int):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    S, T = model.config.lookback, model.config.horizon
    P = model.config.rs_lookback
    x = test.values[window:window + S]
    y = test.values[window + S:window + S + T]
    pred = predict(model, x, rs, test.start + window)
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(range(S), x[:, 0], color="0.5", label="lookback")
    ax.plot(range(S, S + T), y[:, 0], label="target")
    ax.plot(range(S, S + T), pred[:, 0], label="forecast")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def cmd_eval(args) -> int:
    model = ForecastModel.load(args.model)
    bps, rs = _model_rs(model)
    series = read_csv(args.input)
    meta = model.meta
    split = SplitSpec(*(args.split or meta.get("split", (0.7, 0.1, 0.2))))
    standardize = args.zscore if args.zscore is not None else meta.get("zscore", False)
    _, _, te = _prepare(series, split, standardize)
    optimal = None
    if args.against_optimal:
        manifest = json.loads(Path(args.against_optimal).read_text())
        o = manifest["optimal"]
        from .synthbench import OptimalMetrics
        optimal = OptimalMetrics(**o)
    report = evaluate(model, te, rs, optimal)
    out = report.to_json()
    if args.baselines:
        lag = max(bps.primary_periods + bps.manual_periods, default=None)
        out["baselines"] = {k: v.to_json() for k, v in naive_baselines(
            te, model.config.lookback, model.config.horizon, lag, optimal).items()}
    if args.plot:
        _plot(args.plot, model, te, rs, args.plot_window)
    _dump(out)
    return EXIT_OK


def _load_config(path) -> dict:
    cfg = json.loads(Path(path).read_text())
    if cfg.get("version") != CONFIG_VERSION:
        raise ValidationError(f"config version must be {CONFIG_VERSION}, got {cfg.get('version')!r}")
    return cfg


def cmd_pipeline(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    out = _outdir(args.out or cfg.get("out") or "mfrs_out")
    data = cfg.get("data", {})
    optimal = None
    if "synth" in data:
        syn = dict(data["synth"])
        family = syn.pop("family")
        spec = compose_spec(family, seed=seed, **syn)
        series = generate_compose(spec).X
        optimal = optimal_metrics(spec.noise, seed=seed)
    elif "csv" in data:
        path = Path(data["csv"])
        if not path.is_absolute():
            path = Path(args.config).parent / path
        if not path.exists():
            raise ValidationError(f"dataset {path} does not exist")
        series = read_csv(path)
    else:
        raise ValidationError("config 'data' needs a 'synth' or 'csv' entry")

    model_cfg = _model_config(args, cfg.get("model"))
    train_cfg = _train_config(args, {**cfg.get("train", {}), "seed": seed})
    split = SplitSpec(*cfg.get("split", (0.7, 0.1, 0.2)))
    extraction = ExtractionConfig(**cfg.get("extraction", {}))
    patterns = BasePatternSet.from_json(cfg["patterns"]) if cfg.get("patterns") else None
    standardize = bool(cfg.get("zscore", False))
    patterns, rs, model, history, (tr, va, te) = _train_and_save(
        series, out, model_cfg, train_cfg, split, standardize, args.waveform or cfg.get("waveform", "sine"),
        patterns, extraction, cfg.get("manual_periods", ()))
    report = evaluate(model, te, rs, optimal)
    lag = max(patterns.primary_periods + patterns.manual_periods, default=None)
    baselines = naive_baselines(te, model_cfg.lookback, model_cfg.horizon, lag, optimal)
    result = {"eval": report.to_json(),
              "baselines": {k: v.to_json() for k, v in baselines.items()},
              "patterns": patterns.to_json(),
              "model": asdict(model_cfg), "train": asdict(train_cfg), "seed": seed}
    result.update(_manifest_time(args))
    _write_json(out / "report.json", result)
    _dump(result["eval"])
    return EXIT_OK


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mfrs", description="Multi-frequency reference-series forecasting toolkit")
    p.add_argument("-v", "--verbose", action="store_true", help="log training epochs to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a Compose dataset")
    s.add_argument("--family", required=True, choices=sorted(FAMILIES))
    s.add_argument("--sigma", type=float)
    s.add_argument("--mu", type=float)
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--channels", type=int, default=4)
    s.add_argument("--length", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--no-timestamp", action="store_true")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("analyze", help="extract base patterns from a CSV series")
    s.add_argument("--input", required=True)
    s.add_argument("--lp", type=int, help="conversion length (default min(5000, L/4))")
    s.add_argument("--q", type=int, default=8, help="max harmonic count")
    s.add_argument("--min-channels", type=int)
    s.add_argument("--manual", type=int, nargs="*")
    s.add_argument("--out")
    s.add_argument("--dump-spectrum", action="store_true")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("rs-gen", help="write the reference-series bank")
    s.add_argument("--patterns", required=True)
    s.add_argument("--length", type=int, required=True)
    s.add_argument("--waveform", choices=WAVEFORMS, default="sine")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rs_gen)

    s = sub.add_parser("align", help="recover the time step of an observation window")
    s.add_argument("--obs", required=True)
    s.add_argument("--train", required=True)
    s.add_argument("--patterns")
    s.add_argument("--max-period", type=int)
    s.add_argument("--all-channels", action="store_true")
    s.set_defaults(func=cmd_align)

    s = sub.add_parser("train", help="train a forecaster")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--patterns")
    s.add_argument("--manual", type=int, nargs="*")
    _add_model_flags(s)
    _add_split_flag(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="forecast from an observation window")
    s.add_argument("--model", required=True)
    s.add_argument("--obs", required=True)
    s.add_argument("--xi", type=int, help="reference step of the observation's first row")
    s.add_argument("--train", help="training CSV used to align the observation")
    s.add_argument("--all-channels", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", help="evaluate a trained model on the test split")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True)
    _add_split_flag(s)
    s.add_argument("--against-optimal", metavar="MANIFEST")
    s.add_argument("--baselines", action="store_true")
    s.add_argument("--plot", metavar="SVG")
    s.add_argument("--plot-window", type=int, default=0)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("pipeline", help="run synth/ingest, analyze, train and eval from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--no-timestamp", action="store_true")
    _add_model_flags(s)
    s.set_defaults(func=cmd_pipeline)
    return p


def _thread_limit():
    n = os.environ.get("MFRS_THREADS")
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(int(n))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        with _thread_limit():
            return args.func(args)
    except (ValidationError, ConfigurationError, RangeError, FileNotFoundError) as e:
        print(f"mfrs: error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (MFRSError, FloatingPointError, ArithmeticError) as e:
        print(f"mfrs: runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
