"""Command line interface.

Five subcommands cover the pipeline end to end:

    liqlab generate  --out tape.csv --seed 7 --days 4 --signal-strength 0.8
    liqlab features  --input tape.csv --out work --timezone America/New_York
    liqlab train     --input work/buckets.csv --out work --timezone ... --model all
    liqlab evaluate  --input work/buckets.csv --models work --out work/report
    liqlab select    --input work/buckets.csv --out work/sel --timezone ... \
                     --model rf --select topk:5

Every flag can be defaulted through an environment variable named
LIQLAB_<FLAG> with dashes as underscores (LIQLAB_TIMEZONE, LIQLAB_SEED,
LIQLAB_SESSION_START, ...); explicit flags win over the environment.

Each command echoes its full configuration into a manifest JSON (and into
every model file and report) together with a 16-hex-digit config hash. CSV
artifacts carry the hash as a leading ``#`` comment line; tape files stay
pure CSV and get a sidecar ``<tape>.manifest.json`` instead. ``--jobs`` is
an execution detail, never part of the config echo: any worker count
produces byte-identical artifacts.

Exit codes: 0 success, 2 configuration errors, 3 input errors, 4 data
errors, 5 modeling errors, 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import datetime as dt
import io
import json
import os
import sys
from dataclasses import dataclass, field

from . import dataset as ds_mod
from . import evaluation as ev
from . import models as md
from . import pipeline as pl
from . import synth as sy
from .errors import ConfigError, InputError, LiqlabError
from .liquidity import METRIC_NAMES, write_features_csv
from .sampler import read_buckets_csv, write_buckets_csv
from .tickdata import SessionWindow, write_tape
from .util import atomic_write_text, canonical_json, config_hash, sha256_file

_KIND_BY_FLAG = {"lr": "logistic", "svm": "svm", "rf": "rf"}


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a command's output, minus --jobs."""

    command: str
    input: str | None = None
    out: str | None = None
    timezone: str | None = None
    session_start: str | None = None
    session_end: str | None = None
    split: tuple[int, int, int] | None = None
    split_mode: str | None = None
    models: tuple[str, ...] = ()
    select: str | None = None
    seed: int = 0
    quote_average: str = "event"
    model_params: dict | None = None
    synth: dict | None = None

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "input": self.input,
            "out": self.out,
            "timezone": self.timezone,
            "session_start": self.session_start,
            "session_end": self.session_end,
            "split": list(self.split) if self.split else None,
            "split_mode": self.split_mode,
            "models": list(self.models),
            "select": self.select,
            "seed": self.seed,
            "quote_average": self.quote_average,
            "model_params": self.model_params,
            "synth": self.synth,
        }

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _env_name(flag: str) -> str:
    return "LIQLAB_" + flag.strip("-").replace("-", "_").upper()


def _add(parser: argparse.ArgumentParser, flag: str, **kwargs):
    """add_argument with LIQLAB_* environment defaulting."""
    env_value = os.environ.get(_env_name(flag))
    if env_value is not None:
        kwargs["required"] = False
        kwargs["default"] = env_value
    parser.add_argument(flag, **kwargs)


def _parse_time(text: str) -> dt.time:
    try:
        return dt.time.fromisoformat(text)
    except ValueError as exc:
        raise ConfigError(f"bad time of day {text!r}: {exc}") from exc


def _parse_split(text: str) -> tuple[int, int, int]:
    try:
        parts = tuple(int(p) for p in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad split {text!r}: {exc}") from exc
    if len(parts) != 3 or sum(parts) != 100 or any(p <= 0 for p in parts):
        raise ConfigError(
            f"split must be three positive integers summing to 100, got {text!r}")
    return parts


def _session_window(args) -> SessionWindow:
    return SessionWindow(_parse_time(args.session_start),
                         _parse_time(args.session_end))


def _model_kinds(flag_value: str) -> tuple[str, ...]:
    if flag_value == "all":
        return ("logistic", "svm", "rf")
    if flag_value in _KIND_BY_FLAG:
        return (_KIND_BY_FLAG[flag_value],)
    raise ConfigError(f"unknown model {flag_value!r}; expected lr, svm, rf, or all")


def _write_manifest(path: str, cfg: RunConfig, outputs: dict[str, str]) -> None:
    payload = {
        "format": "liqlab-manifest",
        "version": 1,
        "command": cfg.command,
        "config": cfg.to_dict(),
        "config_hash": cfg.hash,
        "outputs": {name: sha256_file(p) for name, p in sorted(outputs.items())},
    }
    atomic_write_text(path, canonical_json(payload) + "\n")


def _model_params_echo(kinds: tuple[str, ...], seed: int) -> dict:
    return {kind: ev.default_config(kind, seed).to_dict() for kind in kinds}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    window = _session_window(args)
    config = sy.SynthConfig(
        seed=args.seed,
        tickers=tuple(args.tickers.split(",")),
        days=args.days,
        start_day=args.start_day,
        timezone=args.timezone,
        session=window,
        trade_rate=args.trade_rate,
        quote_rate=args.quote_rate,
        mid_price_start=args.mid_price,
        volatility=args.volatility,
        half_spread_mean=args.half_spread,
        half_spread_jitter=args.half_spread_jitter,
        size_mu=args.size_mu,
        size_sigma=args.size_sigma,
        signal_strength=args.signal_strength,
        signal_features=tuple(args.signal_features.split(",")),
    )
    config.validate()
    records = sy.generate(config)
    buf = io.StringIO()
    write_tape(records, buf)
    parent = os.path.dirname(args.out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    atomic_write_text(args.out, buf.getvalue())
    cfg = RunConfig(command="generate", out=args.out, timezone=args.timezone,
                    session_start=args.session_start,
                    session_end=args.session_end, seed=args.seed,
                    synth=config.to_dict())
    _write_manifest(args.out + ".manifest.json", cfg,
                    {os.path.basename(args.out): args.out})
    print(f"wrote {len(records)} records to {args.out} "
          f"(config hash {cfg.hash})")
    return 0


def cmd_features(args) -> int:
    window = _session_window(args)
    cfg = RunConfig(command="features", input=args.input, out=args.out,
                    timezone=args.timezone, session_start=args.session_start,
                    session_end=args.session_end)
    stage = pl.run_feature_stage(args.input, window, args.timezone,
                                 jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    buckets_path = os.path.join(args.out, "buckets.csv")
    features_path = os.path.join(args.out, "features.csv")
    write_buckets_csv(stage.buckets, buckets_path, config_hash=cfg.hash)
    write_features_csv(stage.features, features_path, config_hash=cfg.hash)
    _write_manifest(os.path.join(args.out, "manifest_features.json"), cfg,
                    {"buckets.csv": buckets_path, "features.csv": features_path})
    rep = stage.ingest_report
    print(f"ingest: {rep.accepted} accepted, {rep.rejected_malformed} malformed, "
          f"{rep.rejected_crossed} crossed")
    print(f"emitted {len(stage.buckets)} buckets over "
          f"{len(stage.shard_keys)} ticker-days (config hash {cfg.hash})")
    return 0


def _rebuild_dataset(buckets_path: str, timezone: str,
                     split: tuple[int, int, int], split_mode: str, seed: int):
    buckets = read_buckets_csv(buckets_path)
    rows, label_report = pl.rows_from_buckets(buckets, timezone)
    split_ds = ds_mod.split_dataset(rows, split, split_mode, seed)
    return split_ds, label_report


def cmd_train(args) -> int:
    kinds = _model_kinds(args.model)
    split = _parse_split(args.split)
    cfg = RunConfig(command="train", input=args.input, out=args.out,
                    timezone=args.timezone, split=split,
                    split_mode=args.split_mode, models=kinds, seed=args.seed,
                    model_params=_model_params_echo(kinds, args.seed))
    split_ds, label_report = _rebuild_dataset(
        args.input, args.timezone, split, args.split_mode, args.seed)
    os.makedirs(args.out, exist_ok=True)
    outputs = {}
    dataset_path = os.path.join(args.out, "dataset.csv")
    ds_mod.write_dataset_csv(split_ds, dataset_path, cfg_hash=cfg.hash)
    outputs["dataset.csv"] = dataset_path
    std_path = os.path.join(args.out, "standardization.json")
    ds_mod.write_standardization_json(split_ds, std_path)
    outputs["standardization.json"] = std_path

    X_train, y_train = split_ds.arrays("train")
    print(f"rows: {len(split_ds.rows)} "
          f"(train {split_ds.train_end}, "
          f"validation {split_ds.val_end - split_ds.train_end}, "
          f"test {len(split_ds.rows) - split_ds.val_end}); "
          f"dropped: tie {label_report.dropped_tie}, "
          f"masked {label_report.dropped_masked}, "
          f"no successor {label_report.dropped_no_successor}")
    for kind in kinds:
        model_config = ev.default_config(kind, args.seed)
        model = ev.fit_model(kind, model_config, X_train, y_train)
        labels, _ = md.predict(model, X_train)
        train_acc = ev.accuracy(ev.confusion(y_train, labels))
        path = os.path.join(args.out, f"model_{kind}.json")
        md.save_model(path, model,
                      feature_names=split_ds.feature_names,
                      standardization_hash=split_ds.standardization_hash(),
                      run_config=cfg.to_dict(), seed=args.seed)
        outputs[f"model_{kind}.json"] = path
        print(f"trained {kind}: train accuracy {train_acc:.4f} -> {path}")
    _write_manifest(os.path.join(args.out, "manifest_train.json"), cfg, outputs)
    return 0


def _load_models(spec_path: str) -> list[tuple[str, object, dict]]:
    """Load model files from a directory or a comma-separated file list."""
    if os.path.isdir(spec_path):
        paths = sorted(
            os.path.join(spec_path, name) for name in os.listdir(spec_path)
            if name.startswith("model_") and name.endswith(".json"))
    else:
        paths = [p for p in spec_path.split(",") if p]
    if not paths:
        raise InputError(f"no model files found at {spec_path}")
    loaded = []
    for path in paths:
        model, payload = md.load_model(path)
        loaded.append((payload["kind"], model, payload))
    return loaded


def cmd_evaluate(args) -> int:
    loaded = _load_models(args.models)
    echoes = [p.get("run_config") for _, _, p in loaded]
    if any(e is None for e in echoes):
        raise ConfigError("model files lack a run_config echo; "
                          "retrain through the command line")
    first = echoes[0]
    for e in echoes[1:]:
        for key in ("timezone", "split", "split_mode", "seed"):
            if e[key] != first[key]:
                raise ConfigError(
                    f"model files disagree on {key}: {e[key]!r} vs {first[key]!r}")
    split_ds, _ = _rebuild_dataset(
        args.input, first["timezone"], tuple(first["split"]),
        first["split_mode"], first["seed"])
    std_hash = split_ds.standardization_hash()
    for kind, _, payload in loaded:
        if payload["standardization_hash"] != std_hash:
            raise ConfigError(
                f"standardization mismatch for {kind}: the rebuilt dataset "
                f"hashes to {std_hash}, the model was trained against "
                f"{payload['standardization_hash']}")
    cfg = RunConfig(command="evaluate", input=args.input, out=args.out,
                    timezone=first["timezone"],
                    split=tuple(first["split"]), split_mode=first["split_mode"],
                    models=tuple(kind for kind, _, _ in loaded),
                    seed=first["seed"])
    X_test, y_test = split_ds.arrays("test")
    reports = []
    for kind, model, payload in loaded:
        labels, _ = md.predict(model, X_test)
        cm = ev.confusion(y_test, labels)
        importances = dict(zip(split_ds.feature_names,
                               md.feature_importance(model)))
        reports.append(ev.ModelReport(
            kind=kind,
            all_features=ev.EvalSide(cm, split_ds.feature_names),
            importances=importances,
            seed=payload["seed"]))
        print(f"{kind}: test accuracy {ev.accuracy(cm):.4f} "
              f"({ev.accuracy_percent(cm)}) confusion {cm.as_lists()}")
    written = ev.render_report(args.out, reports, split_ds.feature_names,
                               config=cfg.to_dict(), cfg_hash=cfg.hash)
    _write_manifest(os.path.join(args.out, "manifest_evaluate.json"), cfg,
                    written)
    return 0


def cmd_select(args) -> int:
    kinds = _model_kinds(args.model)
    split = _parse_split(args.split)
    strategy = ev.SelectionStrategy.parse(args.select)
    cfg = RunConfig(command="select", input=args.input, out=args.out,
                    timezone=args.timezone, split=split,
                    split_mode=args.split_mode, models=kinds,
                    select=strategy.describe(), seed=args.seed,
                    model_params=_model_params_echo(kinds, args.seed))
    split_ds, _ = _rebuild_dataset(
        args.input, args.timezone, split, args.split_mode, args.seed)
    X_train, y_train = split_ds.arrays("train")
    X_val, y_val = split_ds.arrays("validation")
    X_test, y_test = split_ds.arrays("test")
    names = split_ds.feature_names
    os.makedirs(args.out, exist_ok=True)
    outputs = {}
    reports = []
    for kind in kinds:
        model_config = ev.default_config(kind, args.seed)
        result = ev.select_subset(kind, model_config, X_train, y_train,
                                  X_val, y_val, strategy)
        subset_names = tuple(names[i] for i in result.features)
        # final pass: train both sides on train, touch test exactly once each
        full_model = ev.fit_model(kind, model_config, X_train, y_train)
        full_labels, _ = md.predict(full_model, X_test)
        full_cm = ev.confusion(y_test, full_labels)
        cols = list(result.features)
        sub_model = ev.fit_model(kind, model_config, X_train[:, cols], y_train)
        sub_labels, _ = md.predict(sub_model, X_test[:, cols])
        sub_cm = ev.confusion(y_test, sub_labels)
        importances = dict(zip(names, md.feature_importance(full_model)))
        reports.append(ev.ModelReport(
            kind=kind,
            all_features=ev.EvalSide(full_cm, names),
            importances=importances,
            seed=args.seed,
            subset=ev.EvalSide(sub_cm, subset_names),
            validation_accuracy=result.validation_accuracy,
            strategy=result.strategy))
        for tag, model, feats in (("", full_model, names),
                                  ("_subset", sub_model, subset_names)):
            path = os.path.join(args.out, f"model_{kind}{tag}.json")
            md.save_model(path, model, feature_names=feats,
                          standardization_hash=split_ds.standardization_hash(),
                          run_config=cfg.to_dict(), seed=args.seed)
            outputs[os.path.basename(path)] = path
        print(f"{kind}: subset {list(subset_names)} "
              f"validation accuracy {result.validation_accuracy:.4f}, "
              f"test {ev.accuracy(full_cm):.4f} all "
              f"vs {ev.accuracy(sub_cm):.4f} subset")
    written = ev.render_report(args.out, reports, names,
                               config=cfg.to_dict(), cfg_hash=cfg.hash)
    outputs.update(written)
    _write_manifest(os.path.join(args.out, "manifest_select.json"), cfg,
                    outputs)
    return 0


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------

def _add_session_flags(p: argparse.ArgumentParser, require_tz: bool,
                       with_window: bool = True) -> None:
    if require_tz:
        _add(p, "--timezone", required=True,
             help="IANA exchange timezone, e.g. America/New_York")
    else:
        _add(p, "--timezone", default="America/New_York",
             help="IANA exchange timezone")
    if with_window:
        _add(p, "--session-start", default="11:00")
        _add(p, "--session-end", default="16:00")


def _add_split_flags(p: argparse.ArgumentParser) -> None:
    _add(p, "--split", default="70,15,15",
         help="train,validation,test integer percents")
    _add(p, "--split-mode", default="chrono", choices=["chrono", "shuffled"])
    _add(p, "--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liqlab",
        description="minute-level liquidity features and direction classifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="emit a synthetic tape")
    _add(g, "--out", required=True)
    _add(g, "--seed", type=int, default=0)
    _add(g, "--tickers", default="SYN")
    _add(g, "--days", type=int, default=1)
    _add(g, "--start-day", default="2024-08-05")
    _add_session_flags(g, require_tz=False)
    _add(g, "--trade-rate", type=float, default=5.0)
    _add(g, "--quote-rate", type=float, default=20.0)
    _add(g, "--mid-price", type=float, default=150.0)
    _add(g, "--volatility", type=float, default=0.0006)
    _add(g, "--half-spread", type=float, default=0.02)
    _add(g, "--half-spread-jitter", type=float, default=0.01)
    _add(g, "--size-mu", type=float, default=sy.SynthConfig.size_mu)
    _add(g, "--size-sigma", type=float, default=0.25)
    _add(g, "--signal-strength", type=float, default=0.0)
    _add(g, "--signal-features", default="order_ratio")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("features", help="tape -> session buckets -> metrics")
    _add(f, "--input", required=True)
    _add(f, "--out", required=True)
    _add_session_flags(f, require_tz=True)
    _add(f, "--jobs", type=int, default=1,
         help="worker processes; output is identical at any value")
    f.set_defaults(func=cmd_features)

    t = sub.add_parser("train", help="buckets -> labeled split -> models")
    _add(t, "--input", required=True, help="buckets.csv from the features step")
    _add(t, "--out", required=True)
    # buckets are already session-filtered; train needs only the timezone
    # (for calendar-day grouping), not the window flags
    _add_session_flags(t, require_tz=True, with_window=False)
    _add_split_flags(t)
    _add(t, "--model", default="all", choices=["lr", "svm", "rf", "all"])
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score trained models on the test slice")
    _add(e, "--input", required=True, help="buckets.csv from the features step")
    _add(e, "--models", required=True,
         help="directory of model_*.json, or comma-separated files")
    _add(e, "--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("select", help="feature subset search plus final report")
    _add(s, "--input", required=True, help="buckets.csv from the features step")
    _add(s, "--out", required=True)
    _add_session_flags(s, require_tz=True, with_window=False)
    _add_split_flags(s)
    _add(s, "--model", default="all", choices=["lr", "svm", "rf", "all"])
    _add(s, "--select", default="forward",
         help="forward, topk:<k>, or exhaustive:<k>")
    s.set_defaults(func=cmd_select)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LiqlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - unexpected bugs
        print(f"unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
