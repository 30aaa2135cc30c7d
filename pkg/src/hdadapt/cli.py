"""Command-line harness.

Exit codes: 0 success, 2 invalid arguments or configuration, 3 data errors
(unreadable or malformed corpus/model files).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
import zipfile
from pathlib import Path

import numpy as np

from . import hvcore
from .data import (
    CorpusError,
    SynthSpec,
    generate_synthetic,
    load_corpus,
    make_kfold_splits,
    make_lodo_splits,
    splits_to_json,
    write_corpus,
)
from .harness import (
    ExperimentConfig,
    PredictionRecord,
    bench,
    run_evaluation,
    sweep_delta,
    write_predictions,
)
from .persistence import load_model, save_model

SEED_ENV = "HDADAPT_SEED"
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3

log = logging.getLogger("hdadapt")


class DataError(Exception):
    pass


def _delta(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not -1.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"delta-star must lie in [-1, 1], got {v}")
    return v


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"{SEED_ENV} must be an integer, got {raw!r}")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--dim", type=int, default=hvcore.DEFAULT_DIM, help="hypervector dimension")
    g.add_argument("--ngram", type=int, default=3, help="timesteps per encoding window")
    g.add_argument("--eta", type=float, default=0.05, help="learning rate")
    g.add_argument("--epochs", type=int, default=20, help="training passes per model")
    g.add_argument("--delta-star", type=_delta, default=0.65, help="OOD threshold in [-1, 1]")
    g.add_argument("--allow-negative-weights", action="store_true",
                   help="keep negative descriptor similarities as ensemble weights")
    g.add_argument("--seed", type=int, default=None, help=f"master seed (default: ${SEED_ENV} or 0)")
    g.add_argument("--n-jobs", type=int, default=None, help="worker threads; results do not depend on it")


def _config(args) -> ExperimentConfig:
    if args.dim < 1 or args.ngram < 1 or args.epochs < 1:
        raise ValueError("--dim, --ngram and --epochs must be positive")
    if not np.isfinite(args.eta) or args.eta <= 0:
        raise ValueError("--eta must be finite and positive")
    return ExperimentConfig(dim=args.dim, ngram=args.ngram, eta=args.eta, epochs=args.epochs,
                            delta_star=args.delta_star,
                            allow_negative_weights=args.allow_negative_weights,
                            seed=_default_seed() if args.seed is None else args.seed,
                            n_jobs=args.n_jobs)


def _load(path):
    try:
        return load_corpus(path)
    except FileNotFoundError as exc:
        raise DataError(f"corpus not found: {path}") from exc
    except CorpusError as exc:
        raise DataError(str(exc)) from exc


def _emit(payload: dict, out) -> None:
    text = json.dumps(payload, indent=2, sort_keys=False)
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _synth_spec(args) -> SynthSpec:
    if args.spec:
        try:
            base = json.loads(Path(args.spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read generator settings {args.spec}: {exc}") from exc
    else:
        base = {}
    overrides = {
        "n_domains": args.domains, "n_classes": args.classes, "n_sensors": args.sensors,
        "n_timesteps": args.timesteps, "samples_per_class": args.per_class,
        "shift": args.shift, "noise": args.noise, "seed": args.seed,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if "seed" not in base:
        base["seed"] = _default_seed()
    return SynthSpec(**base)


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    spec = _synth_spec(args)
    corpus = generate_synthetic(spec)
    write_corpus(corpus, args.out)
    if args.spec_out:
        Path(args.spec_out).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
    _emit({"corpus": str(args.out), "segments": len(corpus), "domains": corpus.K,
           "classes": corpus.n, "sensors": corpus.m, "spec": spec.to_dict()}, None)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    corpus = _load(args.corpus)
    t0 = time.perf_counter()
    clf = cfg.estimator(args.method).fit(corpus.values(), corpus.labels, corpus.domains)
    train_seconds = time.perf_counter() - t0
    save_model(clf, args.model_out)
    digest = hashlib.sha256(Path(args.model_out).read_bytes()).hexdigest()
    _emit({"model": str(args.model_out), "sha256": digest, "method": args.method,
           "n_train": len(corpus), "train_seconds": train_seconds,
           "train_throughput": len(corpus) / train_seconds, "config": cfg.to_dict()}, args.out)
    return EXIT_OK


def _evaluate(args, protocol: str) -> int:
    cfg = _config(args)
    corpus = _load(args.corpus)
    if protocol == "lodo":
        splits = make_lodo_splits(corpus)
    else:
        splits = make_kfold_splits(corpus, args.folds, cfg.seed)
    if args.splits_out:
        splits_to_json(splits, args.splits_out)
    arms = [args.method]
    if args.baseline != "none" and args.baseline not in arms:
        arms.append(args.baseline)
    records: list[PredictionRecord] | None = [] if args.predictions else None
    report = run_evaluation(corpus, splits, cfg, arms, protocol, records)
    if protocol == "kfold":
        report.config["folds"] = args.folds
    if args.predictions:
        write_predictions(records, args.predictions)
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def cmd_eval_lodo(args) -> int:
    return _evaluate(args, "lodo")


def cmd_eval_kfold(args) -> int:
    return _evaluate(args, "kfold")


def cmd_sweep_delta(args) -> int:
    cfg = _config(args)
    if args.grid is not None:
        grid = args.grid
    else:
        start, stop, step = args.grid_range
        if step <= 0:
            raise ValueError("grid step must be positive")
        grid = np.round(np.arange(start, stop + step / 2, step), 10).tolist()
    if not grid:
        raise ValueError("the delta-star grid is empty")
    corpus = _load(args.corpus)
    result = sweep_delta(corpus, grid, cfg)
    payload = result.to_dict()
    payload["best_delta_star"] = result.best()
    payload["rows"] = [{"delta_star": d, "mean_accuracy": a}
                       for d, a in zip(result.grid, result.mean_accuracy)]
    _emit(payload, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    corpus = _load(args.corpus)
    rows = bench(corpus, args.fractions, cfg, holdout=args.holdout, repeats=args.repeats)
    _emit({"corpus": corpus.name, "config": cfg.to_dict(), "rows": rows}, args.out)
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        clf = load_model(args.model)
    except FileNotFoundError as exc:
        raise DataError(f"model not found: {args.model}") from exc
    except (KeyError, ValueError, OSError, zipfile.BadZipFile) as exc:
        raise DataError(f"cannot load model {args.model}: {exc}") from exc
    corpus = _load(args.corpus)
    out = clf.infer(corpus.values())
    preds = clf.classes_[out.predictions]
    records = [
        PredictionRecord("model", 0, int(s.segment_id), int(s.domain), int(s.label), int(preds[i]),
                         bool(out.ood[i]), out.domain_similarities[i].tolist(),
                         out.class_scores[i].tolist())
        for i, s in enumerate(corpus.segments)
    ]
    write_predictions(records, args.out)
    acc = float(np.mean(preds == corpus.labels))
    _emit({"predictions": str(args.out), "n": len(records), "accuracy": acc,
           "ood_rate": float(np.mean(out.ood))}, None)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdadapt", description="Domain-adaptive hyperdimensional classification harness")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic distribution-shift corpus")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--spec", help="JSON sidecar with SynthSpec fields; flags override it")
    p.add_argument("--spec-out", help="write the effective spec as JSON")
    p.add_argument("--domains", type=int)
    p.add_argument("--classes", type=int)
    p.add_argument("--sensors", type=int)
    p.add_argument("--timesteps", type=int)
    p.add_argument("--per-class", type=int, help="segments per domain per class")
    p.add_argument("--shift", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train on a corpus and save a model container")
    p.add_argument("corpus")
    p.add_argument("--model-out", required=True)
    p.add_argument("--method", choices=("adaptive", "pooled"), default="adaptive")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    for name, func, help_ in (("eval-lodo", cmd_eval_lodo, "leave-one-domain-out evaluation"),
                              ("eval-kfold", cmd_eval_kfold, "random k-fold evaluation")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("corpus")
        p.add_argument("--method", choices=("adaptive", "pooled"), default="adaptive")
        p.add_argument("--baseline", choices=("pooled", "none"), default="none",
                       help="also run the pooled single-model comparator")
        p.add_argument("--predictions", help="per-sample output (.jsonl or .csv)")
        p.add_argument("--splits-out", help="write the split plan as JSON")
        p.add_argument("--out", help="write the JSON report here instead of stdout")
        if name == "eval-kfold":
            p.add_argument("--folds", type=int, default=5)
        _add_model_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("sweep-delta", help="LODO accuracy over a grid of delta-star values")
    p.add_argument("corpus")
    grid = p.add_mutually_exclusive_group()
    grid.add_argument("--grid", type=_float_list, help="comma-separated values")
    grid.add_argument("--grid-range", type=float, nargs=3, metavar=("START", "STOP", "STEP"),
                      default=(0.05, 0.95, 0.1))
    p.add_argument("--out")
    _add_model_flags(p)
    p.set_defaults(func=cmd_sweep_delta)

    p = sub.add_parser("bench", help="train/inference timing on growing data fractions")
    p.add_argument("corpus")
    p.add_argument("--fractions", type=_float_list, default=[0.25, 0.5, 1.0])
    p.add_argument("--holdout", type=int, help="test domain (default: highest domain id)")
    p.add_argument("--repeats", type=int, default=1, help="report the minimum over repeats")
    p.add_argument("--out")
    _add_model_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("predict", help="per-sample predictions from a saved model")
    p.add_argument("model")
    p.add_argument("corpus")
    p.add_argument("--out", required=True, help="output path (.jsonl or .csv)")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
