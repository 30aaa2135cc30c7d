"""Evaluation protocols: leave-one-domain-out, k-fold, threshold sweeps and
scaling benchmarks, with machine-readable reports."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import hvcore
from ._validation import check_delta_star
from .data import Corpus, SplitPlan, make_kfold_splits, make_lodo_splits
from .encoder import HDEncoder
from .estimators import DomainAdaptiveHDClassifier, PooledHDClassifier
from .hvcore import HvRng

ARMS = ("adaptive", "pooled")


@dataclass
class ExperimentConfig:
    dim: int = hvcore.DEFAULT_DIM
    ngram: int = 3
    eta: float = 0.05
    epochs: int = 20
    delta_star: float = 0.65
    allow_negative_weights: bool = False
    seed: int = 0
    n_jobs: int | None = None

    def __post_init__(self):
        check_delta_star(self.delta_star)

    def encoder(self) -> HDEncoder:
        return HDEncoder(dim=self.dim, ngram=self.ngram, random_state=self.seed, n_jobs=self.n_jobs)

    def estimator(self, arm: str):
        if arm == "adaptive":
            return DomainAdaptiveHDClassifier(
                dim=self.dim, ngram=self.ngram, eta=self.eta, epochs=self.epochs,
                delta_star=self.delta_star, allow_negative_weights=self.allow_negative_weights,
                random_state=self.seed, n_jobs=self.n_jobs)
        if arm == "pooled":
            return PooledHDClassifier(dim=self.dim, ngram=self.ngram, eta=self.eta,
                                      epochs=self.epochs, random_state=self.seed, n_jobs=self.n_jobs)
        raise ValueError(f"unknown arm {arm!r}; choose from {ARMS}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ArmReport:
    per_split_accuracy: list[float] = field(default_factory=list)
    per_split_correct: list[int] = field(default_factory=list)
    per_split_total: list[int] = field(default_factory=list)
    per_split_ood_rate: list[float] = field(default_factory=list)
    train_seconds: float = 0.0
    infer_seconds: float = 0.0

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.per_split_accuracy)) if self.per_split_accuracy else float("nan")

    def to_dict(self) -> dict:
        n_train_infer = sum(self.per_split_total)
        out = asdict(self)
        out["mean_accuracy"] = self.mean_accuracy
        out["total_correct"] = int(sum(self.per_split_correct))
        out["total"] = int(n_train_infer)
        out["infer_throughput"] = n_train_infer / self.infer_seconds if self.infer_seconds > 0 else None
        return out


@dataclass
class RunReport:
    protocol: str
    corpus: str
    held_out: list[int]
    config: dict
    arms: dict[str, ArmReport]
    n_train: list[int] = field(default_factory=list)

    @property
    def mean_accuracy(self) -> float:
        return self.arms[next(iter(self.arms))].mean_accuracy

    def to_dict(self) -> dict:
        out = {
            "protocol": self.protocol,
            "corpus": self.corpus,
            "held_out": self.held_out,
            "n_train": self.n_train,
            "config": self.config,
            "arms": {name: arm.to_dict() for name, arm in self.arms.items()},
        }
        for arm in out["arms"].values():
            total_train = sum(self.n_train)
            arm["train_throughput"] = (total_train / arm["train_seconds"]
                                       if arm["train_seconds"] > 0 else None)
        out["mean_accuracy"] = self.mean_accuracy
        return out

    def accuracy_fields(self) -> dict:
        """Report content that must be identical across reruns (timings excluded)."""
        return {
            name: (arm.per_split_accuracy, arm.per_split_correct, arm.per_split_ood_rate)
            for name, arm in self.arms.items()
        }


@dataclass
class PredictionRecord:
    arm: str
    split: int
    segment_id: int
    domain: int
    label: int | None
    prediction: int
    ood: bool
    domain_similarities: list[float]
    class_scores: list[float]


def _encode_split(corpus: Corpus, sp: SplitPlan, cfg: ExperimentConfig):
    t0 = time.perf_counter()
    enc = cfg.encoder().fit(corpus.values(sp.train))
    H_train = enc.transform(corpus.values(sp.train))
    t_train = time.perf_counter() - t0
    t0 = time.perf_counter()
    H_test = enc.transform(corpus.values(sp.test))
    t_test = time.perf_counter() - t0
    return enc, H_train, H_test, t_train, t_test


def _records(arm, split, corpus, sp, clf, out) -> list[PredictionRecord]:
    labels = corpus.labels[sp.test]
    ids = corpus.segment_ids[sp.test]
    doms = corpus.domains[sp.test]
    preds = clf.classes_[out.predictions]
    return [
        PredictionRecord(arm, split, int(ids[i]), int(doms[i]), int(labels[i]), int(preds[i]),
                         bool(out.ood[i]), out.domain_similarities[i].tolist(),
                         out.class_scores[i].tolist())
        for i in range(len(sp.test))
    ]


def run_evaluation(corpus: Corpus, splits: Sequence[SplitPlan], cfg: ExperimentConfig,
                   arms: Iterable[str] = ("adaptive",), protocol: str = "lodo",
                   predictions: list | None = None) -> RunReport:
    """Train and evaluate every arm on every split.

    The encoder is fitted once per split on that split's training segments and
    shared by the arms, so arm differences come from the models alone. When
    ``predictions`` is a list, per-sample records are appended to it.
    """
    arms = list(arms)
    reports = {arm: ArmReport() for arm in arms}
    y = corpus.labels
    doms = corpus.domains
    n_train = []
    for s, sp in enumerate(splits):
        enc, H_train, H_test, t_enc_train, t_enc_test = _encode_split(corpus, sp, cfg)
        n_train.append(len(sp.train))
        for arm in arms:
            rep = reports[arm]
            t0 = time.perf_counter()
            clf = cfg.estimator(arm).fit_encoded(H_train, y[sp.train], doms[sp.train], encoder=enc)
            rep.train_seconds += t_enc_train + time.perf_counter() - t0
            t0 = time.perf_counter()
            out = clf.infer_encoded(H_test)
            rep.infer_seconds += t_enc_test + time.perf_counter() - t0
            correct = int(np.sum(clf.classes_[out.predictions] == y[sp.test]))
            rep.per_split_correct.append(correct)
            rep.per_split_total.append(len(sp.test))
            rep.per_split_accuracy.append(correct / len(sp.test))
            rep.per_split_ood_rate.append(float(np.mean(out.ood)))
            if predictions is not None:
                predictions.extend(_records(arm, s, corpus, sp, clf, out))
    return RunReport(protocol, corpus.name, [sp.held_out for sp in splits], cfg.to_dict(), reports,
                     n_train)


def evaluate_lodo(corpus: Corpus, cfg: ExperimentConfig = ExperimentConfig(),
                  arms=("adaptive",), predictions=None) -> RunReport:
    return run_evaluation(corpus, make_lodo_splits(corpus), cfg, arms, "lodo", predictions)


def evaluate_kfold(corpus: Corpus, k: int = 5, cfg: ExperimentConfig = ExperimentConfig(),
                   arms=("adaptive",), predictions=None) -> RunReport:
    report = run_evaluation(corpus, make_kfold_splits(corpus, k, cfg.seed), cfg, arms, "kfold",
                            predictions)
    report.config["folds"] = k
    return report


@dataclass
class SweepResult:
    grid: list[float]
    mean_accuracy: list[float]
    per_split_accuracy: list[list[float]]  # [grid point][split]
    per_split_ood_rate: list[list[float]]
    held_out: list[int]
    config: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def best(self) -> float:
        return self.grid[int(np.argmax(self.mean_accuracy))]


def sweep_delta(corpus: Corpus, grid: Sequence[float], cfg: ExperimentConfig = ExperimentConfig(),
                splits: Sequence[SplitPlan] | None = None) -> SweepResult:
    """Leave-one-domain-out accuracy for each threshold in ``grid``.

    Models are trained once per split; the threshold only affects inference,
    so each grid point re-scores the cached query dot products.
    """
    grid = [check_delta_star(float(g)) for g in grid]
    if not grid:
        raise ValueError("the delta_star grid is empty")
    splits = make_lodo_splits(corpus) if splits is None else splits
    y, doms = corpus.labels, corpus.domains
    acc = np.zeros((len(grid), len(splits)))
    ood = np.zeros_like(acc)
    for s, sp in enumerate(splits):
        enc, H_train, H_test, _, _ = _encode_split(corpus, sp, cfg)
        clf = cfg.estimator("adaptive").fit_encoded(H_train, y[sp.train], doms[sp.train], encoder=enc)
        dots = clf.scorer_.dot_products(H_test)
        for g, ds in enumerate(grid):
            clf.set_params(delta_star=ds)
            out = clf.infer_encoded(H_test, _dots=dots)
            acc[g, s] = np.mean(clf.classes_[out.predictions] == y[sp.test])
            ood[g, s] = np.mean(out.ood)
    return SweepResult(grid, acc.mean(axis=1).tolist(), acc.tolist(), ood.tolist(),
                       [sp.held_out for sp in splits], cfg.to_dict())


def bench(corpus: Corpus, fractions: Sequence[float], cfg: ExperimentConfig = ExperimentConfig(),
          holdout: int | None = None, repeats: int = 1) -> list[dict]:
    """Train and inference wall-clock on nested seeded subsamples of the corpus.

    Each fraction keeps a prefix of one seeded permutation, so larger
    fractions contain the smaller ones. The held-out domain (default: the
    highest domain id) is the test set; the rest train. Timings are the
    minimum over ``repeats`` rounds, each round timing every fraction once.
    """
    fractions = [float(f) for f in fractions]
    if not fractions or any(not 0.0 < f <= 1.0 for f in fractions):
        raise ValueError(f"fractions must lie in (0, 1], got {fractions}")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    domains = corpus.domains
    holdout = int(domains.max()) if holdout is None else int(holdout)
    if holdout not in set(domains.tolist()):
        raise ValueError(f"holdout domain {holdout} is not in the corpus")
    perm = HvRng(cfg.seed, hvcore.STREAM_SUBSAMPLE).generator(0).permutation(len(corpus))
    y = corpus.labels
    plans = []
    for f in fractions:
        keep = np.sort(perm[: max(1, int(round(f * len(corpus))))])
        train = keep[domains[keep] != holdout]
        test = keep[domains[keep] == holdout]
        if len(train) == 0 or len(test) == 0:
            raise ValueError(f"fraction {f} leaves an empty train or test set")
        plans.append((train, test))
    best_train = [float("inf")] * len(plans)
    best_infer = [float("inf")] * len(plans)
    preds = [None] * len(plans)
    # round-robin over fractions so a burst of background load hits them all alike
    for _ in range(repeats):
        for i, (train, test) in enumerate(plans):
            t0 = time.perf_counter()
            clf = cfg.estimator("adaptive").fit(corpus.values(train), y[train], domains[train])
            t1 = time.perf_counter()
            preds[i] = clf.predict(corpus.values(test))
            t2 = time.perf_counter()
            best_train[i] = min(best_train[i], t1 - t0)
            best_infer[i] = min(best_infer[i], t2 - t1)
    rows = []
    for f, (train, test), tr, inf, pred in zip(fractions, plans, best_train, best_infer, preds):
        rows.append({
            "fraction": f,
            "n_train": int(len(train)),
            "n_test": int(len(test)),
            "train_seconds": tr,
            "infer_seconds": inf,
            "train_throughput": len(train) / tr,
            "infer_throughput": len(test) / inf,
            "accuracy": float(np.mean(pred == y[test])),
        })
    return rows


def write_predictions(records: Sequence[PredictionRecord], path) -> None:
    """Per-sample records as JSON lines (``.jsonl``) or CSV (anything else).

    In CSV the two list fields are space-separated numbers.
    """
    path = Path(path)
    if path.suffix == ".jsonl":
        with path.open("w") as fh:
            for r in records:
                fh.write(json.dumps(asdict(r)) + "\n")
        return
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["arm", "split", "segment_id", "domain", "label", "prediction", "ood",
                    "domain_similarities", "class_scores"])
        for r in records:
            w.writerow([r.arm, r.split, r.segment_id, r.domain, "" if r.label is None else r.label,
                        r.prediction, int(r.ood),
                        " ".join(repr(v) for v in r.domain_similarities),
                        " ".join(repr(v) for v in r.class_scores)])


def read_predictions(path) -> list[dict]:
    path = Path(path)
    if path.suffix == ".jsonl":
        return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    out = []
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            row["split"] = int(row["split"])
            row["segment_id"] = int(row["segment_id"])
            row["domain"] = int(row["domain"])
            row["label"] = int(row["label"]) if row["label"] != "" else None
            row["prediction"] = int(row["prediction"])
            row["ood"] = bool(int(row["ood"]))
            row["domain_similarities"] = [float(v) for v in row["domain_similarities"].split()]
            row["class_scores"] = [float(v) for v in row["class_scores"].split()]
            out.append(row)
    return out
