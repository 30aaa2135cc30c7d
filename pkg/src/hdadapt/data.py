"""Corpus loading, domain-aware splits and a seeded synthetic generator.

On disk a corpus is a long-form CSV with header
``segment_id,domain,label,t,s1,...,sm``: one row per timestep of one segment.
Loaders take already-windowed segments; raw dataset windowing is out of
scope (see README for the per-dataset recipes).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from . import hvcore
from .encoder import Segment
from .hvcore import HvRng


class CorpusError(ValueError):
    """Malformed or inconsistent corpus data."""


# domain sizes are segment counts per domain
DATASET_LAYOUTS = {
    "dsads": dict(n_classes=19, n_domains=4, sample_rate_hz=25, window_seconds=5.0,
                  overlap=0.0, n_timesteps=125, domain_sizes=(2280, 2280, 2280, 2280)),
    "usc-had": dict(n_classes=12, n_domains=5, sample_rate_hz=100, window_seconds=1.26,
                    overlap=0.5, n_timesteps=126,
                    domain_sizes=(8945, 8754, 8534, 8867, 8274)),
    "pamap2": dict(n_classes=18, n_domains=4, sample_rate_hz=100, window_seconds=1.27,
                   overlap=0.5, n_timesteps=127, domain_sizes=(5636, 5591, 5806, 5660)),
}


@dataclass
class Corpus:
    segments: list[Segment]
    name: str = "corpus"

    def __post_init__(self):
        if not self.segments:
            raise CorpusError("corpus has no segments")
        m = self.segments[0].n_sensors
        bad = [s.segment_id for s in self.segments if s.n_sensors != m]
        if bad:
            raise CorpusError(f"segments {bad[:10]} do not have {m} sensors")
        for attr in ("label", "domain"):
            vals = [getattr(s, attr) for s in self.segments]
            if min(vals) < 0:
                raise CorpusError(f"negative {attr} ids are not allowed")

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def m(self) -> int:
        return self.segments[0].n_sensors

    @property
    def n(self) -> int:
        return max(s.label for s in self.segments) + 1

    @property
    def K(self) -> int:
        return max(s.domain for s in self.segments) + 1

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.segments])

    @property
    def domains(self) -> np.ndarray:
        return np.array([s.domain for s in self.segments])

    @property
    def segment_ids(self) -> np.ndarray:
        return np.array([s.segment_id for s in self.segments])

    def values(self, idx=None) -> list[np.ndarray]:
        segs = self.segments if idx is None else [self.segments[i] for i in idx]
        return [s.values for s in segs]

    def subset(self, idx, name=None) -> "Corpus":
        return Corpus([self.segments[i] for i in idx], name or self.name)

    def domain_counts(self) -> dict[int, int]:
        ids, counts = np.unique(self.domains, return_counts=True)
        return {int(i): int(c) for i, c in zip(ids, counts)}


@dataclass(frozen=True)
class CorpusSchema:
    """Column roles of a long-form corpus file. ``sensors=None`` takes every
    column named ``s<number>`` in numeric order."""

    segment_id: str = "segment_id"
    domain: str = "domain"
    label: str = "label"
    t: str = "t"
    sensors: tuple[str, ...] | None = None

    def sensor_columns(self, columns: Sequence[str]) -> list[str]:
        if self.sensors is not None:
            return list(self.sensors)
        found = [c for c in columns if len(c) > 1 and c[0] == "s" and c[1:].isdigit()]
        return sorted(found, key=lambda c: int(c[1:]))


def load_corpus(path, schema: CorpusSchema = CorpusSchema(), name: str | None = None) -> Corpus:
    """Read a long-form CSV corpus, validating it row by row.

    Row numbers in error messages are 1-based file lines (the header is line 1).
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise CorpusError(f"{path}: cannot read corpus: {exc}") from exc
    sensors = schema.sensor_columns(df.columns)
    required = [schema.segment_id, schema.domain, schema.label, schema.t]
    missing = [c for c in required + sensors if c not in df.columns]
    if missing:
        raise CorpusError(f"{path}: missing columns {missing}")
    if not sensors:
        raise CorpusError(f"{path}: no sensor columns (expected s1, s2, ...)")

    def lines(mask) -> list[int]:
        return (np.flatnonzero(mask) + 2).tolist()[:10]

    for col in required:
        vals = pd.to_numeric(df[col], errors="coerce")
        bad = vals.isna().to_numpy() | (vals.to_numpy() != np.round(vals.to_numpy()))
        if bad.any():
            raise CorpusError(f"{path}: column {col!r} must hold integers; bad rows at lines {lines(bad)}")
        df[col] = vals.astype(np.int64)
    readings = df[sensors].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(readings).all(axis=1)
    if bad.any():
        raise CorpusError(f"{path}: non-finite or non-numeric readings at lines {lines(bad)}")

    seg = df[schema.segment_id].to_numpy()
    order = np.lexsort((df[schema.t].to_numpy(), seg))
    segments = []
    bounds = np.flatnonzero(np.diff(seg[order])) + 1
    for rows in np.split(order, bounds):
        sid = int(seg[rows[0]])
        t = df[schema.t].to_numpy()[rows]
        if not np.array_equal(t, np.arange(len(rows))):
            raise CorpusError(
                f"{path}: segment {sid} is ragged: timesteps must be 0..{len(rows) - 1} exactly once "
                f"(rows at lines {sorted((rows + 2).tolist())[:10]})"
            )
        for col in (schema.domain, schema.label):
            v = df[col].to_numpy()[rows]
            if np.any(v != v[0]):
                raise CorpusError(
                    f"{path}: segment {sid} has inconsistent {col} values "
                    f"at lines {(rows[v != v[0]] + 2).tolist()[:10]}"
                )
        segments.append(Segment(readings[rows].T.copy(), int(df[schema.domain].iat[rows[0]]),
                                int(df[schema.label].iat[rows[0]]), sid))
    return Corpus(segments, name or path.stem)


def write_corpus(corpus: Corpus, path) -> None:
    """Write the canonical long form, sorted by segment id then timestep.

    Floats are written with the shortest round-tripping representation, so
    loading the file back gives bit-identical readings.
    """
    m = corpus.m
    parts = []
    for s in sorted(corpus.segments, key=lambda s: s.segment_id):
        T = s.n_timesteps
        block = {"segment_id": np.full(T, s.segment_id), "domain": np.full(T, s.domain),
                 "label": np.full(T, s.label), "t": np.arange(T)}
        for i in range(m):
            block[f"s{i + 1}"] = s.values[i]
        parts.append(pd.DataFrame(block))
    pd.concat(parts, ignore_index=True).to_csv(path, index=False)


def check_layout(corpus: Corpus, dataset: str) -> list[str]:
    """Compare a corpus with a known dataset layout; returns a list of mismatches."""
    layout = DATASET_LAYOUTS[dataset]
    problems = []
    if corpus.n != layout["n_classes"]:
        problems.append(f"{corpus.n} classes, expected {layout['n_classes']}")
    if corpus.K != layout["n_domains"]:
        problems.append(f"{corpus.K} domains, expected {layout['n_domains']}")
    counts = corpus.domain_counts()
    for k, size in enumerate(layout["domain_sizes"]):
        if counts.get(k) != size:
            problems.append(f"domain {k} has {counts.get(k, 0)} segments, expected {size}")
    return problems


# ---------------------------------------------------------------- splits


@dataclass
class SplitPlan:
    kind: str  # "lodo" or "kfold"
    held_out: int  # domain id (lodo) or fold index (kfold)
    train: np.ndarray
    test: np.ndarray
    seed: int | None = None
    k: int | None = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "held_out": self.held_out, "k": self.k, "seed": self.seed,
                "train": self.train.tolist(), "test": self.test.tolist()}


def make_lodo_splits(c: Corpus) -> list[SplitPlan]:
    """One split per domain: that domain is the test set, the rest train."""
    domains = c.domains
    present = np.unique(domains)
    if len(present) < 2:
        raise ValueError(f"leave-one-domain-out needs at least 2 domains, corpus has {len(present)}")
    return [
        SplitPlan("lodo", int(k), np.flatnonzero(domains != k), np.flatnonzero(domains == k))
        for k in present
    ]


def make_kfold_splits(c: Corpus, k: int, seed: int = 0) -> list[SplitPlan]:
    """Seeded uniform partition into ``k`` folds whose sizes differ by at most one."""
    N = len(c)
    if isinstance(k, bool) or int(k) != k or not 2 <= k <= N:
        raise ValueError(f"k must be an integer in [2, {N}], got {k}")
    perm = HvRng(seed, hvcore.STREAM_SPLIT).generator(0).permutation(N)
    folds = np.array_split(perm, int(k))
    out = []
    for i, fold in enumerate(folds):
        test = np.sort(fold)
        train = np.sort(np.concatenate([f for j, f in enumerate(folds) if j != i]))
        out.append(SplitPlan("kfold", i, train, test, seed=seed, k=int(k)))
    return out


def splits_to_json(splits: Sequence[SplitPlan], path=None) -> str:
    text = json.dumps([s.to_dict() for s in splits])
    if path is not None:
        Path(path).write_text(text)
    return text


# ------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic distribution-shift corpus.

    ``shift`` scales the per-domain offset and amplitude distortion; 0 makes
    every domain identically distributed.
    """

    n_domains: int = 4
    n_classes: int = 4
    n_sensors: int = 3
    n_timesteps: int = 32
    samples_per_class: int = 100
    shift: float = 2.0
    noise: float = 0.3
    seed: int = 0

    def __post_init__(self):
        for f in ("n_domains", "n_classes", "n_sensors", "n_timesteps", "samples_per_class"):
            v = getattr(self, f)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ValueError(f"{f} must be a positive integer, got {v!r}")
        if not np.isfinite(self.shift) or self.shift < 0:
            raise ValueError(f"shift must be >= 0, got {self.shift}")
        if not np.isfinite(self.noise) or self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, path) -> "SynthSpec":
        return cls(**json.loads(Path(path).read_text()))


def generate_synthetic(spec: SynthSpec = SynthSpec()) -> Corpus:
    """Seeded sinusoid-plus-noise corpus with per-domain distortions.

    Each (class, sensor) pair has a sinusoid template shared by all domains.
    Each (domain, sensor) pair draws an additive offset and a gain whose
    spread grows with ``spec.shift``, so classes stay separable inside a
    domain while the domains' marginals differ.
    """
    base = HvRng(spec.seed, hvcore.STREAM_SYNTH)
    K, n, m, T = spec.n_domains, spec.n_classes, spec.n_sensors, spec.n_timesteps
    g = base.generator(0)
    amp = g.uniform(0.6, 1.4, size=(n, m))
    freq = g.uniform(0.5, 2.5, size=(n, m))
    phase = g.uniform(0.0, 2 * np.pi, size=(n, m))
    t = np.arange(T) / T
    templates = amp[..., None] * np.sin(2 * np.pi * freq[..., None] * t + phase[..., None])

    segments = []
    sid = 0
    for k in range(K):
        gk = base.generator(1, k)
        offset = spec.shift * gk.standard_normal(m)
        gain = np.exp(0.25 * spec.shift * gk.standard_normal(m))
        for c in range(n):
            for _ in range(spec.samples_per_class):
                x = gain[:, None] * templates[c] + offset[:, None]
                x = x + spec.noise * gk.standard_normal((m, T))
                segments.append(Segment(x, k, c, sid))
                sid += 1
    return Corpus(segments, name=f"synthetic-shift{spec.shift:g}-seed{spec.seed}")
