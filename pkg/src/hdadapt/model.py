"""Per-domain class prototypes and domain descriptors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from . import hvcore
from .encoder import EncodedSample
from .hvcore import HvRng


@dataclass
class DomainModel:
    domain: int
    classes: np.ndarray  # (n, d)

    @property
    def n_classes(self) -> int:
        return self.classes.shape[0]

    def copy(self) -> "DomainModel":
        return DomainModel(self.domain, self.classes.copy())


@dataclass
class DomainDescriptor:
    domain: int
    u: np.ndarray
    count: int


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.05
    epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.eta) or self.eta <= 0:
            raise ValueError(f"eta must be finite and positive, got {self.eta}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError(f"epochs must be a positive integer, got {self.epochs}")


def _class_scores(C: np.ndarray, q: np.ndarray) -> np.ndarray:
    qn = np.linalg.norm(q)
    denom = np.linalg.norm(C, axis=1) * qn
    out = np.zeros(C.shape[0])
    np.divide(C @ q, denom, out=out, where=denom > 0)
    return np.clip(out, -1.0, 1.0)


def predict_domain_model(m: DomainModel, q) -> tuple[int, np.ndarray]:
    """Most similar class (lowest index wins ties) and all class similarities."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape[-1] != m.classes.shape[1]:
        raise ValueError(f"dimension mismatch: {q.shape[-1]} vs {m.classes.shape[1]}")
    scores = _class_scores(m.classes, q)
    return int(np.argmax(scores)), scores


def update_on_sample(m: DomainModel, h: EncodedSample, eta: float) -> DomainModel:
    """Apply one similarity-weighted correction; returns a new model.

    Nothing changes when the sample is already classified correctly. Otherwise
    the true class moves toward ``h`` and the wrongly predicted class moves
    away, each scaled by ``eta * (1 - similarity)`` so novel samples count more.
    """
    j = int(h.label)
    if not 0 <= j < m.n_classes:
        raise ValueError(f"label {j} out of range for a model with {m.n_classes} classes")
    if h.domain != m.domain:
        raise ValueError(f"sample from domain {h.domain} cannot update the model of domain {m.domain}")
    i, _ = predict_domain_model(m, h.hv)
    out = m.copy()
    if i == j:
        return out
    hv = np.asarray(h.hv, dtype=np.float64)
    out.classes[j] += eta * (1.0 - hvcore.similarity(hv, m.classes[j])) * hv
    out.classes[i] -= eta * (1.0 - hvcore.similarity(hv, m.classes[i])) * hv
    return out


def fit_prototypes(H: np.ndarray, y: np.ndarray, n_classes: int, eta: float, epochs: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Train ``n_classes`` prototypes from zero with shuffled mismatch-driven passes."""
    N, d = H.shape
    C = np.zeros((n_classes, d))
    cnorm = np.zeros(n_classes)
    hnorm = np.linalg.norm(H, axis=1)
    sims = np.zeros(n_classes)
    for _ in range(epochs):
        for idx in rng.permutation(N):
            h = H[idx]
            denom = cnorm * hnorm[idx]
            sims[:] = 0.0
            np.divide(C @ h, denom, out=sims, where=denom > 0)
            np.clip(sims, -1.0, 1.0, out=sims)
            i = int(np.argmax(sims))
            j = int(y[idx])
            if i == j:
                continue
            C[j] += eta * (1.0 - sims[j]) * h
            C[i] -= eta * (1.0 - sims[i]) * h
            cnorm[j] = np.linalg.norm(C[j])
            cnorm[i] = np.linalg.norm(C[i])
    return C


def _partition(samples: Sequence[EncodedSample], K: int, n: int | None = None):
    groups: list[list[EncodedSample]] = [[] for _ in range(K)]
    for s in samples:
        if not 0 <= s.domain < K:
            raise ValueError(f"sample domain {s.domain} outside [0, {K})")
        if n is not None and not 0 <= s.label < n:
            raise ValueError(f"sample label {s.label} outside [0, {n})")
        groups[s.domain].append(s)
    empty = [k for k, g in enumerate(groups) if not g]
    if empty:
        raise ValueError(f"domains with no training samples: {empty}")
    return groups


def train_domain_models(samples: Sequence[EncodedSample], K: int, n: int,
                        cfg: TrainConfig = TrainConfig(), n_jobs=None) -> list[DomainModel]:
    """Train one prototype model per domain. Domains are independent, so they
    may run in parallel; each draws its shuffles from its own RNG stream."""
    groups = _partition(samples, K, n)
    shuffle = HvRng(cfg.seed, hvcore.STREAM_SHUFFLE)

    def one(k):
        H = np.vstack([s.hv for s in groups[k]])
        y = np.array([s.label for s in groups[k]])
        return DomainModel(k, fit_prototypes(H, y, n, cfg.eta, cfg.epochs, shuffle.generator(k)))

    if n_jobs in (None, 1):
        return [one(k) for k in range(K)]
    return list(Parallel(n_jobs=n_jobs, prefer="threads")(delayed(one)(k) for k in range(K)))


def build_descriptors(samples: Sequence[EncodedSample], K: int) -> list[DomainDescriptor]:
    """Bundle every encoded sample of each domain into that domain's descriptor."""
    groups = _partition(samples, K)
    return [
        DomainDescriptor(k, hvcore.bundle([s.hv for s in g]), len(g))
        for k, g in enumerate(groups)
    ]
