"""Test-time model construction and inference.

A query is compared with every domain descriptor. If its best match falls
below ``delta_star`` the query is treated as out-of-distribution and all
domain models are ensembled, each weighted by its descriptor similarity.
Otherwise only the domains whose similarity reaches ``delta_star`` take
part. The query gets the class whose ensembled prototype is most similar.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import hvcore
from ._validation import check_delta_star
from .model import DomainDescriptor, DomainModel


@dataclass(frozen=True)
class AdaptConfig:
    delta_star: float = 0.65
    # off by default: negative weights would subtract prototype evidence
    allow_negative_weights: bool = False

    def __post_init__(self):
        check_delta_star(self.delta_star)


@dataclass
class TestTimeModel:
    classes: np.ndarray  # (n, d)
    provenance: list[tuple[int, float]] = field(default_factory=list)

    __test__ = False  # not a pytest class


@dataclass
class InferenceOutcome:
    prediction: int
    ood: bool
    domain_similarities: np.ndarray
    class_scores: np.ndarray


def _descriptor_matrix(descriptors) -> np.ndarray:
    if isinstance(descriptors, np.ndarray):
        U = np.atleast_2d(descriptors)
    else:
        descriptors = list(descriptors)
        if not descriptors:
            raise ValueError("at least one domain descriptor is required")
        U = np.vstack([d.u if isinstance(d, DomainDescriptor) else np.asarray(d) for d in descriptors])
    if U.shape[0] == 0:
        raise ValueError("at least one domain descriptor is required")
    return U.astype(np.float64, copy=False)


def domain_similarities(q, descriptors: Sequence[DomainDescriptor] | np.ndarray) -> np.ndarray:
    U = _descriptor_matrix(descriptors)
    q = np.asarray(q, dtype=np.float64)
    return np.array([hvcore.similarity(q, u) for u in U])


def detect_ood(sims, cfg: AdaptConfig = AdaptConfig()) -> bool:
    return bool(np.max(sims) < cfg.delta_star)


def ensemble_weights(sims, ood: bool, cfg: AdaptConfig = AdaptConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Per-domain weights and the mask of domains taking part."""
    sims = np.asarray(sims, dtype=np.float64)
    w = sims.copy() if cfg.allow_negative_weights else np.maximum(sims, 0.0)
    if ood:
        mask = np.ones(sims.shape, dtype=bool)
    else:
        mask = sims >= cfg.delta_star
        if not mask.any():
            raise ValueError(
                f"in-distribution query but no domain similarity reaches delta_star={cfg.delta_star}"
            )
    return np.where(mask, w, 0.0), mask


def build_test_time_model(sims, ood: bool, models: Sequence[DomainModel],
                          cfg: AdaptConfig = AdaptConfig()) -> TestTimeModel:
    models = list(models)
    if not models:
        raise ValueError("at least one domain model is required")
    if len(models) != len(sims):
        raise ValueError(f"{len(sims)} similarities for {len(models)} domain models")
    shapes = {m.classes.shape for m in models}
    if len(shapes) != 1:
        raise ValueError(f"domain models disagree on (classes, dim): {sorted(shapes)}")
    w, mask = ensemble_weights(sims, ood, cfg)
    classes = np.zeros(models[0].classes.shape)
    provenance = []
    for k in np.flatnonzero(mask):
        classes += w[k] * models[k].classes
        provenance.append((models[k].domain, float(w[k])))
    return TestTimeModel(classes, provenance)


def infer(q, models: Sequence[DomainModel], descriptors, cfg: AdaptConfig = AdaptConfig()) -> InferenceOutcome:
    sims = domain_similarities(q, descriptors)
    ood = detect_ood(sims, cfg)
    mt = build_test_time_model(sims, ood, models, cfg)
    q = np.asarray(q, dtype=np.float64)
    scores = np.array([hvcore.similarity(q, c) for c in mt.classes])
    return InferenceOutcome(int(np.argmax(scores)), ood, sims, scores)


@dataclass
class BatchOutcome:
    predictions: np.ndarray  # (N,) class indices
    ood: np.ndarray  # (N,) bool
    domain_similarities: np.ndarray  # (N, K)
    class_scores: np.ndarray  # (N, n)
    weights: np.ndarray  # (N, K), zero for excluded domains


class EnsembleScorer:
    """Batch inference over fixed domain models and descriptors.

    The test-time model is never materialized. With per-domain dot products
    ``D[k, t] = q . C_t^k`` and per-class Gram matrices
    ``G_t[k, l] = C_t^k . C_t^l``, the similarity of ``q`` to the ensembled
    prototype is ``sum_k w_k D[k, t] / (|q| sqrt(w^T G_t w))``.

    Each query is processed with fixed-shape products, so its outcome does
    not depend on the rest of the batch.
    """

    def __init__(self, prototypes: np.ndarray, descriptors: np.ndarray):
        P = np.asarray(prototypes, dtype=np.float64)
        U = _descriptor_matrix(descriptors)
        if P.ndim != 3 or P.shape[0] != U.shape[0] or P.shape[2] != U.shape[1]:
            raise ValueError(
                f"prototypes {P.shape} and descriptors {U.shape} are inconsistent; "
                "expected (K, n, d) and (K, d)"
            )
        self.K, self.n, self.d = P.shape
        self.prototypes = P
        self.descriptors = U
        self._stacked = np.ascontiguousarray(np.concatenate([U, P.reshape(self.K * self.n, self.d)]))
        self._unorm = np.linalg.norm(U, axis=1)
        self._gram = np.einsum("knd,lnd->nkl", P, P)

    @classmethod
    def from_models(cls, models: Sequence[DomainModel], descriptors) -> "EnsembleScorer":
        return cls(np.stack([m.classes for m in models]), descriptors)

    def dot_products(self, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Descriptor dots (N, K) and prototype dots (N, K, n)."""
        Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
        if Q.shape[1] != self.d:
            raise ValueError(f"dimension mismatch: {Q.shape[1]} vs {self.d}")
        out = np.empty((Q.shape[0], self._stacked.shape[0]))
        for i, q in enumerate(Q):
            out[i] = self._stacked @ q
        return out[:, : self.K], out[:, self.K :].reshape(-1, self.K, self.n)

    def score(self, Q, cfg: AdaptConfig = AdaptConfig(), _dots=None) -> BatchOutcome:
        Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
        du, dp = self.dot_products(Q) if _dots is None else _dots
        qn = np.linalg.norm(Q, axis=1)

        denom = qn[:, None] * self._unorm[None, :]
        sims = np.zeros_like(du)
        np.divide(du, denom, out=sims, where=denom > 0)
        np.clip(sims, -1.0, 1.0, out=sims)

        ood = sims.max(axis=1) < cfg.delta_star
        mask = ood[:, None] | (sims >= cfg.delta_star)
        w = sims if cfg.allow_negative_weights else np.maximum(sims, 0.0)
        w = np.where(mask, w, 0.0)

        num = np.einsum("ik,ikt->it", w, dp)
        norm2 = np.einsum("ik,tkl,il->it", w, self._gram, w)
        cden = qn[:, None] * np.sqrt(np.maximum(norm2, 0.0))
        scores = np.zeros_like(num)
        np.divide(num, cden, out=scores, where=cden > 0)
        np.clip(scores, -1.0, 1.0, out=scores)
        return BatchOutcome(np.argmax(scores, axis=1), ood, sims, scores, w)
