"""scikit-learn compatible classifiers.

``DomainAdaptiveHDClassifier`` trains one prototype model and one descriptor
per source domain and builds a similarity-weighted ensemble for every query.
``PooledHDClassifier`` is the single-model comparator: same encoder, same
update rule, all domains merged.
"""

from __future__ import annotations

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import hvcore
from ._validation import (
    check_delta_star,
    check_encoded,
    check_eta,
    check_labels,
    check_positive_int,
    check_segments,
)
from .adapt import AdaptConfig, BatchOutcome, EnsembleScorer
from .encoder import HDEncoder
from .hvcore import HvRng
from .model import DomainDescriptor, DomainModel, fit_prototypes


class _HDBase(ClassifierMixin, BaseEstimator):
    def _validate_hyperparams(self):
        check_positive_int(self.dim, "dim")
        check_positive_int(self.ngram, "ngram")
        check_positive_int(self.epochs, "epochs")
        check_eta(self.eta)

    def _make_encoder(self):
        return HDEncoder(dim=self.dim, ngram=self.ngram, random_state=self.random_state,
                         n_jobs=self.n_jobs)

    def _encode(self, X):
        check_is_fitted(self, "encoder_")
        return self.encoder_.transform(X)

    def _prepare_targets(self, H, y):
        y = check_labels(y, H.shape[0])
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        return y_idx

    def fit(self, X, y, domains=None):
        """Fit the encoder on ``X`` and train on the encoded segments.

        ``X`` is a 3-D array (n_samples, n_sensors, n_timesteps) or a list of
        (n_sensors, n_timesteps) arrays. ``domains`` gives the source domain of
        each sample; ``None`` means a single domain.
        """
        self._validate_hyperparams()
        X = check_segments(X, min_timesteps=self.ngram)
        encoder = self._make_encoder().fit(X)
        return self.fit_encoded(encoder.transform(X), y, domains, encoder=encoder)

    def predict(self, X):
        return self.predict_encoded(self._encode(X))

    def infer(self, X) -> BatchOutcome:
        """Predictions plus OOD flags, domain similarities and class scores."""
        return self.infer_encoded(self._encode(X))

    def decision_function(self, X):
        """Cosine similarity of each sample to each class prototype, (n_samples, n_classes)."""
        return self.infer_encoded(self._encode(X)).class_scores


class DomainAdaptiveHDClassifier(_HDBase):
    """Hyperdimensional classifier with per-domain models and test-time ensembling.

    Parameters
    ----------
    dim : int, default=8192
        Hypervector dimension.
    ngram : int, default=3
        Timesteps per encoding window.
    eta : float, default=0.05
        Learning rate of the prototype update.
    epochs : int, default=20
        Maximum number of shuffled passes per domain.
    delta_star : float, default=0.65
        Descriptor-similarity threshold. A query whose best domain similarity
        is below it is out-of-distribution and uses every domain model;
        otherwise only domains at or above the threshold are ensembled.
        Used at prediction time only, so it can be changed after fitting.
    allow_negative_weights : bool, default=False
        Keep negative descriptor similarities as ensemble weights instead of
        clamping them to zero.
    random_state : int, default=0
        Seed for the encoder and the per-domain shuffles.
    n_jobs : int or None
        Threads for encoding and per-domain training. Results do not depend
        on it.

    Attributes
    ----------
    encoder_ : HDEncoder
    classes_ : ndarray of shape (n_classes,)
    domains_ : ndarray of shape (n_domains,)
        Original domain identifiers, in model order.
    prototypes_ : ndarray of shape (n_domains, n_classes, dim)
    descriptors_ : ndarray of shape (n_domains, dim)
    descriptor_counts_ : ndarray of shape (n_domains,)
    """

    def __init__(self, dim=hvcore.DEFAULT_DIM, ngram=3, eta=0.05, epochs=20, delta_star=0.65,
                 allow_negative_weights=False, random_state=0, n_jobs=None):
        self.dim = dim
        self.ngram = ngram
        self.eta = eta
        self.epochs = epochs
        self.delta_star = delta_star
        self.allow_negative_weights = allow_negative_weights
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _validate_hyperparams(self):
        super()._validate_hyperparams()
        check_delta_star(self.delta_star)

    def fit_encoded(self, H, y, domains=None, encoder=None):
        """Train from already-encoded hypervectors ``H`` of shape (n_samples, dim)."""
        self._validate_hyperparams()
        H = check_encoded(H, self.dim)
        y_idx = self._prepare_targets(H, y)
        if domains is None:
            domains = np.zeros(H.shape[0], dtype=int)
        domains = check_labels(domains, H.shape[0], "domains")
        self.domains_, d_idx = np.unique(domains, return_inverse=True)
        if encoder is not None:
            self.encoder_ = encoder

        K, n = len(self.domains_), len(self.classes_)
        shuffle = HvRng(int(self.random_state), hvcore.STREAM_SHUFFLE)

        def one(k):
            sel = d_idx == k
            return fit_prototypes(H[sel], y_idx[sel], n, self.eta, self.epochs, shuffle.generator(k))

        if self.n_jobs in (None, 1):
            protos = [one(k) for k in range(K)]
        else:
            protos = Parallel(n_jobs=self.n_jobs, prefer="threads")(delayed(one)(k) for k in range(K))
        self.prototypes_ = np.stack(protos)
        self.descriptors_ = np.stack([H[d_idx == k].sum(axis=0) for k in range(K)])
        self.descriptor_counts_ = np.bincount(d_idx, minlength=K)
        self._scorer = None
        return self

    @property
    def scorer_(self) -> EnsembleScorer:
        check_is_fitted(self, "prototypes_")
        if getattr(self, "_scorer", None) is None:
            self._scorer = EnsembleScorer(self.prototypes_, self.descriptors_)
        return self._scorer

    def adapt_config(self) -> AdaptConfig:
        return AdaptConfig(check_delta_star(self.delta_star), bool(self.allow_negative_weights))

    def infer_encoded(self, H, _dots=None) -> BatchOutcome:
        """Full inference record for encoded queries; ``predictions`` are class indices."""
        H = check_encoded(H, self.dim)
        return self.scorer_.score(H, self.adapt_config(), _dots=_dots)

    def predict_encoded(self, H):
        return self.classes_[self.infer_encoded(H).predictions]

    def domain_models(self) -> list[DomainModel]:
        check_is_fitted(self, "prototypes_")
        return [DomainModel(k, self.prototypes_[k]) for k in range(len(self.domains_))]

    def domain_descriptors(self) -> list[DomainDescriptor]:
        check_is_fitted(self, "descriptors_")
        return [DomainDescriptor(k, self.descriptors_[k], int(c))
                for k, c in enumerate(self.descriptor_counts_)]


class PooledHDClassifier(_HDBase):
    """One prototype model trained on all source domains merged.

    Uses the same encoder and update rule as
    :class:`DomainAdaptiveHDClassifier`; ``domains`` is accepted and ignored.
    """

    def __init__(self, dim=hvcore.DEFAULT_DIM, ngram=3, eta=0.05, epochs=20, random_state=0,
                 n_jobs=None):
        self.dim = dim
        self.ngram = ngram
        self.eta = eta
        self.epochs = epochs
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit_encoded(self, H, y, domains=None, encoder=None):
        self._validate_hyperparams()
        H = check_encoded(H, self.dim)
        y_idx = self._prepare_targets(H, y)
        if encoder is not None:
            self.encoder_ = encoder
        gen = HvRng(int(self.random_state), hvcore.STREAM_SHUFFLE).generator(0)
        self.prototypes_ = fit_prototypes(H, y_idx, len(self.classes_), self.eta, self.epochs, gen)
        return self

    def infer_encoded(self, H) -> BatchOutcome:
        check_is_fitted(self, "prototypes_")
        H = check_encoded(H, self.dim)
        scores = hvcore.cosine_matrix(H, self.prototypes_)
        N = H.shape[0]
        return BatchOutcome(np.argmax(scores, axis=1), np.zeros(N, dtype=bool),
                            np.ones((N, 1)), scores, np.ones((N, 1)))

    def predict_encoded(self, H):
        return self.classes_[self.infer_encoded(H).predictions]
