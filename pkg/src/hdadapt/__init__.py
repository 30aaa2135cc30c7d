"""Hyperdimensional domain-adaptive classification of multi-sensor time series."""

from .adapt import AdaptConfig, EnsembleScorer, InferenceOutcome, TestTimeModel
from .data import Corpus, CorpusSchema, SynthSpec, generate_synthetic, load_corpus, write_corpus
from .encoder import EncoderConfig, HDEncoder, Segment
from .estimators import DomainAdaptiveHDClassifier, PooledHDClassifier
from .hvcore import HvRng
from .model import DomainDescriptor, DomainModel, TrainConfig

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig",
    "Corpus",
    "CorpusSchema",
    "DomainAdaptiveHDClassifier",
    "DomainDescriptor",
    "DomainModel",
    "EncoderConfig",
    "EnsembleScorer",
    "HDEncoder",
    "HvRng",
    "InferenceOutcome",
    "PooledHDClassifier",
    "Segment",
    "SynthSpec",
    "TestTimeModel",
    "TrainConfig",
    "generate_synthetic",
    "load_corpus",
    "write_corpus",
]
