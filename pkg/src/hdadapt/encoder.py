"""Multi-sensor time-series encoder.

Each reading is mapped to a *level* hypervector by linear interpolation
between two per-sensor anchors. Consecutive levels are combined into n-gram
window vectors with permutation (older timesteps are shifted more), the
windows of one sensor are bundled, and the sensors are fused by binding each
to its own signature vector and bundling the results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import hvcore
from ._validation import check_segments
from .hvcore import HvRng

_MAX_PATTERN_NGRAM = 12


@dataclass
class Segment:
    """One labelled sample: ``values`` has shape (m sensors, T timesteps)."""

    values: np.ndarray
    domain: int
    label: int
    segment_id: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise ValueError(
                f"segment {self.segment_id}: values must be a 2-D (sensors, timesteps) array, "
                f"got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"segment {self.segment_id}: non-finite readings")

    @property
    def n_sensors(self) -> int:
        return self.values.shape[0]

    @property
    def n_timesteps(self) -> int:
        return self.values.shape[1]


@dataclass
class EncodedSample:
    hv: np.ndarray
    domain: int
    label: int


@dataclass
class EncoderConfig:
    d: int
    ngram: int
    anchors_min: np.ndarray  # (m, d)
    anchors_max: np.ndarray  # (m, d)
    signatures: np.ndarray  # (m, d)
    ranges: np.ndarray  # (m, 2): y_min, y_max
    seed: int = 0
    _rolled: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_sensors(self) -> int:
        return self.anchors_min.shape[0]

    def _check_sensor(self, sensor: int) -> None:
        if not 0 <= sensor < self.n_sensors:
            raise KeyError(f"unknown sensor id {sensor}; encoder has {self.n_sensors} sensors")

    def rolled_anchors(self, sensor: int, shift: int) -> tuple[np.ndarray, np.ndarray]:
        # permute(H_min + w (H_max - H_min), s) == permute(H_min, s) + w permute(H_max - H_min, s)
        key = (sensor, shift)
        if key not in self._rolled:
            lo = self.anchors_min[sensor]
            span = self.anchors_max[sensor] - lo
            self._rolled[key] = (np.roll(lo, shift), np.roll(span, shift))
        return self._rolled[key]

    @property
    def bipolar_anchors(self) -> bool:
        if "bipolar" not in self._rolled:
            self._rolled["bipolar"] = hvcore.is_bipolar(self.anchors_min) and hvcore.is_bipolar(self.anchors_max)
        return self._rolled["bipolar"]

    def pattern_tables(self, sensor: int) -> tuple[np.ndarray, np.ndarray]:
        key = ("pattern", sensor)
        if key not in self._rolled:
            n = self.ngram
            lo = self.anchors_min[sensor]
            differs = lo != self.anchors_max[sensor]
            sign = np.ones(self.d)
            pattern = np.zeros(self.d, dtype=np.intp)
            for k in range(n):
                sign = sign * np.roll(lo, n - 1 - k)
                pattern |= np.roll(differs, n - 1 - k).astype(np.intp) << k
            self._rolled[key] = (sign, pattern)
        return self._rolled[key]

    def level_weights(self, y, sensor: int) -> np.ndarray:
        self._check_sensor(sensor)
        y_min, y_max = self.ranges[sensor]
        y = np.asarray(y, dtype=np.float64)
        if not y_max > y_min:
            return np.zeros_like(y)
        return np.clip((y - y_min) / (y_max - y_min), 0.0, 1.0)


def fit_encoder(
    segments: Sequence[Segment] | Sequence[np.ndarray],
    d: int = hvcore.DEFAULT_DIM,
    ngram: int = 3,
    rng: HvRng | int = 0,
) -> EncoderConfig:
    """Fit per-sensor value ranges on training data and draw anchors/signatures."""
    arrays = [s.values if isinstance(s, Segment) else np.asarray(s, dtype=np.float64) for s in segments]
    if not arrays:
        raise ValueError("cannot fit an encoder on an empty training set")
    if ngram < 1:
        raise ValueError(f"ngram must be >= 1, got {ngram}")
    m = arrays[0].shape[0]
    if any(a.shape[0] != m for a in arrays):
        raise ValueError("all training segments must have the same number of sensors")
    d = hvcore._check_dim(d)
    if not isinstance(rng, HvRng):
        rng = HvRng(int(rng))

    lo = np.min([a.min(axis=1) for a in arrays], axis=0)
    hi = np.max([a.max(axis=1) for a in arrays], axis=0)
    anchor_rng = rng.with_stream(hvcore.STREAM_ANCHOR)
    sig_rng = rng.with_stream(hvcore.STREAM_SIGNATURE)
    return EncoderConfig(
        d=d,
        ngram=int(ngram),
        anchors_min=np.stack([anchor_rng.bipolar(2 * i, d) for i in range(m)]),
        anchors_max=np.stack([anchor_rng.bipolar(2 * i + 1, d) for i in range(m)]),
        signatures=np.stack([sig_rng.bipolar(i, d) for i in range(m)]),
        ranges=np.column_stack([lo, hi]),
        seed=rng.seed,
    )


def quantize_level(y: float, sensor: int, cfg: EncoderConfig) -> np.ndarray:
    """Level hypervector for reading ``y``; out-of-range values are clamped to the anchors."""
    w = float(cfg.level_weights(y, sensor))
    lo = cfg.anchors_min[sensor]
    return lo + w * (cfg.anchors_max[sensor] - lo)


def encode_sensor_window(levels: Sequence[np.ndarray], ngram: int | None = None) -> np.ndarray:
    """Bind an n-gram of level vectors, the k-th (1-based) shifted ``n - k`` times."""
    n = len(levels)
    if n == 0 or (ngram is not None and n != ngram):
        raise ValueError(f"expected {ngram if ngram is not None else 'a nonempty list of'} levels, got {n}")
    out = hvcore.permute(levels[0], n - 1)
    for k in range(1, n):
        out = hvcore.bind(out, hvcore.permute(levels[k], n - 1 - k))
    return out


def _encode_sensor_direct(w: np.ndarray, sensor: int, cfg: EncoderConfig) -> np.ndarray:
    n = cfg.ngram
    n_windows = w.shape[0] - n + 1
    lo, span = cfg.rolled_anchors(sensor, n - 1)
    prod = lo[None, :] + w[:n_windows, None] * span[None, :]
    for k in range(1, n):
        lo, span = cfg.rolled_anchors(sensor, n - 1 - k)
        prod = prod * (lo[None, :] + w[k : k + n_windows, None] * span[None, :])
    return prod.sum(axis=0)


def _encode_sensor_patterns(w: np.ndarray, sensor: int, cfg: EncoderConfig) -> np.ndarray:
    # With bipolar anchors each level is H_min * (1 - 2w) on the dimensions where
    # H_max != H_min and H_min elsewhere. A window product is therefore a fixed
    # sign vector times a product of (1 - 2w) factors selected by that
    # dimension's n-bit "anchors differ" pattern, and the window sum reduces to
    # one scalar per pattern.
    sign, pattern = cfg.pattern_tables(sensor)
    n = cfg.ngram
    n_windows = w.shape[0] - n + 1
    a = 1.0 - 2.0 * w
    table = np.ones((1 << n, n_windows))
    for k in range(n):
        bit = 1 << k
        table[bit : 2 * bit] = table[:bit] * a[k : k + n_windows]
    return sign * table.sum(axis=1)[pattern]


def encode_sensor(y: np.ndarray, sensor: int, cfg: EncoderConfig) -> np.ndarray:
    """Bundle of all stride-1 n-gram windows of one sensor's readings."""
    w = cfg.level_weights(y, sensor)
    if cfg.ngram <= _MAX_PATTERN_NGRAM and cfg.bipolar_anchors:
        return _encode_sensor_patterns(w, sensor, cfg)
    return _encode_sensor_direct(w, sensor, cfg)


def encode_values(values: np.ndarray, cfg: EncoderConfig, segment_id=None) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    m, T = values.shape
    if m != cfg.n_sensors:
        raise ValueError(
            f"segment {segment_id}: has {m} sensors, encoder was fitted on {cfg.n_sensors}"
        )
    if T < cfg.ngram:
        raise ValueError(
            f"segment {segment_id}: {T} timesteps is shorter than the n-gram size {cfg.ngram}"
        )
    out = np.zeros(cfg.d)
    for i in range(m):
        out += cfg.signatures[i] * encode_sensor(values[i], i, cfg)
    return out


def encode_segment(seg: Segment, cfg: EncoderConfig) -> EncodedSample:
    hv = encode_values(seg.values, cfg, segment_id=seg.segment_id)
    return EncodedSample(hv=hv, domain=seg.domain, label=seg.label)


def encode_batch(X, cfg: EncoderConfig, n_jobs=None, ids=None) -> np.ndarray:
    """Encode a batch of (m, T) arrays into an (N, d) matrix.

    Each row depends only on its own segment, so the result does not depend
    on ``n_jobs`` or on how the batch is chunked.
    """
    ids = range(len(X)) if ids is None else ids
    if n_jobs in (None, 1) or len(X) < 2:
        rows = [encode_values(x, cfg, segment_id=i) for x, i in zip(X, ids)]
    else:
        rows = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(encode_values)(x, cfg, i) for x, i in zip(X, ids)
        )
    if not rows:
        return np.zeros((0, cfg.d))
    return np.vstack(rows)


class HDEncoder(TransformerMixin, BaseEstimator):
    """Encode multi-sensor segments into hypervectors.

    Parameters
    ----------
    dim : int, default=8192
        Hypervector dimension.
    ngram : int, default=3
        Number of consecutive timesteps bound into one window vector.
    random_state : int, default=0
        Seed for the anchor and signature vectors.
    n_jobs : int or None
        Threads used by :meth:`transform`. Output is identical for any value.
    """

    def __init__(self, dim=hvcore.DEFAULT_DIM, ngram=3, random_state=0, n_jobs=None):
        self.dim = dim
        self.ngram = ngram
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        X = check_segments(X, min_timesteps=self.ngram)
        self.config_ = fit_encoder(X, d=self.dim, ngram=self.ngram, rng=HvRng(int(self.random_state)))
        self.n_sensors_ = self.config_.n_sensors
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = check_segments(X, min_timesteps=self.ngram)
        return encode_batch(X, self.config_, n_jobs=self.n_jobs)
