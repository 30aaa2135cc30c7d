"""Dense hypervector algebra: seeded base vectors, similarity, bundling,
binding and permutation.

Hypervectors are plain 1-D ``float64`` numpy arrays. Base vectors are
bipolar (+1/-1) so that binding is exactly self-inverse; everything derived
from them (bundles, prototypes, interpolated levels) is real-valued.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_DIM = 8192

# named RNG streams; keep values stable, they are part of the on-disk contract
STREAM_ANCHOR = 0
STREAM_SIGNATURE = 1
STREAM_SHUFFLE = 2
STREAM_SPLIT = 3
STREAM_SYNTH = 4
STREAM_SUBSAMPLE = 5


@dataclass(frozen=True)
class HvRng:
    """Stateless, index-addressable random source.

    Every draw is keyed by ``(seed, stream, index)`` so draws never depend on
    call order. Adding a sensor, for instance, does not change the vectors
    already drawn for the other sensors.
    """

    seed: int
    stream: int = 0

    def with_stream(self, stream: int) -> "HvRng":
        return HvRng(self.seed, stream)

    def generator(self, *index: int) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=int(self.seed) & 0xFFFFFFFFFFFFFFFF,
            spawn_key=(int(self.stream), *(int(i) for i in index)),
        )
        return np.random.default_rng(ss)

    def bipolar(self, index: int, d: int) -> np.ndarray:
        return random_bipolar(self, d, index)


def _check_dim(d: int) -> int:
    if isinstance(d, bool) or int(d) != d or d < 1:
        raise ValueError(f"invalid hypervector dimension {d!r}; must be a positive integer")
    return int(d)


def random_bipolar(rng: HvRng, d: int = DEFAULT_DIM, index: int = 0) -> np.ndarray:
    """Draw an i.i.d. +1/-1 hypervector addressed by ``(rng.seed, rng.stream, index)``."""
    d = _check_dim(d)
    bits = rng.generator(index).integers(0, 2, size=d, dtype=np.int8)
    return (2.0 * bits - 1.0).astype(np.float64)


def _same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def similarity(a, b) -> float:
    """Cosine similarity; 0.0 when either vector has zero norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _same_dim(a, b)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    s = float(np.dot(a, b) / (na * nb))
    return min(1.0, max(-1.0, s))


def cosine_matrix(A, B) -> np.ndarray:
    """Pairwise cosine similarity between the rows of ``A`` and ``B``.

    Rows with zero norm produce 0 similarity, matching :func:`similarity`.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    _same_dim(A, B)
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    dots = A @ B.T
    denom = np.outer(na, nb)
    out = np.zeros_like(dots)
    np.divide(dots, denom, out=out, where=denom > 0)
    return np.clip(out, -1.0, 1.0)


def bundle(vs: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Element-wise sum of a nonempty collection of hypervectors."""
    if isinstance(vs, np.ndarray):
        arr = np.atleast_2d(vs).astype(np.float64, copy=False)
    else:
        vs = list(vs)
        if not vs:
            raise ValueError("cannot bundle an empty list of hypervectors")
        dims = {np.shape(v)[-1] for v in vs}
        if len(dims) != 1:
            raise ValueError(f"cannot bundle hypervectors of mixed dimensions {sorted(dims)}")
        arr = np.asarray(vs, dtype=np.float64)
    if arr.shape[0] == 0:
        raise ValueError("cannot bundle an empty list of hypervectors")
    return arr.sum(axis=0)


def bind(a, b, *more) -> np.ndarray:
    """Element-wise product. Extra operands are folded left to right."""
    out = np.asarray(a, dtype=np.float64)
    for other in (b, *more):
        other = np.asarray(other, dtype=np.float64)
        _same_dim(out, other)
        out = out * other
    return out


def permute(a, shifts: int = 1) -> np.ndarray:
    """Circular right shift: the last element moves to the front, ``shifts`` times."""
    if shifts < 0:
        raise ValueError("shifts must be nonnegative")
    return np.roll(np.asarray(a, dtype=np.float64), int(shifts), axis=-1)


def is_bipolar(a: Iterable[float]) -> bool:
    a = np.asarray(a)
    return bool(np.all(np.abs(a) == 1.0))
