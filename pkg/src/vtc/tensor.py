"""Dense numeric primitives and the domain types shared by every stage.

Embeddings are stored as float32; every reduction is carried out in float64
with a fixed summation order so that results do not depend on how work is
split across threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import NonFiniteInput, ShapeMismatch, ZeroNormRow

Key = tuple[int, int]

# elements per chunk of the broadcast product in cosine_matrix
_CHUNK_ELEMS = 1 << 22


@dataclass(frozen=True, eq=False)
class TokenTensor:
    """N x d float32 embeddings, each row tagged with its (frame, position)."""

    data: np.ndarray
    frames: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 2:
            raise ShapeMismatch(f"token data must be 2-D, got shape {data.shape}")
        if data.shape[1] < 1:
            raise ShapeMismatch("embedding dimension must be >= 1")
        if not np.all(np.isfinite(data)):
            raise NonFiniteInput("token embeddings contain NaN or Inf")
        frames = np.asarray(self.frames, dtype=np.int64).reshape(-1)
        positions = np.asarray(self.positions, dtype=np.int64).reshape(-1)
        if frames.shape[0] != data.shape[0] or positions.shape[0] != data.shape[0]:
            raise ShapeMismatch("origin arrays must have one entry per row")
        if data.shape[0] and (frames.min() < 0 or positions.min() < 0):
            raise ShapeMismatch("frame and position indices must be >= 0")
        if len(set(zip(frames.tolist(), positions.tolist()))) != data.shape[0]:
            raise ShapeMismatch("(frame, position) pairs must be unique")
        data.setflags(write=False)
        frames.setflags(write=False)
        positions.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "positions", positions)

    @classmethod
    def from_rows(cls, rows, keys: Iterable[Key] | None = None) -> "TokenTensor":
        data = np.asarray(rows, dtype=np.float32)
        if data.ndim == 1:
            data = data.reshape(0 if data.size == 0 else 1, -1)
        if keys is None:
            keys = [(0, i) for i in range(data.shape[0])]
        keys = list(keys)
        frames = [k[0] for k in keys]
        positions = [k[1] for k in keys]
        return cls(data, np.array(frames, dtype=np.int64), np.array(positions, dtype=np.int64))

    @classmethod
    def from_video(cls, video) -> "TokenTensor":
        """Flatten a (frames, tokens_per_frame, d) array frame-major."""
        video = np.asarray(video, dtype=np.float32)
        if video.ndim != 3:
            raise ShapeMismatch(f"video must be 3-D (frames, tokens, d), got {video.shape}")
        b, nv, d = video.shape
        frames = np.repeat(np.arange(b, dtype=np.int64), nv)
        positions = np.tile(np.arange(nv, dtype=np.int64), b)
        return cls(video.reshape(b * nv, d), frames, positions)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    @property
    def keys(self) -> list[Key]:
        return list(zip(self.frames.tolist(), self.positions.tolist()))

    def take(self, rows: Sequence[int]) -> "TokenTensor":
        rows = np.asarray(rows, dtype=np.int64)
        return TokenTensor(self.data[rows], self.frames[rows], self.positions[rows])

    def sorted_by_key(self) -> "TokenTensor":
        order = np.lexsort((self.positions, self.frames))
        return self.take(order)


@dataclass(frozen=True, eq=False)
class AttentionTensor:
    """H stacked S x S attention maps (rows are queries, columns keys)."""

    data: np.ndarray
    scope: Literal["per-frame", "global"] = "per-frame"

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim == 2:
            data = data[None]
        if data.ndim != 3 or data.shape[1] != data.shape[2]:
            raise ShapeMismatch(f"attention must be (H, S, S), got {data.shape}")
        if data.shape[0] < 1:
            raise ShapeMismatch("attention needs at least one head")
        if not np.all(np.isfinite(data)):
            raise NonFiniteInput("attention contains NaN or Inf")
        if data.size and (data.min() < -1e-6 or data.max() > 1 + 1e-6):
            raise ShapeMismatch("attention weights must lie in [0, 1]")
        if self.scope not in ("per-frame", "global"):
            raise ValueError(f"unknown attention scope {self.scope!r}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_logits(cls, logits, scale: float, scope="per-frame") -> "AttentionTensor":
        logits = np.asarray(logits, dtype=np.float64)
        if logits.ndim == 2:
            logits = logits[None]
        return cls(np.stack([softmax_rows(h, scale) for h in logits]), scope)

    @property
    def heads(self) -> int:
        return self.data.shape[0]

    @property
    def size(self) -> int:
        return self.data.shape[1]


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, TokenTensor):
        return x.data.astype(np.float64)
    m = np.asarray(x, dtype=np.float64)
    if m.ndim == 1:
        m = m[None]
    return m


def _check_finite(x: np.ndarray, what: str):
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput(f"{what} contains NaN or Inf")


def softmax_rows(logits, scale: float = 1.0) -> np.ndarray:
    """Row-wise softmax of ``logits / scale`` with max subtraction."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    z = np.asarray(logits, dtype=np.float64)
    _check_finite(z, "logits")
    z = z / scale
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def row_norms(x) -> np.ndarray:
    m = _as_matrix(x)
    return np.sqrt((m * m).sum(axis=1))


def unit_rows(x) -> tuple[np.ndarray, np.ndarray]:
    """Return (normalized rows, zero-norm mask); zero rows stay zero."""
    m = _as_matrix(x)
    norms = np.sqrt((m * m).sum(axis=1))
    zero = norms == 0.0
    out = np.zeros_like(m)
    out[~zero] = m[~zero] / norms[~zero, None]
    return out, zero


def _dot_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a @ b.T with each entry reduced along a contiguous axis (order fixed)."""
    na, nb, d = a.shape[0], b.shape[0], a.shape[1]
    out = np.empty((na, nb), dtype=np.float64)
    step = max(1, _CHUNK_ELEMS // max(1, nb * d))
    for lo in range(0, na, step):
        out[lo:lo + step] = (a[lo:lo + step, None, :] * b[None, :, :]).sum(axis=-1)
    return out


def cosine_matrix(a, b, zero_policy: Literal["zero", "raise"] = "zero") -> np.ndarray:
    """Cosine similarity between every row of ``a`` and every row of ``b``.

    Zero-norm rows get cosine 0 against everything under the default policy;
    ``zero_policy="raise"`` raises ZeroNormRow instead (index refers to the
    concatenation of a's rows followed by b's rows).
    """
    ma, mb = _as_matrix(a), _as_matrix(b)
    if ma.shape[1] != mb.shape[1]:
        raise ShapeMismatch(f"dimension mismatch: {ma.shape[1]} vs {mb.shape[1]}")
    _check_finite(ma, "a")
    _check_finite(mb, "b")
    ua, za = unit_rows(ma)
    ub, zb = unit_rows(mb)
    if zero_policy == "raise" and (za.any() or zb.any()):
        bad = np.flatnonzero(np.concatenate([za, zb]))[0]
        raise ZeroNormRow(int(bad))
    return np.clip(_dot_rows(ua, ub), -1.0, 1.0)


def minmax_normalize(v) -> np.ndarray:
    """Affine map onto [0, 1]; a constant vector maps to all zeros."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ValueError("cannot normalize an empty vector")
    _check_finite(v, "vector")
    lo, hi = v.min(), v.max()
    if hi > lo:
        return (v - lo) / (hi - lo)
    return np.zeros_like(v)


def pairwise_sq_euclidean(x) -> np.ndarray:
    """Symmetric matrix of squared Euclidean distances, exact zero diagonal."""
    m = _as_matrix(x)
    if m.shape[0] == 0:
        raise ValueError("need at least one point")
    _check_finite(m, "points")
    if m.shape[0] == 1:
        return np.zeros((1, 1))
    return squareform(pdist(m, metric="sqeuclidean"))
