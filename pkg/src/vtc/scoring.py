"""Per-token contribution scores from encoder attention."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import DegenerateSequence, IndexOutOfRange, NonFiniteInput
from .parallel import ordered_map
from .tensor import AttentionTensor, Key

ScoreMode = Literal["cls", "mean-received"]


@dataclass(frozen=True, eq=False)
class ContributionScores:
    scores: np.ndarray
    mode: ScoreMode = "mean-received"

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(s)):
            raise NonFiniteInput("scores must be finite")
        if s.size and s.min() < 0:
            raise ValueError("scores must be non-negative")
        object.__setattr__(self, "scores", s)

    def __len__(self):
        return self.scores.shape[0]


def head_average(attn: AttentionTensor | np.ndarray) -> np.ndarray:
    data = attn.data if isinstance(attn, AttentionTensor) else np.asarray(attn)
    if data.ndim == 2:
        data = data[None]
    return data.astype(np.float64).mean(axis=0)


def cls_scores(avg_attn: np.ndarray, cls_index: int) -> ContributionScores:
    """The CLS query row with the CLS key column dropped (not renormalized)."""
    avg_attn = np.asarray(avg_attn, dtype=np.float64)
    s = avg_attn.shape[0]
    if not 0 <= cls_index < s:
        raise IndexOutOfRange(f"cls_index {cls_index} outside [0, {s})")
    return ContributionScores(np.delete(avg_attn[cls_index], cls_index), "cls")


def mean_received_scores(avg_attn: np.ndarray) -> ContributionScores:
    """Mean attention each token receives from every other query (self excluded)."""
    avg_attn = np.asarray(avg_attn, dtype=np.float64)
    s = avg_attn.shape[0]
    if s < 2:
        raise DegenerateSequence("mean-received scores need at least two tokens")
    received = avg_attn.sum(axis=0) - np.diag(avg_attn)
    return ContributionScores(np.maximum(received, 0.0) / (s - 1), "mean-received")


def frame_scores(
    attentions: Sequence[AttentionTensor],
    mode: ScoreMode = "mean-received",
    cls_index: int = 0,
    workers: int | None = None,
) -> list[ContributionScores]:
    def one(attn):
        avg = head_average(attn)
        if mode == "cls":
            return cls_scores(avg, cls_index)
        return mean_received_scores(avg)

    return ordered_map(one, attentions, workers)


def global_rank(per_frame_scores: Sequence[ContributionScores | np.ndarray]) -> list[Key]:
    """All (frame, position) keys by descending score, ties ascending by key."""
    vals, frames, positions = [], [], []
    for f, sc in enumerate(per_frame_scores):
        v = sc.scores if isinstance(sc, ContributionScores) else np.asarray(sc, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise NonFiniteInput(f"frame {f} scores are not finite")
        vals.append(v)
        frames.append(np.full(v.shape[0], f, dtype=np.int64))
        positions.append(np.arange(v.shape[0], dtype=np.int64))
    if not vals:
        return []
    v, fr, po = np.concatenate(vals), np.concatenate(frames), np.concatenate(positions)
    order = np.lexsort((po, fr, -v))
    return list(zip(fr[order].tolist(), po[order].tolist()))
