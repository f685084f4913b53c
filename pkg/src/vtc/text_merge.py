"""Query-guided second-stage merge inside the language model.

Visual tokens are scored by a blend of the strongest text->visual attention
they receive and their best cosine match against the text tokens.  The top
fraction is kept; every other token is averaged into the kept token it is
most similar to.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .scoring import head_average, mean_received_scores
from .tensor import AttentionTensor, TokenTensor, cosine_matrix, minmax_normalize, softmax_rows


@dataclass(frozen=True, eq=False)
class DecisionScores:
    attn_norm: np.ndarray
    sim_norm: np.ndarray
    combined: np.ndarray
    lam: float


@dataclass(frozen=True, eq=False)
class MergePlan:
    retaining: list[int]
    pruning: list[int]
    target: dict[int, int]
    merged_embeddings: TokenTensor

    def groups(self) -> dict[int, list[int]]:
        out = {k: [k] for k in self.retaining}
        for j in self.pruning:
            out[self.target[j]].append(j)
        return {k: sorted(v) for k, v in out.items()}


def extract_text_to_visual(attn: AttentionTensor | np.ndarray, n_visual: int, n_text: int) -> np.ndarray:
    """Head-averaged rows of the text block restricted to the visual columns."""
    avg = head_average(attn)
    if avg.shape[0] != n_visual + n_text:
        raise ShapeMismatch(f"attention size {avg.shape[0]} != {n_visual} visual + {n_text} text")
    return avg[n_visual:, :n_visual]


def attention_criterion(a_qv: np.ndarray) -> np.ndarray:
    a_qv = np.asarray(a_qv, dtype=np.float64)
    if a_qv.shape[0] < 1:
        raise ValueError("attention criterion needs at least one text row")
    return minmax_normalize(a_qv.max(axis=0))


def similarity_criterion(visual: TokenTensor, text: TokenTensor) -> np.ndarray:
    if visual.d != text.d:
        raise ShapeMismatch(f"visual d={visual.d} but text d={text.d}")
    return minmax_normalize(cosine_matrix(visual, text).max(axis=1))


def decision_scores(visual: TokenTensor, text: TokenTensor | None,
                    attn: AttentionTensor | np.ndarray, lam: float) -> DecisionScores:
    """Blend both criteria; with no text, rank by attention the visual block receives."""
    n_text = 0 if text is None else text.n
    if n_text == 0:
        avg = head_average(attn)
        if avg.shape[0] != visual.n:
            raise ShapeMismatch(f"attention size {avg.shape[0]} != {visual.n} visual tokens")
        if visual.n >= 2:
            a = minmax_normalize(mean_received_scores(avg[:visual.n, :visual.n]).scores)
        else:
            a = np.zeros(visual.n)
        return DecisionScores(a, np.zeros_like(a), a.copy(), 0.0)
    a = attention_criterion(extract_text_to_visual(attn, visual.n, n_text))
    s = similarity_criterion(visual, text)
    return DecisionScores(a, s, (1 - lam) * a + lam * s, lam)


def keep_count(keep_ratio: float, n: int) -> int:
    # guard against ceil(7.000000000000001) style float noise
    return min(n, max(1, math.ceil(keep_ratio * n - 1e-9)))


def plan_merge(visual: TokenTensor, scores: DecisionScores | np.ndarray, keep_ratio: float) -> MergePlan:
    if not 0 < keep_ratio <= 1:
        raise ValueError("keep_ratio must be in (0, 1]")
    if visual.n < 1:
        raise ValueError("need at least one visual token")
    combined = scores.combined if isinstance(scores, DecisionScores) else np.asarray(scores, dtype=np.float64)
    if combined.shape[0] != visual.n:
        raise ShapeMismatch("one decision score per visual token required")

    n_keep = keep_count(keep_ratio, visual.n)
    idx = np.arange(visual.n)
    ranked = np.lexsort((idx, -combined))
    retaining = np.sort(ranked[:n_keep])
    pruning = np.sort(ranked[n_keep:])

    target: dict[int, int] = {}
    if pruning.size:
        sim = cosine_matrix(visual.data[pruning], visual.data[retaining])
        best = retaining[np.argmax(sim, axis=1)]
        target = dict(zip(pruning.tolist(), best.tolist()))

    x = visual.data.astype(np.float64)
    owner = idx.copy()
    for j, k in target.items():
        owner[j] = k
    rows = np.array([x[owner == k].mean(axis=0) for k in retaining], dtype=np.float32)
    merged = TokenTensor(rows.reshape(len(retaining), visual.d), visual.frames[retaining], visual.positions[retaining])
    return MergePlan(retaining.tolist(), pruning.tolist(), target, merged)


def surrogate_attention(visual: TokenTensor, text: TokenTensor | None) -> AttentionTensor:
    """Single-head self-attention over [visual; text] with identity projections.

    Stand-in for the LLM's layer-K attention when none is supplied.
    """
    parts = [visual.data] + ([text.data] if text is not None and text.n else [])
    h = np.concatenate(parts).astype(np.float64)
    return AttentionTensor(softmax_rows(h @ h.T, math.sqrt(h.shape[1]))[None], "global")


def text_merge(visual: TokenTensor, text: TokenTensor | None, attn: AttentionTensor | None,
               lam: float, keep_ratio: float) -> tuple[DecisionScores, MergePlan]:
    if attn is None:
        attn = surrogate_attention(visual, text)
    ds = decision_scores(visual, text, attn, lam)
    return ds, plan_merge(visual, ds, keep_ratio)
