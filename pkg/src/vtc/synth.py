"""Synthetic stand-in for vision-encoder outputs.

Frames follow an AR(1) process in embedding space so temporal redundancy is
tunable; within each frame a fraction of tokens are near-copies of other
tokens (spatial redundancy).  Attention maps are softmaxes of random logits
with extra weight on a fixed set of salient positions, which persists across
frames the way a salient object would.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import AttentionTensor, TokenTensor, softmax_rows


@dataclass(frozen=True, eq=False)
class SynthVideo:
    tokens: TokenTensor
    attentions: list[AttentionTensor]
    text: TokenTensor | None
    salient: np.ndarray

    @property
    def video(self) -> np.ndarray:
        b = len(self.attentions)
        return self.tokens.data.reshape(b, -1, self.tokens.d)

    def attention_stack(self) -> np.ndarray:
        return np.stack([a.data for a in self.attentions])


def _normalize(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def synth_video(
    frames: int = 32,
    tokens_per_frame: int = 196,
    d: int = 64,
    temporal_corr: float = 0.9,
    spatial_dup: float = 0.5,
    seed: int = 0,
    heads: int = 2,
    salient_frac: float = 0.1,
    salience: float = 3.0,
    n_text: int = 0,
    dup_noise: float = 0.1,
) -> SynthVideo:
    if min(frames, tokens_per_frame, d, heads) < 1:
        raise ValueError("frames, tokens_per_frame, d and heads must be >= 1")
    if not 0 <= temporal_corr < 1:
        raise ValueError("temporal_corr must be in [0, 1)")
    if not 0 <= spatial_dup <= 1:
        raise ValueError("spatial_dup must be in [0, 1]")
    rng = np.random.default_rng(seed)
    nv = tokens_per_frame
    n_salient = max(1, round(salient_frac * nv))
    salient = np.sort(rng.choice(nv, size=n_salient, replace=False))
    n_dup = min(round(spatial_dup * nv), nv - 1)
    innov = math.sqrt(1.0 - temporal_corr ** 2)

    latent = rng.standard_normal((nv, d))
    emb = np.empty((frames, nv, d))
    attn = []
    for t in range(frames):
        if t:
            latent = temporal_corr * latent + innov * rng.standard_normal((nv, d))
        x = _normalize(latent)
        boost = np.zeros(nv)
        boost[salient] = salience
        if n_dup:
            perm = rng.permutation(nv)
            dups, pool = perm[:n_dup], perm[n_dup:]
            src = rng.choice(pool, size=n_dup)
            x[dups] = _normalize(x[src] + dup_noise / math.sqrt(d) * rng.standard_normal((n_dup, d)))
            boost[dups] = boost[src]
        emb[t] = x
        logits = rng.standard_normal((heads, nv, nv)) + boost[None, None, :]
        attn.append(AttentionTensor(np.stack([softmax_rows(h) for h in logits]), "per-frame"))

    tokens = TokenTensor.from_video(emb)
    text = None
    if n_text:
        # queries loosely describe a few random visual tokens
        picks = rng.choice(tokens.n, size=n_text, replace=False)
        q = emb.reshape(-1, d)[picks] + 0.5 * rng.standard_normal((n_text, d)) / math.sqrt(d)
        text = TokenTensor.from_rows(_normalize(q))
    return SynthVideo(tokens, attn, text, salient)
