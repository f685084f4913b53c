"""Parameter sweeps scored by information-preservation proxies.

Benchmark accuracy needs a full Video-LLM, so each setting is judged on
synthetic inputs by: share of attention mass kept, redundancy of the kept
set (mean pairwise cosine), how far dropped tokens are from anything kept,
and the FLOPs ratio.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import CompressionConfig
from .parallel import ordered_map
from .pipeline import run
from .stc import greedy_select
from .synth import synth_video
from .tensor import Key, TokenTensor, cosine_matrix

AXES = {
    "tau": "tau",
    "cluster_ratio": "cluster_ratio",
    "lambda": "lam",
    "keep_R": "inner_keep_ratio",
    "layer_K": "inner_layer",
}
TEXT_AXES = {"lambda", "keep_R", "layer_K"}
METRICS = ("attention_mass", "mean_cosine", "recon_error", "flops_ratio")


def score_lookup(scores) -> dict[Key, float]:
    return {(f, p): float(v) for f, s in enumerate(scores) for p, v in enumerate(s.scores)}


def attention_mass(kept: Sequence[Key], scores) -> float:
    lookup = score_lookup(scores)
    total = sum(lookup.values())
    return sum(lookup[k] for k in kept) / total if total > 0 else 0.0


def mean_pairwise_cosine(x) -> float:
    c = cosine_matrix(x, x)
    n = c.shape[0]
    if n < 2:
        return 0.0
    return float(c[np.triu_indices(n, 1)].mean())


def reconstruction_error(tokens: TokenTensor, kept: Sequence[Key], kept_rows) -> float:
    """Mean Euclidean distance from each dropped token to its nearest kept row."""
    kept_set = set(kept)
    dropped = [i for i, k in enumerate(tokens.keys) if k not in kept_set]
    if not dropped:
        return 0.0
    kept_rows = np.asarray(kept_rows, dtype=np.float64)
    a = tokens.data[dropped].astype(np.float64)
    sq = (a * a).sum(1)[:, None] + (kept_rows * kept_rows).sum(1)[None, :] - 2 * a @ kept_rows.T
    return float(np.sqrt(np.maximum(sq.min(axis=1), 0.0)).mean())


def attention_only(tokens: TokenTensor, scores, budget: int) -> list[Key]:
    """Top-``budget`` keys by attention score, no redundancy check."""
    lookup = score_lookup(scores)
    return sorted(tokens.keys, key=lambda k: (-lookup[k], k))[:budget]


def similarity_only(tokens: TokenTensor, tau: float, budget: int) -> list[Key]:
    """Threshold dedup in (frame, position) order, ignoring attention."""
    return greedy_select(tokens, sorted(tokens.keys), tau, budget).retained


def rows_for(tokens: TokenTensor, keys: Sequence[Key]) -> np.ndarray:
    row_of = {k: i for i, k in enumerate(tokens.keys)}
    return tokens.data[[row_of[k] for k in keys]]


@dataclass(frozen=True)
class SynthParams:
    frames: int = 32
    tokens_per_frame: int = 196
    d: int = 64
    temporal_corr: float = 0.9
    spatial_dup: float = 0.5
    n_text: int = 8


def proxies(cfg: CompressionConfig, seed: int, synth: SynthParams, text_merge: bool) -> dict:
    v = synth_video(synth.frames, synth.tokens_per_frame, synth.d, synth.temporal_corr,
                    synth.spatial_dup, seed=seed, n_text=synth.n_text if text_merge else 0)
    res = run(v.tokens, v.attentions, cfg, text=v.text, inner_merge=text_merge, workers=1)
    if res.plan is not None:
        kept_keys = [res.output.keys[k] for k in res.plan.retaining]
        kept_rows = res.plan.merged_embeddings.data
    else:
        kept_keys = res.retention.kept_keys
        kept_rows = res.output.data
    return {
        "attention_mass": attention_mass(kept_keys, res.scores),
        "mean_cosine": mean_pairwise_cosine(kept_rows),
        "recon_error": reconstruction_error(v.tokens, kept_keys, kept_rows),
        "flops_ratio": res.report.ratio_vs_baseline,
    }


def ablate(axis: str, grid: Sequence[float], base: CompressionConfig | None = None,
           seeds: Sequence[int] = range(10), synth: SynthParams | None = None,
           text_merge: bool | None = None, workers: int | None = None) -> list[dict]:
    """One row per grid value: seed-averaged proxies plus the per-seed values."""
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}; choose from {sorted(AXES)}")
    grid = list(grid)
    if not grid:
        raise ValueError("grid must not be empty")
    base = base or CompressionConfig()
    synth = synth or SynthParams()
    if text_merge is None:
        text_merge = axis in TEXT_AXES
    seeds = list(seeds)
    field = AXES[axis]

    def point(value):
        cast = int(value) if field == "inner_layer" else float(value)
        cfg = base.with_(**{field: cast})
        per_seed = [proxies(cfg, s, synth, text_merge) for s in seeds]
        row = {"value": cast}
        for m in METRICS:
            row[m] = float(np.mean([p[m] for p in per_seed]))
        row["per_seed"] = per_seed
        return row

    return ordered_map(point, grid, workers)
