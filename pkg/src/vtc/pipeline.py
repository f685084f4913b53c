"""End-to-end composition: scoring -> compression -> optional text merge -> cost."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import CompressionConfig
from .cost import FlopsReport, flops, schedule_from_counts
from .errors import ShapeMismatch
from .scoring import ScoreMode, frame_scores
from .stc import RetentionResult, compress
from .tensor import AttentionTensor, TokenTensor
from .text_merge import DecisionScores, MergePlan, text_merge


@dataclass
class RunStats:
    retained_keys: list
    merged_groups: list
    budget: int
    achieved_count: int
    flops_before: float
    flops_after: float
    flops_ratio: float
    timings_ms: dict
    config: dict
    schedule: list
    inner: dict | None = None

    def to_json(self) -> dict:
        return {
            "retained_keys": [list(k) for k in self.retained_keys],
            "merged_groups": self.merged_groups,
            "budget": self.budget,
            "achieved_count": self.achieved_count,
            "flops_before": self.flops_before,
            "flops_after": self.flops_after,
            "flops_ratio": self.flops_ratio,
            "schedule": self.schedule,
            "inner_merge": self.inner,
            "timings_ms": self.timings_ms,
            "config": self.config,
        }


@dataclass(frozen=True, eq=False)
class PipelineResult:
    retention: RetentionResult
    output: TokenTensor
    scores: list
    decision: DecisionScores | None
    plan: MergePlan | None
    report: FlopsReport
    stats: RunStats = field(repr=False)


def run(
    tokens: TokenTensor,
    attentions: Sequence[AttentionTensor],
    cfg: CompressionConfig,
    text: TokenTensor | None = None,
    global_attn: AttentionTensor | None = None,
    inner_merge: bool | None = None,
    score_mode: ScoreMode = "mean-received",
    cls_index: int = 0,
    workers: int | None = None,
) -> PipelineResult:
    """Compress ``tokens`` with per-frame ``attentions``.

    The inner merge runs when ``inner_merge`` is true, or by default whenever
    text tokens are given. Without ``global_attn`` a surrogate self-attention
    over [visual; text] is used.
    """
    if inner_merge is None:
        inner_merge = text is not None
    timings = {}

    t0 = time.perf_counter()
    scores = frame_scores(attentions, score_mode, cls_index, workers)
    for f, s in enumerate(scores):
        have = int(np.count_nonzero(tokens.frames == f))
        if have != len(s):
            raise ShapeMismatch(f"frame {f}: {len(s)} attention scores but {have} tokens")
    timings["scoring"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    retention = compress(tokens, scores, cfg)
    output = retention.embeddings()
    timings["compress"] = (time.perf_counter() - t0) * 1e3

    decision = plan = None
    inner = None
    after = None
    if inner_merge:
        t0 = time.perf_counter()
        if global_attn is not None and global_attn.size != output.n + (text.n if text is not None else 0):
            raise ShapeMismatch(
                f"global attention size {global_attn.size} != {output.n} visual + "
                f"{text.n if text is not None else 0} text tokens")
        decision, plan = text_merge(output, text, global_attn, cfg.lam, cfg.inner_keep_ratio)
        after = len(plan.retaining)
        keys = output.keys
        inner = {
            "layer": cfg.inner_layer,
            "kept_count": after,
            "groups": [{"keep": list(keys[k]), "members": [list(keys[j]) for j in g]}
                       for k, g in plan.groups().items()],
        }
        timings["text_merge"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    arch = cfg.arch
    schedule = schedule_from_counts(retention.achieved_count, after, cfg.inner_layer, arch.layers)
    report = flops(arch, schedule, baseline_tokens=tokens.n)
    before = flops(arch, [tokens.n] * arch.layers).total
    timings["cost"] = (time.perf_counter() - t0) * 1e3

    groups = [{"center": list(k), "members": [list(m) for m in mem]}
              for k, mem in zip(retention.merged_tokens.keys, retention.merged_members)]
    stats = RunStats(
        retained_keys=retention.retained_direct,
        merged_groups=groups,
        budget=retention.budget,
        achieved_count=retention.achieved_count,
        flops_before=before,
        flops_after=report.total,
        flops_ratio=report.total / before,
        timings_ms=timings,
        config=cfg.to_json(),
        schedule=schedule,
        inner=inner,
    )
    return PipelineResult(retention, output, scores, decision, plan, report, stats)
