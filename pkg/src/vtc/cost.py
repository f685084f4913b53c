"""Closed-form transformer FLOPs for prefill plus a fixed-length decode."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .config import ArchSpec, round_half_up
from .errors import ShapeMismatch


@dataclass(frozen=True)
class FlopsReport:
    total: float
    prefill: float
    decode: float
    ratio_vs_baseline: float

    @property
    def tflops(self) -> float:
        return float(f"{self.total / 1e12:.3g}")


def layer_flops(n: int, d: int, m: int, r: int) -> tuple[float, float]:
    """(prefill, decode) FLOPs of one layer seeing n input tokens."""
    n, d, m, r = float(n), float(d), float(m), float(r)
    prefill = 4 * n * d * d + 2 * n * n * d + 2 * n * d * m
    decode = r * ((4 * d * d + 2 * d * m) + 2 * (d * n + (d / 2) * (r + 1)))
    return prefill, decode


def _raw(spec: ArchSpec, schedule: Sequence[int]) -> tuple[float, float]:
    prefill = decode = 0.0
    for n in schedule:
        if n < 0:
            raise ValueError("token counts must be >= 0")
        p, q = layer_flops(n, spec.hidden, spec.ffn, spec.decode_tokens)
        prefill += p
        decode += q
    return prefill, decode


def flops(spec: ArchSpec, schedule: Sequence[int], baseline_tokens: int | None = None,
          allow_empty: bool = False) -> FlopsReport:
    """FLOPs of ``schedule`` (one token count per layer).

    The ratio compares against ``baseline_tokens`` held at every layer
    (default: the schedule's largest count).
    """
    schedule = list(schedule)
    if not (allow_empty and not schedule) and len(schedule) != spec.layers:
        raise ShapeMismatch(f"schedule has {len(schedule)} layers, arch has {spec.layers}")
    prefill, decode = _raw(spec, schedule)
    total = prefill + decode
    if baseline_tokens is None:
        baseline_tokens = max(schedule, default=0)
    base = sum(_raw(spec, [baseline_tokens] * len(schedule)))
    ratio = total / base if base > 0 else 1.0
    return FlopsReport(total, prefill, decode, ratio)


def schedule_from_pipeline(n_input: int, retention_ratio: float, inner_layer: int,
                           inner_keep: float, layers: int) -> list[int]:
    """Per-layer visual token counts: layers before ``inner_layer`` (1-based) see the
    compressed count, the rest see it further scaled by ``inner_keep``."""
    if not 1 <= inner_layer <= layers:
        raise ValueError(f"inner_layer must be in [1, {layers}]")
    before = round_half_up(retention_ratio * n_input)
    after = round_half_up(retention_ratio * inner_keep * n_input)
    return [before if i < inner_layer else after for i in range(1, layers + 1)]


def schedule_from_counts(entering: int, after_merge: int | None, inner_layer: int, layers: int) -> list[int]:
    """Schedule from realised token counts (no inner merge when after_merge is None)."""
    if after_merge is None:
        return [entering] * layers
    if not 1 <= inner_layer <= layers:
        raise ValueError(f"inner_layer must be in [1, {layers}]")
    return [entering if i < inner_layer else after_merge for i in range(1, layers + 1)]
