"""Pipeline hyperparameters and their JSON form."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ParseError


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class ArchSpec:
    """Transformer dimensions for the cost model (defaults: a 7B Qwen2-class LLM)."""

    layers: int = 28
    hidden: int = 3584
    ffn: int = 18944
    decode_tokens: int = 100

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ValueError(f"arch.{f.name} must be an integer >= 1, got {v!r}")


@dataclass(frozen=True)
class CompressionConfig:
    tau: float = 0.7
    retention_ratio: float = 0.02
    cluster_ratio: float = 0.3
    lam: float = 0.5
    inner_keep_ratio: float = 0.5
    inner_layer: int = 18
    # None selects max(1, round(sqrt(recycle size)))
    knn_k: int | None = None
    seed: int = 0
    arch: ArchSpec = field(default_factory=ArchSpec)

    def __post_init__(self):
        if not 0 < self.tau <= 1:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if not 0 < self.retention_ratio <= 1:
            raise ValueError(f"retention_ratio must be in (0, 1], got {self.retention_ratio}")
        if not 0 <= self.cluster_ratio < 1:
            raise ValueError(f"cluster_ratio must be in [0, 1), got {self.cluster_ratio}")
        if not 0 <= self.lam <= 1:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        if not 0 < self.inner_keep_ratio <= 1:
            raise ValueError(f"inner_keep_ratio must be in (0, 1], got {self.inner_keep_ratio}")
        if self.inner_layer < 1:
            raise ValueError("inner_layer must be >= 1")
        if self.knn_k is not None and self.knn_k < 1:
            raise ValueError("knn_k must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")

    def budgets(self, n: int) -> tuple[int, int, int]:
        """(total budget M, direct budget, cluster centers) for n input tokens."""
        total = max(1, round_half_up(self.retention_ratio * n))
        centers = round_half_up(self.cluster_ratio * total)
        return total, total - centers, centers

    def with_(self, **changes) -> "CompressionConfig":
        return replace(self, **changes)

    def to_json(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_json(cls, doc: dict) -> "CompressionConfig":
        if not isinstance(doc, dict):
            raise ParseError("config must be a JSON object")
        doc = dict(doc)
        known = {"tau", "retention_ratio", "cluster_ratio", "lambda", "inner_keep_ratio",
                 "inner_layer", "knn_k", "seed", "arch"}
        unknown = set(doc) - known
        if unknown:
            raise ParseError("unknown config key", field=sorted(unknown)[0])
        kwargs = {}
        if "lambda" in doc:
            kwargs["lam"] = doc.pop("lambda")
        arch = doc.pop("arch", None)
        if arch is not None:
            if not isinstance(arch, dict):
                raise ParseError("arch must be an object", field="arch")
            bad = set(arch) - {"layers", "hidden", "ffn", "decode_tokens"}
            if bad:
                raise ParseError("unknown arch key", field="arch." + sorted(bad)[0])
            try:
                kwargs["arch"] = ArchSpec(**arch)
            except (TypeError, ValueError) as e:
                raise ParseError(str(e), field="arch") from None
        kwargs.update(doc)
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as e:
            raise ParseError(str(e), field="config") from None

    @classmethod
    def load(cls, path: str | Path) -> "CompressionConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", offset=e.pos) from None
        return cls.from_json(doc)
