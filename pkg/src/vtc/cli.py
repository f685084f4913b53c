"""Command-line entry point: ``vtc <subcommand>``.

Exit codes: 0 success, 2 validation error, 3 oracle mismatch.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import tensorfile
from .ablate import AXES, SynthParams, ablate
from .config import ArchSpec, CompressionConfig
from .cost import flops, schedule_from_pipeline
from .errors import ShapeMismatch, VtcError
from .oracle import oracle_check
from .pipeline import run
from .synth import synth_video
from .tensor import AttentionTensor, TokenTensor
from .text_merge import text_merge

log = logging.getLogger("vtc")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError("non-finite number in output")
        s = format(x, ".17g")
        return s if any(c in s for c in ".e") else s + ".0"
    return json.dumps(obj)


def _emit(doc, out: str | None):
    text = dumps(doc) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _config(path: str | None) -> CompressionConfig:
    return CompressionConfig.load(path) if path else CompressionConfig()


def _load_video(path: str) -> TokenTensor:
    a = tensorfile.read(path)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3:
        raise ShapeMismatch(f"{path}: video must be rank 2 or 3, got rank {a.ndim}")
    return TokenTensor.from_video(a)


def _load_rows(path: str) -> TokenTensor:
    a = tensorfile.read(path)
    if a.ndim != 2:
        raise ShapeMismatch(f"{path}: expected rank-2 (tokens, d), got rank {a.ndim}")
    return TokenTensor.from_rows(a)


def _load_frame_attention(path: str) -> list[AttentionTensor]:
    a = tensorfile.read(path)
    if a.ndim == 3:
        a = a[:, None]
    if a.ndim != 4:
        raise ShapeMismatch(f"{path}: attention must be (frames, heads, S, S) or (frames, S, S)")
    return [AttentionTensor(f, "per-frame") for f in a]


def _load_global_attention(path: str) -> AttentionTensor:
    a = tensorfile.read(path)
    if a.ndim not in (2, 3):
        raise ShapeMismatch(f"{path}: global attention must be (heads, S, S) or (S, S)")
    return AttentionTensor(a, "global")


def cmd_compress(args) -> int:
    cfg = _config(args.config)
    tokens = _load_video(args.video)
    attn = _load_frame_attention(args.attn)
    if len(attn) != int(tokens.frames.max()) + 1:
        raise ShapeMismatch(f"{len(attn)} attention frames for {int(tokens.frames.max()) + 1} video frames")
    text = _load_rows(args.text) if args.text else None
    gattn = _load_global_attention(args.global_attn) if args.global_attn else None
    inner = False if args.no_inner_merge else None
    res = run(tokens, attn, cfg, text=text, global_attn=gattn, inner_merge=inner,
              score_mode=args.score_mode, cls_index=args.cls_index)
    if args.out_tensor:
        tensorfile.write(args.out_tensor, res.output.data)
    if args.inner_out and res.plan is not None:
        tensorfile.write(args.inner_out, res.plan.merged_embeddings.data)
    stats = res.stats.to_json()
    stats["output_keys"] = [list(k) for k in res.output.keys]
    _emit(stats, args.out)
    return 0


def cmd_text_merge(args) -> int:
    cfg = _config(args.config)
    visual = _load_rows(args.visual)
    text = _load_rows(args.text) if args.text else None
    gattn = _load_global_attention(args.global_attn) if args.global_attn else None
    lam = cfg.lam if args.lam is None else args.lam
    keep = cfg.inner_keep_ratio if args.keep is None else args.keep
    ds, plan = text_merge(visual, text, gattn, lam, keep)
    if args.out_tensor:
        tensorfile.write(args.out_tensor, plan.merged_embeddings.data)
    _emit({
        "retaining": plan.retaining,
        "pruning": plan.pruning,
        "target": {str(j): k for j, k in plan.target.items()},
        "attn_norm": ds.attn_norm.tolist(),
        "sim_norm": ds.sim_norm.tolist(),
        "combined": ds.combined.tolist(),
        "lambda": ds.lam,
    }, args.out)
    return 0


def cmd_flops(args) -> int:
    cfg = _config(args.config)
    a = cfg.arch
    arch = ArchSpec(
        layers=args.layers or a.layers, hidden=args.hidden or a.hidden,
        ffn=args.ffn or a.ffn, decode_tokens=args.decode_tokens or a.decode_tokens,
    )
    if args.schedule:
        schedule = [int(x) for x in args.schedule.split(",")]
        baseline = args.tokens
    else:
        if args.tokens is None:
            raise ShapeMismatch("--tokens or --schedule is required")
        ratio = cfg.retention_ratio if args.retention is None else args.retention
        keep = 1.0 if args.inner_keep is None else args.inner_keep
        layer = cfg.inner_layer if args.inner_layer is None else args.inner_layer
        schedule = schedule_from_pipeline(args.tokens, ratio, layer, keep, arch.layers)
        baseline = args.tokens
    rep = flops(arch, schedule, baseline_tokens=baseline)
    _emit({
        "total": rep.total, "prefill": rep.prefill, "decode": rep.decode,
        "tflops": rep.tflops, "ratio_vs_baseline": rep.ratio_vs_baseline,
        "schedule": schedule,
    }, args.out)
    return 0


def cmd_synth(args) -> int:
    v = synth_video(args.frames, args.tokens_per_frame, args.dim, args.temporal_corr,
                    args.spatial_dup, seed=args.seed, heads=args.heads, n_text=args.text)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tensorfile.write(out / "video.vtc", v.video)
    tensorfile.write(out / "attn.vtc", v.attention_stack())
    files = {"video": str(out / "video.vtc"), "attn": str(out / "attn.vtc")}
    if v.text is not None:
        tensorfile.write(out / "text.vtc", v.text.data)
        files["text"] = str(out / "text.vtc")
    _emit({"files": files, "salient_positions": v.salient.tolist()}, None)
    return 0


def cmd_ablate(args) -> int:
    cfg = _config(args.config)
    grid = [float(x) for x in args.grid.split(",")]
    synth = SynthParams(args.frames, args.tokens_per_frame, args.dim, args.temporal_corr,
                        args.spatial_dup, args.text)
    rows = ablate(args.axis, grid, cfg, range(args.seed, args.seed + args.seeds), synth)
    if not args.per_seed:
        for r in rows:
            r.pop("per_seed")
    _emit({"axis": args.axis, "rows": rows}, args.out)
    return 0


def cmd_oracle(args) -> int:
    rep = oracle_check(args.count, args.seed)
    _emit(rep.to_json(), args.out)
    return 0 if rep.ok else 3


def _synth_args(p):
    p.add_argument("--frames", type=int, default=32)
    p.add_argument("--tokens-per-frame", type=int, default=196)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--temporal-corr", type=float, default=0.9)
    p.add_argument("--spatial-dup", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vtc", description="training-free video token compression")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="run the full pipeline on tensor files")
    p.add_argument("--video", required=True, help="(frames, tokens, d) embeddings")
    p.add_argument("--attn", required=True, help="(frames, heads, S, S) encoder attention")
    p.add_argument("--text", help="(tokens, d) text embeddings; enables the inner merge")
    p.add_argument("--global-attn", help="(heads, S, S) LLM attention over [visual; text]")
    p.add_argument("--config")
    p.add_argument("--score-mode", choices=["mean-received", "cls"], default="mean-received")
    p.add_argument("--cls-index", type=int, default=0)
    p.add_argument("--no-inner-merge", action="store_true")
    p.add_argument("--out-tensor", help="write compressed embeddings here")
    p.add_argument("--inner-out", help="write inner-merged embeddings here")
    p.add_argument("--out", help="RunStats JSON path (default stdout)")
    p.set_defaults(fn=cmd_compress)

    p = sub.add_parser("text-merge", help="query-guided merge of visual tokens")
    p.add_argument("--visual", required=True)
    p.add_argument("--text")
    p.add_argument("--global-attn")
    p.add_argument("--config")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--keep", type=float)
    p.add_argument("--out-tensor")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_text_merge)

    p = sub.add_parser("flops", help="closed-form FLOPs of a pruning schedule")
    p.add_argument("--config")
    p.add_argument("--layers", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--ffn", type=int)
    p.add_argument("--decode-tokens", type=int)
    p.add_argument("--tokens", type=int, help="visual tokens entering the LLM uncompressed")
    p.add_argument("--retention", type=float)
    p.add_argument("--inner-keep", type=float)
    p.add_argument("--inner-layer", type=int)
    p.add_argument("--schedule", help="comma-separated per-layer token counts")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_flops)

    p = sub.add_parser("synth", help="write a synthetic video workload")
    _synth_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--text", type=int, default=0, help="number of text tokens")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("ablate", help="sweep one parameter, report proxy metrics")
    p.add_argument("--axis", required=True, choices=sorted(AXES))
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.add_argument("--config")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--text", type=int, default=8)
    p.add_argument("--per-seed", action="store_true")
    _synth_args(p)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("oracle", help="compare against the naive reference")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except VtcError as e:
        log.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
