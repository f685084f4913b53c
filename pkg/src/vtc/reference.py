"""Deliberately naive reimplementation of the whole pipeline.

Plain Python lists and explicit O(N^2) loops, no numpy in the math; used as
an independent oracle for the vectorized code on small instances.
"""
from __future__ import annotations

import math


def _round(x):
    return int(math.floor(x + 0.5))


def _dot(a, b):
    s = 0.0
    for u, v in zip(a, b):
        s += u * v
    return s


def _cos(a, b):
    na = math.sqrt(_dot(a, a))
    nb = math.sqrt(_dot(b, b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return _dot(a, b) / (na * nb)


def _sqdist(a, b):
    s = 0.0
    for u, v in zip(a, b):
        s += (u - v) * (u - v)
    return s


def _minmax(v):
    lo, hi = min(v), max(v)
    if hi > lo:
        return [(x - lo) / (hi - lo) for x in v]
    return [0.0] * len(v)


def _head_mean(heads):
    h = len(heads)
    s = len(heads[0])
    out = [[0.0] * s for _ in range(s)]
    for i in range(s):
        for j in range(s):
            acc = 0.0
            for m in heads:
                acc += m[i][j]
            out[i][j] = acc / h
    return out


def frame_score(heads):
    avg = _head_mean(heads)
    s = len(avg)
    scores = []
    for j in range(s):
        acc = 0.0
        for i in range(s):
            if i != j:
                acc += avg[i][j]
        scores.append(acc / (s - 1))
    return scores


def dpc(points, k, num_centers):
    n = len(points)
    if n == 1:
        return [0], [0]
    k = min(k, n - 1)
    d2 = [[_sqdist(points[i], points[j]) for j in range(n)] for i in range(n)]
    rho = []
    for i in range(n):
        near = sorted(d2[i][j] for j in range(n) if j != i)[:k]
        acc = 0.0
        for v in near:
            acc += v
        rho.append(math.exp(-acc / k))
    dist = [[math.sqrt(v) for v in row] for row in d2]
    top = max(rho)
    peak = rho.index(top)
    delta = []
    for i in range(n):
        if i == peak:
            delta.append(max(dist[i][j] for j in range(n) if j != i))
            continue
        denser = [dist[i][j] for j in range(n) if rho[j] > rho[i]]
        if not denser:
            denser = [dist[i][j] for j in range(i) if rho[j] == top]
        delta.append(min(denser))
    gamma = [rho[i] * delta[i] for i in range(n)]
    centers = sorted(range(n), key=lambda i: (-gamma[i], i))[:num_centers]
    member_of = []
    for i in range(n):
        if i in centers:
            member_of.append(i)
            continue
        best = None
        for c in sorted(centers):
            if best is None or dist[i][c] < dist[i][best]:
                best = c
        member_of.append(best)
    return centers, member_of


def _mean(rows):
    d = len(rows[0])
    out = []
    for c in range(d):
        acc = 0.0
        for r in rows:
            acc += r[c]
        out.append(acc / len(rows))
    return out


def compress(rows, keys, frame_attn, cfg):
    """rows/keys: token embeddings and (frame, position); frame_attn[f] = list of heads."""
    n = len(rows)
    by_key = {k: i for i, k in enumerate(keys)}
    scored = []
    for f, heads in enumerate(frame_attn):
        for p, s in enumerate(frame_score(heads)):
            scored.append((-s, f, p))
    scored.sort()
    order = [(f, p) for _, f, p in scored]

    budget = max(1, _round(cfg.retention_ratio * n))
    n_centers = _round(cfg.cluster_ratio * budget)
    direct_budget = budget - n_centers

    retained, recycled = [], []
    for key in order:
        if len(retained) >= direct_budget:
            recycled.append(key)
            continue
        c = rows[by_key[key]]
        if not retained or max(_cos(c, rows[by_key[p]]) for p in retained) < cfg.tau:
            retained.append(key)
        else:
            recycled.append(key)
    n_centers = min(n_centers + direct_budget - len(retained), len(recycled))

    groups = {}
    merged = {}
    if n_centers > 0:
        pool_keys = sorted(recycled)
        pool = [rows[by_key[k]] for k in pool_keys]
        if cfg.knn_k is not None:
            k = cfg.knn_k
        else:
            k = max(1, _round(math.sqrt(len(pool))))
        centers, member_of = dpc(pool, k, n_centers)
        for c in centers:
            mem = [i for i in range(len(pool)) if member_of[i] == c]
            groups[pool_keys[c]] = [pool_keys[i] for i in mem]
            merged[pool_keys[c]] = _mean([pool[i] for i in mem])

    sequence = sorted(retained + list(merged))
    out_rows = [merged[k] if k in merged else list(rows[by_key[k]]) for k in sequence]
    return {
        "retained": retained,
        "recycled": recycled,
        "groups": groups,
        "merged": merged,
        "sequence": sequence,
        "rows": out_rows,
    }


def text_merge(visual, text, global_heads, lam, keep_ratio):
    """visual/text: lists of rows; global_heads: heads over [visual; text]."""
    nv = len(visual)
    avg = _head_mean(global_heads)
    if text:
        a_m = [max(avg[nv + t][j] for t in range(len(text))) for j in range(nv)]
        a_norm = _minmax(a_m)
        s_norm = _minmax([max(_cos(v, t) for t in text) for v in visual])
        combined = [(1 - lam) * a_norm[i] + lam * s_norm[i] for i in range(nv)]
    elif nv >= 2:
        recv = []
        for j in range(nv):
            acc = 0.0
            for i in range(nv):
                if i != j:
                    acc += avg[i][j]
            recv.append(acc / (nv - 1))
        combined = _minmax(recv)
    else:
        combined = [0.0]

    n_keep = min(nv, max(1, math.ceil(keep_ratio * nv - 1e-9)))
    ranked = sorted(range(nv), key=lambda i: (-combined[i], i))
    retaining = sorted(ranked[:n_keep])
    pruning = sorted(ranked[n_keep:])
    target = {}
    for j in pruning:
        best = None
        best_cos = None
        for k in retaining:
            c = _cos(visual[j], visual[k])
            if best is None or c > best_cos:
                best, best_cos = k, c
        target[j] = best
    merged = []
    for k in retaining:
        group = [visual[k]] + [visual[j] for j in pruning if target[j] == k]
        merged.append(_mean(group))
    return {"retaining": retaining, "pruning": pruning, "target": target, "merged": merged}
