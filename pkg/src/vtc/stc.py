"""Unified spatiotemporal compression.

Tokens from every frame compete in one pool: they are visited in global
attention order and admitted while they stay below the similarity threshold
to everything already admitted.  Rejected tokens are clustered with
density peaks (kNN density) and each cluster contributes its mean back into
the budget.  The output is restored to (frame, position) order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple, Sequence

import numpy as np

from .config import CompressionConfig, round_half_up
from .errors import EmptyInput, EmptyPool, ShapeMismatch
from .scoring import ContributionScores, global_rank
from .tensor import Key, TokenTensor, pairwise_sq_euclidean, unit_rows

# rows per block when scanning the distance matrix
_ROW_BLOCK = 512


class Selection(NamedTuple):
    retained: list[Key]
    recycled: list[Key]
    shortfall: int


class Entry(NamedTuple):
    kind: Literal["direct", "merged"]
    key: Key
    cluster_id: int | None = None


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    rho: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    # indices into the clustered rows, in selection (descending gamma) order
    centers: list[int]
    member_of: np.ndarray

    def members(self, center: int) -> list[int]:
        return np.flatnonzero(self.member_of == center).tolist()


@dataclass(frozen=True, eq=False)
class RetentionResult:
    retained_direct: list[Key]
    recycled: list[Key]
    merged_tokens: TokenTensor
    # member keys of each merged row, aligned with merged_tokens rows
    merged_members: list[list[Key]]
    final_sequence: list[Entry]
    budget: int
    assignment: ClusterAssignment | None
    shortfall: int
    _source: TokenTensor

    @property
    def achieved_count(self) -> int:
        return len(self.final_sequence)

    @property
    def kept_keys(self) -> list[Key]:
        return [e.key for e in self.final_sequence]

    def embeddings(self) -> TokenTensor:
        """Final sequence as a TokenTensor (merged rows sit at their center's key)."""
        row_of = {k: i for i, k in enumerate(self._source.keys)}
        d = self._source.d
        out = np.empty((len(self.final_sequence), d), dtype=np.float32)
        for i, e in enumerate(self.final_sequence):
            if e.kind == "direct":
                out[i] = self._source.data[row_of[e.key]]
            else:
                out[i] = self.merged_tokens.data[e.cluster_id]
        return TokenTensor.from_rows(out, self.kept_keys)


def greedy_select(tokens: TokenTensor, order: Sequence[Key], tau: float,
                  direct_budget: int) -> Selection:
    """Admit candidates in rank order while their max cosine to the pool is below tau."""
    if tokens.n == 0:
        raise EmptyInput("no tokens to select from")
    if direct_budget < 0:
        raise ValueError("direct_budget must be >= 0")
    row_of = {k: i for i, k in enumerate(tokens.keys)}
    unit, _ = unit_rows(tokens.data)
    max_sim = np.full(tokens.n, -np.inf)
    retained: list[Key] = []
    recycled: list[Key] = []
    for key in order:
        if len(retained) >= direct_budget:
            recycled.append(key)
            continue
        r = row_of[key]
        if not retained or max_sim[r] < tau:
            retained.append(key)
            np.maximum(max_sim, (unit * unit[r]).sum(axis=1), out=max_sim)
        else:
            recycled.append(key)
    return Selection(retained, recycled, direct_budget - len(retained))


def default_knn_k(n: int) -> int:
    return max(1, round_half_up(math.sqrt(n)))


def dpc_knn(points: TokenTensor | np.ndarray, k: int, num_centers: int) -> ClusterAssignment:
    """Density-peaks clustering with kNN Gaussian density.

    Ties anywhere (max-density point, gamma ranking, nearest center) go to the
    lowest row index.
    """
    x = points.data if isinstance(points, TokenTensor) else np.asarray(points)
    n = x.shape[0]
    if n == 0:
        raise EmptyPool("cannot cluster an empty recycle pool")
    if not 1 <= num_centers <= n:
        raise ValueError(f"num_centers must be in [1, {n}], got {num_centers}")
    if k < 1:
        raise ValueError("k must be >= 1")
    if n == 1:
        return ClusterAssignment(np.ones(1), np.zeros(1), np.zeros(1), [0], np.zeros(1, dtype=np.int64))

    k = min(k, n - 1)
    dist = pairwise_sq_euclidean(x)
    knn_sum = np.empty(n)
    for lo in range(0, n, _ROW_BLOCK):
        block = dist[lo:lo + _ROW_BLOCK].copy()
        rows = np.arange(block.shape[0])
        block[rows, rows + lo] = np.inf
        nearest = np.sort(np.partition(block, k - 1, axis=1)[:, :k], axis=1)
        knn_sum[lo:lo + _ROW_BLOCK] = nearest.sum(axis=1)
    rho = np.exp(-knn_sum / k)
    np.sqrt(dist, out=dist)

    peak = int(np.argmax(rho))
    top = rho == rho[peak]
    delta = np.empty(n)
    for lo in range(0, n, _ROW_BLOCK):
        r = rho[lo:lo + _ROW_BLOCK]
        denser = rho[None, :] > r[:, None]
        delta[lo:lo + _ROW_BLOCK] = np.where(denser, dist[lo:lo + _ROW_BLOCK], np.inf).min(axis=1)
    delta[peak] = dist[peak].max()
    # other points tied with the peak have no strictly denser neighbour;
    # they measure against the tied points that precede them
    for i in np.flatnonzero(top):
        if i != peak:
            delta[i] = dist[i, np.flatnonzero(top[:i])].min()

    gamma = rho * delta
    idx = np.arange(n)
    centers = np.lexsort((idx, -gamma))[:num_centers]
    by_index = np.sort(centers)
    member_of = by_index[np.argmin(dist[:, by_index], axis=1)]
    member_of[centers] = centers
    return ClusterAssignment(rho, delta, gamma, centers.tolist(), member_of.astype(np.int64))


def merge_clusters(points: TokenTensor, assign: ClusterAssignment) -> TokenTensor:
    """One row per center: the mean of all its members, keyed by the center."""
    if assign.member_of.shape[0] != points.n:
        raise ShapeMismatch("assignment does not cover every row")
    x = points.data.astype(np.float64)
    rows = [x[assign.member_of == c].mean(axis=0) for c in assign.centers]
    keys = [(int(points.frames[c]), int(points.positions[c])) for c in assign.centers]
    return TokenTensor.from_rows(np.array(rows, dtype=np.float32).reshape(len(rows), points.d), keys)


def compress(tokens: TokenTensor, scores: Sequence[ContributionScores | np.ndarray],
             cfg: CompressionConfig) -> RetentionResult:
    """Run selection, clustering and refill; ``scores[f][p]`` scores token (f, p)."""
    if tokens.n == 0:
        raise EmptyInput("no tokens to compress")
    order = global_rank(scores)
    if len(order) != tokens.n or set(order) != set(tokens.keys):
        raise ShapeMismatch("scores do not cover exactly the token keys")

    budget, direct_budget, n_centers = cfg.budgets(tokens.n)
    sel = greedy_select(tokens, order, cfg.tau, direct_budget)
    n_centers = min(n_centers + sel.shortfall, len(sel.recycled))

    assign = None
    members: list[list[Key]] = []
    merged = TokenTensor.from_rows(np.zeros((0, tokens.d)), [])
    if n_centers > 0:
        row_of = {k: i for i, k in enumerate(tokens.keys)}
        pool = tokens.take([row_of[k] for k in sorted(sel.recycled)])
        k = cfg.knn_k if cfg.knn_k is not None else default_knn_k(pool.n)
        assign = dpc_knn(pool, k, n_centers)
        merged = merge_clusters(pool, assign)
        pool_keys = pool.keys
        members = [[pool_keys[i] for i in assign.members(c)] for c in assign.centers]

    entries = [Entry("direct", key) for key in sel.retained]
    entries += [Entry("merged", key, cid) for cid, key in enumerate(merged.keys)]
    entries.sort(key=lambda e: e.key)
    return RetentionResult(
        retained_direct=sel.retained,
        recycled=sel.recycled,
        merged_tokens=merged,
        merged_members=members,
        final_sequence=entries,
        budget=budget,
        assignment=assign,
        shortfall=sel.shortfall,
        _source=tokens,
    )
