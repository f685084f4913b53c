"""Cross-module invariants, property-based.

Each test bumps CASES so the acceptance module can report how many
generated cases ran.
"""
from collections import Counter

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from vtc.config import CompressionConfig
from vtc.pipeline import run
from vtc.stc import compress, dpc_knn, greedy_select
from vtc.tensor import AttentionTensor, TokenTensor, cosine_matrix, softmax_rows
from vtc.text_merge import keep_count, plan_merge

CASES = Counter()
seeds = st.integers(0, 2**32 - 1)
taus = st.sampled_from([0.5, 0.7, 0.9])
ratios = st.sampled_from([0.01, 0.02, 0.05, 0.1, 0.25, 0.5, 1.0])


def make_tokens(seed, frames, per_frame, d, dup_frac=0.3):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((frames * per_frame, d))
    n_dup = int(dup_frac * len(x))
    if n_dup:
        src = rng.integers(0, len(x), n_dup)
        dst = rng.choice(len(x), n_dup, replace=False)
        x[dst] = x[src] + 0.05 * rng.standard_normal((n_dup, d))
    scores = [rng.random(per_frame) for _ in range(frames)]
    return TokenTensor.from_video(x.reshape(frames, per_frame, d)), scores


instances = st.tuples(seeds, st.integers(1, 4), st.integers(1, 16), st.integers(1, 12))


@settings(max_examples=150, deadline=None)
@given(seeds, st.integers(1, 64), st.integers(1, 64), st.floats(0.05, 20))
def test_softmax_row_sums(seed, rows, cols, scale):
    CASES["softmax row sums"] += 1
    x = np.random.default_rng(seed).standard_normal((rows, cols)) * 10
    np.testing.assert_allclose(softmax_rows(x, scale).sum(1), 1.0, atol=1e-6)


@settings(max_examples=150, deadline=None)
@given(instances, taus, ratios, st.sampled_from([0.0, 0.3, 0.5]))
def test_compress_invariants(inst, tau, ratio, cluster_ratio):
    CASES["compress invariants"] += 1
    tokens, scores = make_tokens(*inst)
    cfg = CompressionConfig(tau=tau, retention_ratio=ratio, cluster_ratio=cluster_ratio)
    res = compress(tokens, scores, cfg)
    keys = tokens.keys
    # partition completeness
    assert sorted(res.retained_direct + res.recycled) == sorted(keys)
    assert not set(res.retained_direct) & set(res.recycled)
    # retained pairwise cosine below tau
    row = {k: i for i, k in enumerate(keys)}
    kept = tokens.take([row[k] for k in res.retained_direct])
    c = cosine_matrix(kept, kept)
    np.fill_diagonal(c, -1)
    assert kept.n < 2 or c.max() < tau
    # exact budget, sorted output
    assert res.achieved_count == min(res.budget, tokens.n)
    seq = res.kept_keys
    assert all(a < b for a, b in zip(seq, seq[1:]))
    # cluster means
    x = tokens.data.astype(np.float64)
    for mrow, members in zip(res.merged_tokens.data, res.merged_members):
        np.testing.assert_allclose(mrow, x[[row[k] for k in members]].mean(0), atol=1e-5)
    if res.merged_members:
        covered = sorted(k for m in res.merged_members for k in m)
        assert covered == sorted(res.recycled)


@settings(max_examples=150, deadline=None)
@given(seeds, st.integers(1, 64), st.integers(1, 8), st.data())
def test_centers_are_top_gamma(seed, n, d, data):
    CASES["gamma top-k centers"] += 1
    x = np.random.default_rng(seed).standard_normal((n, d))
    centers = data.draw(st.integers(1, n))
    k = data.draw(st.integers(1, 10))
    a = dpc_knn(x, k, centers)
    order = sorted(range(n), key=lambda i: (-a.gamma[i], i))
    assert a.centers == order[:centers]
    np.testing.assert_allclose(a.gamma, a.rho * a.delta)
    for i in range(n):
        c = a.member_of[i]
        assert c in a.centers
        if i in a.centers:
            assert c == i


@settings(max_examples=150, deadline=None)
@given(seeds, st.integers(1, 60), st.integers(1, 8), st.floats(0.01, 1.0))
def test_text_merge_count_and_optimality(seed, n, d, keep):
    CASES["retention count / merge optimality"] += 1
    rng = np.random.default_rng(seed)
    v = TokenTensor.from_rows(rng.standard_normal((n, d)))
    plan = plan_merge(v, rng.random(n), keep)
    assert len(plan.retaining) == keep_count(keep, n)
    assert keep_count(keep, n) == max(1, int(np.ceil(round(keep * n, 9))))
    cos = cosine_matrix(v, v)
    for j, k in plan.target.items():
        assert not np.any(cos[j, plan.retaining] > cos[j, k])


@settings(max_examples=150, deadline=None)
@given(instances, taus, ratios, st.integers(-6, 6))
def test_selection_scale_invariant(inst, tau, ratio, log2_scale):
    CASES["scale invariance"] += 1
    tokens, scores = make_tokens(*inst)
    scaled = TokenTensor(tokens.data * np.float32(2.0 ** log2_scale), tokens.frames, tokens.positions)
    cfg = CompressionConfig(tau=tau, retention_ratio=ratio)
    a, b = compress(tokens, scores, cfg), compress(scaled, scores, cfg)
    assert set(a.retained_direct) == set(b.retained_direct)
    sel_a = greedy_select(tokens, sorted(tokens.keys), tau, tokens.n)
    sel_b = greedy_select(scaled, sorted(tokens.keys), tau, tokens.n)
    assert sel_a == sel_b


@settings(max_examples=150, deadline=None)
@given(instances, taus, ratios)
def test_permutation_equivariance(inst, tau, ratio):
    CASES["permutation equivariance"] += 1
    tokens, scores = make_tokens(*inst, dup_frac=0.0)
    perm = np.random.default_rng(inst[0]).permutation(tokens.n)
    cfg = CompressionConfig(tau=tau, retention_ratio=ratio)
    a = compress(tokens, scores, cfg)
    b = compress(tokens.take(perm), scores, cfg)
    assert a.kept_keys == b.kept_keys
    assert set(a.retained_direct) == set(b.retained_direct)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 512), st.sampled_from([0.01, 0.02, 0.05, 0.1]), seeds)
def test_final_length(n, ratio, seed):
    CASES["final length"] += 1
    rng = np.random.default_rng(seed)
    tokens = TokenTensor.from_rows(rng.standard_normal((n, 4)))
    res = compress(tokens, [rng.random(n)], CompressionConfig(retention_ratio=ratio))
    assert res.achieved_count == min(res.budget, n)


@settings(max_examples=60, deadline=None)
@given(instances, st.sampled_from([2, 4, 8]))
def test_thread_count_determinism(inst, workers):
    CASES["thread determinism"] += 1
    seed, frames, per_frame, d = inst
    per_frame = max(per_frame, 2)
    tokens, _ = make_tokens(seed, frames, per_frame, d)
    rng = np.random.default_rng(seed)
    attn = [AttentionTensor(softmax_rows(rng.standard_normal((per_frame, per_frame)))) for _ in range(frames)]
    cfg = CompressionConfig(retention_ratio=0.25)
    a = run(tokens, attn, cfg, workers=1)
    b = run(tokens, attn, cfg, workers=workers)
    assert a.output.data.tobytes() == b.output.data.tobytes()
    assert a.retention.kept_keys == b.retention.kept_keys
    assert [s.scores.tobytes() for s in a.scores] == [s.scores.tobytes() for s in b.scores]
