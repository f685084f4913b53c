import numpy as np
import pytest

from vtc.ablate import (
    SynthParams,
    ablate,
    attention_mass,
    mean_pairwise_cosine,
    reconstruction_error,
    similarity_only,
)
from vtc.config import CompressionConfig
from vtc.scoring import ContributionScores
from vtc.tensor import TokenTensor

SMALL = SynthParams(frames=8, tokens_per_frame=64, d=64, temporal_corr=0.9, spatial_dup=0.5, n_text=8)
BASE = CompressionConfig(retention_ratio=0.1)


def test_proxy_helpers():
    scores = [ContributionScores(np.array([1.0, 3.0])), ContributionScores(np.array([4.0]))]
    assert attention_mass([(0, 1), (1, 0)], scores) == pytest.approx(7 / 8)
    assert mean_pairwise_cosine(np.array([[1.0, 0], [0, 1], [1, 1]])) == pytest.approx((0 + 2 * np.sqrt(0.5)) / 3)
    assert mean_pairwise_cosine(np.array([[1.0, 0]])) == 0.0
    t = TokenTensor.from_rows([(0, 0), (3, 4), (6, 8)])
    assert reconstruction_error(t, [(0, 0)], [[0.0, 0.0]]) == pytest.approx(7.5)
    assert reconstruction_error(t, t.keys, t.data) == 0.0


def test_similarity_only_ignores_attention():
    t = TokenTensor.from_rows([(1, 0), (1, 0.01), (0, 1)])
    assert similarity_only(t, 0.7, 2) == [(0, 0), (0, 2)]


def test_tau_sweep_redundancy_non_decreasing():
    rows = ablate("tau", [0.5, 0.6, 0.7, 0.8, 0.9], BASE, range(10), SMALL, workers=1)
    cos = [r["mean_cosine"] for r in rows]
    assert all(a <= b for a, b in zip(cos, cos[1:]))
    assert [r["value"] for r in rows] == [0.5, 0.6, 0.7, 0.8, 0.9]


def test_clustering_lowers_reconstruction_error():
    rows = ablate("cluster_ratio", [0.0, 0.3], BASE, range(10), SMALL)
    no_cluster, clustered = rows
    wins = sum(a["recon_error"] >= b["recon_error"] for a, b in zip(no_cluster["per_seed"], clustered["per_seed"]))
    assert wins == 10


def test_text_axes_enable_inner_merge():
    rows = ablate("keep_R", [0.25, 1.0], BASE, range(2), SMALL)
    assert rows[0]["flops_ratio"] < rows[1]["flops_ratio"]
    k_rows = ablate("layer_K", [2, 18], BASE, range(2), SMALL)
    assert k_rows[0]["flops_ratio"] < k_rows[1]["flops_ratio"]
    assert isinstance(k_rows[0]["value"], int)


def test_lambda_sweep_runs_and_is_deterministic():
    a = ablate("lambda", [0.0, 0.5, 1.0], BASE, range(2), SMALL, workers=1)
    b = ablate("lambda", [0.0, 0.5, 1.0], BASE, range(2), SMALL, workers=4)
    assert a == b


def test_bad_inputs():
    with pytest.raises(ValueError):
        ablate("nope", [1.0])
    with pytest.raises(ValueError):
        ablate("tau", [])
