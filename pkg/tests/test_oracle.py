import numpy as np
import pytest

from vtc import oracle, stc
from vtc.errors import OracleMismatch


def test_default_run_passes():
    rep = oracle.oracle_check(100)
    assert rep.passed == 100 and rep.failed == 0


def test_degenerate_identical_tokens():
    inst = oracle.random_instance(5, identical=True)
    oracle.check_instance(inst)


def test_full_retention_case():
    for seed in range(40):
        inst = oracle.random_instance(seed)
        if inst.cfg.retention_ratio == 1.0:
            oracle.check_instance(inst)
            break
    else:
        pytest.fail("no full-retention instance generated")


def test_detects_a_planted_bug(monkeypatch):
    real = stc.greedy_select

    def loose(tokens, order, tau, budget):
        return real(tokens, order, min(1.0, tau + 0.3), budget)

    monkeypatch.setattr(stc, "greedy_select", loose)
    rep = oracle.oracle_check(30)
    assert rep.failed > 0
    assert rep.failures[0]["field"] in {"retained_direct", "recycled", "merged_groups", "final_sequence"}


def test_mismatch_names_field():
    err = OracleMismatch("merged_tokens", "center (0, 1)")
    assert err.field == "merged_tokens" and err.exit_code == 3


def test_instances_respect_limits():
    for seed in range(50):
        inst = oracle.random_instance(seed)
        assert 1 <= inst.tokens.n <= 64
        assert 1 <= inst.tokens.d <= 16
        assert np.all(np.isfinite(inst.tokens.data))
