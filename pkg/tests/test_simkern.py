import numpy as np
import pytest

from faceaudit.errors import AuditError
from faceaudit.simkern import cosine, cross_topk, pair_scores, topk_arrays

from helpers import make_set, random_unit
from oracles import full_scores, naive_topk


def test_cosine_examples():
    assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0
    u = np.array([0.6, 0.8])
    assert cosine(u, u) == pytest.approx(1.0, abs=1e-12)
    assert cosine(u, np.array([0.8, 0.6])) == pytest.approx(0.96, abs=1e-12)


def test_cosine_dim_mismatch():
    with pytest.raises(AuditError, match="dim-mismatch"):
        cosine(np.ones(2), np.ones(3))


def test_pair_scores_examples(rng):
    eset = make_set(random_unit(rng, 10, 16), [f"i{i}" for i in range(10)])
    assert pair_scores(eset, [(0, 0)])[0] == pytest.approx(1.0, abs=1e-6)
    a, b = pair_scores(eset, [(0, 1), (1, 0)])
    assert a == b


def test_pair_scores_match_sequential_recomputation(rng):
    eset = make_set(random_unit(rng, 40, 32), [f"i{i}" for i in range(40)])
    pairs = rng.integers(0, 40, size=(100, 2))
    got = pair_scores(eset, pairs)
    want = [cosine(eset.vectors[i], eset.vectors[j]) for i, j in pairs]
    assert got.tolist() == want


def test_pair_scores_out_of_range(rng):
    eset = make_set(random_unit(rng, 3, 4), list("abc"))
    with pytest.raises(AuditError, match="index-out-of-range"):
        pair_scores(eset, [(0, 3)])


@pytest.mark.parametrize("workers", [1, 2, 4, 8])
def test_pair_scores_thread_invariance(rng, workers, monkeypatch):
    import faceaudit.simkern as sk

    monkeypatch.setattr(sk, "PAIR_BLOCK", 37)
    eset = make_set(random_unit(rng, 50, 24), [f"i{i}" for i in range(50)])
    pairs = rng.integers(0, 50, size=(500, 2))
    base = pair_scores(eset, pairs, workers=1)
    assert pair_scores(eset, pairs, workers=workers).tobytes() == base.tobytes()


def test_self_match_top1(rng):
    eset = make_set(random_unit(rng, 60, 16), [f"i{i}" for i in range(60)])
    for r in cross_topk(eset, eset, 1):
        assert r.matches[0].target_index == r.query_index
        assert r.matches[0].score == pytest.approx(1.0, abs=1e-6)


def test_topk_equals_naive_oracle(rng):
    q, t = random_unit(rng, 50, 32), random_unit(rng, 200, 32)
    idx, sc = topk_arrays(q, t, 5, chunk_rows=256)
    oidx, osc = naive_topk(q, t, 5)
    assert np.array_equal(idx, oidx)
    np.testing.assert_allclose(sc, osc, rtol=0, atol=1e-12)


def test_tie_break_prefers_lower_target_index(rng):
    t = random_unit(rng, 20, 8)
    t[9] = t[3]
    idx, sc = topk_arrays(t[3:4], t, 1)
    assert idx[0, 0] == 3
    idx, _ = topk_arrays(t[3:4], t, 2)
    assert idx[0].tolist() == [3, 9]


def test_ties_straddling_kth_value():
    # Six identical targets, k=3: must keep the three lowest indices.
    t = np.tile(np.array([[1.0, 0.0]], dtype=np.float32), (6, 1))
    t = np.vstack([np.array([[0.0, 1.0]], dtype=np.float32), t])
    idx, sc = topk_arrays(np.array([[1.0, 0.0]], dtype=np.float32), t, 3)
    assert idx[0].tolist() == [1, 2, 3]
    assert sc[0].tolist() == [1.0, 1.0, 1.0]


def test_k_larger_than_target_returns_all_sorted(rng):
    q, t = random_unit(rng, 4, 8), random_unit(rng, 3, 8)
    idx, sc = topk_arrays(q, t, 10)
    assert idx.shape == (4, 3)
    assert np.all(np.diff(sc, axis=1) <= 0)


def test_dim_mismatch(rng):
    a = make_set(random_unit(rng, 2, 4), list("ab"))
    b = make_set(random_unit(rng, 2, 5), list("ab"))
    with pytest.raises(AuditError, match="dim-mismatch"):
        cross_topk(a, b, 1)


def test_invariant_to_workers_and_chunk_size(rng):
    q, t = random_unit(rng, 300, 48), random_unit(rng, 1500, 48)
    t[1400] = t[5]
    ref_idx, ref_sc = topk_arrays(q, t, 4, workers=1, chunk_rows=4096)
    for workers in (1, 2, 4, 8):
        for chunk in (256, 300, 777, 1024):
            idx, sc = topk_arrays(q, t, 4, workers=workers, chunk_rows=chunk)
            assert idx.tobytes() == ref_idx.tobytes()
            assert sc.tobytes() == ref_sc.tobytes()


def test_scores_within_bounds(rng):
    q = random_unit(rng, 30, 8)
    _, sc = topk_arrays(q, np.vstack([q, -q]), 60)
    assert sc.max() <= 1.0 and sc.min() >= -1.0


def test_oracle_sanity():
    q = np.array([[1.0, 0.0]])
    t = np.array([[0.6, 0.8], [1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(full_scores(q, t), [[0.6, 1.0, 0.0]])
    assert naive_topk(q, t, 2)[0].tolist() == [[1, 0]]
