import numpy as np
import pytest

from faceaudit.errors import AuditError
from faceaudit.pairsample import enumerate_mated, sample_mated, sample_nonmated, write_pairs_csv

from helpers import make_set, random_unit
from oracles import chi2_against, mated_law, nonmated_law


def labelled(rng, identities):
    return make_set(random_unit(rng, len(identities), 4), identities)


def test_single_valid_mated_pair(rng):
    eset = labelled(rng, ["A", "A"])
    assert sample_mated(eset, 3, 1).as_tuples() == [(0, 1)] * 3


def test_singleton_identity_never_mated(rng):
    eset = labelled(rng, ["A", "B", "B", "B"])
    assert set(sample_mated(eset, 100, 5).as_tuples()) <= {(1, 2), (1, 3), (2, 3)}


def test_mated_uniform_over_pairs(rng):
    eset = labelled(rng, ["A"] * 2 + ["B"] * 4)
    sample = sample_mated(eset, 70_000, 11)
    assert chi2_against(sample.pairs, mated_law(["A"] * 2 + ["B"] * 4)) > 0.01
    share_a = np.mean([p == (0, 1) for p in sample.as_tuples()])
    assert share_a == pytest.approx(1 / 7, abs=0.01)


def test_mated_per_identity_law(rng):
    ids = ["A"] * 2 + ["B"] * 4
    sample = sample_mated(labelled(rng, ids), 40_000, 3, per_identity=True)
    assert chi2_against(sample.pairs, mated_law(ids, per_identity=True)) > 0.01


def test_mated_without_pairs_raises(rng):
    with pytest.raises(AuditError, match="no-mated-pairs"):
        sample_mated(labelled(rng, ["A", "B", "C"]), 5, 0)


def test_nonmated_examples(rng):
    assert sample_nonmated(labelled(rng, ["A", "B"]), 5, 9).as_tuples() == [(0, 1)] * 5
    got = set(sample_nonmated(labelled(rng, ["A", "B", "C"]), 3000, 9).as_tuples())
    assert got == {(0, 1), (0, 2), (1, 2)}


def test_nonmated_two_stage_law(rng):
    ids = ["A", "A", "A", "B", "C", "C"]
    sample = sample_nonmated(labelled(rng, ids), 60_000, 21)
    assert chi2_against(sample.pairs, nonmated_law(ids)) > 0.01


def test_nonmated_single_identity_raises(rng):
    with pytest.raises(AuditError, match="single-identity-set"):
        sample_nonmated(labelled(rng, ["A", "A"]), 1, 0)


def test_label_correctness_exhaustive(rng):
    ids = [f"id{int(v)}" for v in rng.integers(0, 6, size=40)]
    eset = labelled(rng, ids)
    for i, j in sample_mated(eset, 5000, 2).pairs.tolist():
        assert i < j and ids[i] == ids[j]
    for i, j in sample_nonmated(eset, 5000, 2).pairs.tolist():
        assert i < j and ids[i] != ids[j]


def test_determinism_and_seed_sensitivity(rng):
    eset = labelled(rng, [f"id{i % 5}" for i in range(30)])
    a = sample_mated(eset, 1000, 42).pairs
    assert np.array_equal(a, sample_mated(eset, 1000, 42).pairs)
    assert not np.array_equal(a, sample_mated(eset, 1000, 43).pairs)
    b = sample_nonmated(eset, 1000, 2**64 - 1).pairs
    assert np.array_equal(b, sample_nonmated(eset, 1000, 2**64 - 1).pairs)


def test_coverage_of_every_mated_pair(rng):
    eset = labelled(rng, ["A"] * 4 + ["B"] * 3 + ["C"])
    universe = {tuple(p) for p in enumerate_mated(eset).tolist()}
    sample = sample_mated(eset, 100 * len(universe), 8)
    assert set(sample.as_tuples()) == universe


def test_enumerate_mated_examples(rng):
    assert enumerate_mated(labelled(rng, ["A"] * 3)).tolist() == [[0, 1], [0, 2], [1, 2]]
    assert enumerate_mated(labelled(rng, ["A", "B", "C"])).shape == (0, 2)
    ids = [f"id{int(v)}" for v in rng.integers(0, 5, size=20)]
    expected = sum(ids.count(i) * (ids.count(i) - 1) // 2 for i in set(ids))
    pairs = enumerate_mated(labelled(rng, ids))
    assert len(pairs) == expected
    assert pairs.tolist() == sorted(pairs.tolist())


def test_interleaved_identities_sorted_enumeration(rng):
    assert enumerate_mated(labelled(rng, ["A", "B", "A", "B"])).tolist() == [[0, 2], [1, 3]]


def test_zero_pairs_and_bad_seed(rng):
    eset = labelled(rng, ["A", "A", "B"])
    assert len(sample_mated(eset, 0, 0)) == 0
    with pytest.raises(AuditError):
        sample_mated(eset, 1, -1)
    with pytest.raises(AuditError):
        sample_nonmated(eset, -1, 0)


def test_write_pairs_csv(tmp_path, rng):
    eset = labelled(rng, ["A", "A"])
    write_pairs_csv(tmp_path / "p.csv", eset, sample_mated(eset, 2, 0))
    assert (tmp_path / "p.csv").read_text() == "sample_id_a,sample_id_b\ns0,s1\ns0,s1\n"
