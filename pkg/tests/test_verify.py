from decimal import Decimal

import numpy as np
import pytest

from faceaudit.errors import AuditError
from faceaudit.verify import (
    PairEntry,
    PairList,
    VerificationResult,
    aggregate_groups,
    average_accuracy,
    best_threshold,
    group_accuracy,
    kfold_accuracy,
    kfold_from_scores,
    max_gap,
    read_group_dir,
    read_pairlist,
    round_half_up,
    write_pairlist,
)

from helpers import clustered_set

VEC2FACE_RFW = {"African": 0.8415, "Asian": 0.8535, "Caucasian": 0.9028, "Indian": 0.8750}
MSCELEB_RFW = {"African": 0.9832, "Asian": 0.9785, "Caucasian": 0.9912, "Indian": 0.9790}


def separable(n_per_label):
    scores = np.array([0.9, 0.1] * n_per_label)
    return scores, np.array([True, False] * n_per_label)


@pytest.mark.parametrize("k", [2, 5, 10])
def test_perfectly_separable(k):
    res = kfold_from_scores(*separable(30), k=k)
    assert res.mean_accuracy == 1.0 and res.std == 0.0
    assert res.fold_count == k


def test_all_scores_equal_gives_half():
    res = kfold_from_scores(np.full(20, 0.5), np.array([True, False] * 10), k=10)
    assert res.mean_accuracy == 0.5


def test_6000_pair_folds_are_600_contiguous_entries():
    scores, mated = separable(3000)
    # Invert fold 3 only; if folds are contiguous 600-blocks, only fold 3 fails.
    scores[1800:2400] = 1.0 - scores[1800:2400]
    res = kfold_from_scores(scores, mated, k=10)
    assert res.per_fold_accuracy[3] == 0.0
    assert all(a == 1.0 for f, a in enumerate(res.per_fold_accuracy) if f != 3)


def test_held_out_fold_never_moves_its_threshold(rng):
    scores = rng.normal(0, 1, 600)
    mated = rng.random(600) < 0.5
    scores[mated] += 1.5
    base = kfold_from_scores(scores, mated, k=10)
    for f in range(10):
        perturbed = scores.copy()
        perturbed[f * 60:(f + 1) * 60] = rng.normal(0, 5, 60)
        res = kfold_from_scores(perturbed, mated, k=10)
        assert res.per_fold_threshold[f] == base.per_fold_threshold[f]


def test_best_threshold_lowest_on_ties():
    # Thresholds 0.3 and 0.6 both classify 3/4 correctly; the lower wins.
    t, correct = best_threshold(np.array([0.2, 0.3, 0.5, 0.6]), np.array([False, True, False, True]))
    assert (t, correct) == (0.3, 3)


def test_kfold_errors():
    with pytest.raises(AuditError, match="non-divisible-count"):
        kfold_from_scores(np.zeros(7), np.zeros(7, bool), k=2)
    with pytest.raises(AuditError, match="bad-folds"):
        kfold_from_scores(np.zeros(4), np.zeros(4, bool), k=1)
    with pytest.raises(AuditError, match="non-divisible-count"):
        PairList((PairEntry("a", "b", "mated"),) * 3, fold_count=2)
    with pytest.raises(AuditError, match="bad-label"):
        PairList((PairEntry("a", "b", "same"),), fold_count=1)


def test_shuffle_seed_is_deterministic(rng):
    scores, mated = rng.random(100), rng.random(100) < 0.5
    a = kfold_from_scores(scores, mated, 10, shuffle_seed=5)
    assert a == kfold_from_scores(scores, mated, 10, shuffle_seed=5)


def pairlist_for(eset, n_pairs, rng, k=10):
    ids = eset.identity_index
    names = sorted(ids)
    entries = []
    for p in range(n_pairs):
        if p % 2 == 0:
            members = ids[names[p % len(names)]]
            a, b = members[0], members[1]
            label = "mated"
        else:
            a, b = ids[names[0]][0], ids[names[1 + p % (len(names) - 1)]][0]
            label = "nonmated"
        entries.append(PairEntry(eset.sample_ids[a], eset.sample_ids[b], label))
    return PairList(tuple(entries), k)


def test_kfold_accuracy_on_set_and_relabel_invariance(rng):
    eset = clustered_set(rng, 20, 3, spread=0.3)
    pairs = pairlist_for(eset, 100, rng)
    res = kfold_accuracy(eset, pairs)
    assert res.mean_accuracy > 0.9
    assert all(0 <= a <= 1 for a in res.per_fold_accuracy)
    from faceaudit.embset import SampleMeta, from_arrays

    renamed = from_arrays(eset.vectors, [SampleMeta("x" + m.sample_id, m.identity) for m in eset.manifest])
    pairs2 = PairList(tuple(PairEntry("x" + e.sample_id_a, "x" + e.sample_id_b, e.label) for e in pairs.entries), 10)
    assert kfold_accuracy(renamed, pairs2) == res


def test_unresolvable_id(rng):
    eset = clustered_set(rng, 3, 2)
    with pytest.raises(AuditError, match="unresolvable-id"):
        kfold_accuracy(eset, PairList((PairEntry("s0", "nope", "mated"),), 1))


def test_group_average_published_rows():
    assert round_half_up(average_accuracy(VEC2FACE_RFW)) == Decimal("0.8682")
    assert float(round_half_up(average_accuracy(MSCELEB_RFW))) == pytest.approx(0.9830, abs=1e-4)
    assert average_accuracy({"a": 0.9, "b": 0.7}) == pytest.approx(0.8)
    assert average_accuracy({"only": 0.77}) == 0.77


def test_round_half_up():
    assert str(round_half_up(0.982975)) == "0.9830"
    assert str(round_half_up(0.894975)) == "0.8950"
    assert str(round_half_up(0.12344999)) == "0.1234"


def test_max_gap_examples():
    gap = max_gap(VEC2FACE_RFW)
    assert (gap.best_group, gap.worst_group) == ("Caucasian", "African")
    assert gap.gap == pytest.approx(0.0613, abs=1e-12)
    assert max_gap({"a": 0.9, "b": 0.9, "c": 0.9}).gap == 0
    assert max_gap({"x": 0.95, "y": 0.90}).gap == pytest.approx(0.05)
    with pytest.raises(AuditError, match="too-few-groups"):
        max_gap({"solo": 0.9})


def test_aggregate_groups_average_is_mean_of_means():
    results = {g: VerificationResult((a,), a, 0.0, (0.0,)) for g, a in VEC2FACE_RFW.items()}
    rep = aggregate_groups(results)
    assert list(rep.per_group) == sorted(VEC2FACE_RFW)
    assert rep.average == pytest.approx(sum(VEC2FACE_RFW.values()) / 4, abs=1e-15)
    assert rep.average_rounded == "0.8682"
    assert max_gap(rep).worst_group == "African"


def test_pairlist_csv_round_trip_and_group_dir(tmp_path, rng):
    eset = clustered_set(rng, 10, 3, spread=0.3)
    pairs = pairlist_for(eset, 20, rng)
    (tmp_path / "groups").mkdir()
    for g in ("b_group", "a_group"):
        write_pairlist(tmp_path / "groups" / f"{g}.csv", pairs)
    assert read_pairlist(tmp_path / "groups" / "a_group.csv") == pairs
    groups = read_group_dir(tmp_path / "groups")
    assert sorted(groups) == ["a_group", "b_group"]
    rep = group_accuracy(eset, groups)
    assert rep.average == rep.per_group["a_group"].mean_accuracy


def test_pairlist_bad_header(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("a,b,c\nx,y,mated\n")
    with pytest.raises(AuditError, match="bad-header"):
        read_pairlist(p, 1)
