"""Pair-list verification accuracy under k-fold cross-validation, and
per-demographic-group aggregation.

Folds are contiguous blocks of the pair list in file order. For each held-out
fold the decision threshold is the training-fold score that maximizes
training accuracy (lowest such score on ties); the rule is
``score >= threshold`` => mated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Mapping

import numpy as np

from .embset import EmbeddingSet
from .errors import AuditError
from .rng import make_rng
from .simkern import pair_scores

LABELS = ("mated", "nonmated")
DEFAULT_FOLDS = 10


@dataclass(frozen=True)
class PairEntry:
    sample_id_a: str
    sample_id_b: str
    label: str


@dataclass(frozen=True)
class PairList:
    entries: tuple[PairEntry, ...]
    fold_count: int = DEFAULT_FOLDS

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.fold_count < 1:
            raise AuditError("bad-folds", f"fold_count must be >= 1, got {self.fold_count}")
        for e in self.entries:
            if e.label not in LABELS:
                raise AuditError("bad-label", f"label must be mated or nonmated, got {e.label!r}")
        if len(self.entries) % self.fold_count:
            raise AuditError(
                "non-divisible-count",
                f"{len(self.entries)} pairs cannot be split into {self.fold_count} equal folds",
            )

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def is_mated(self) -> np.ndarray:
        return np.array([e.label == "mated" for e in self.entries], dtype=bool)


@dataclass(frozen=True)
class VerificationResult:
    per_fold_accuracy: tuple[float, ...]
    mean_accuracy: float
    std: float
    per_fold_threshold: tuple[float, ...]

    @property
    def fold_count(self) -> int:
        return len(self.per_fold_accuracy)


@dataclass(frozen=True)
class GroupReport:
    per_group: Mapping[str, VerificationResult]
    average: float

    @property
    def average_rounded(self) -> str:
        return str(round_half_up(self.average))


@dataclass(frozen=True)
class GroupGap:
    best_group: str
    worst_group: str
    gap: float


def read_pairlist(path, fold_count: int = DEFAULT_FOLDS) -> PairList:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["sample_id_a", "sample_id_b", "label"]:
            raise AuditError("bad-header", f"{path}: header must be sample_id_a,sample_id_b,label")
        entries = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise AuditError("bad-row", f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            entries.append(PairEntry(row[0].strip(), row[1].strip(), row[2].strip()))
    return PairList(tuple(entries), fold_count)


def write_pairlist(path, pairs: PairList) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id_a", "sample_id_b", "label"])
        for e in pairs.entries:
            w.writerow([e.sample_id_a, e.sample_id_b, e.label])


def best_threshold(scores: np.ndarray, is_mated: np.ndarray) -> tuple[float, int]:
    """Training threshold maximizing correct decisions; lowest on ties.

    Returns ``(threshold, n_correct)``.
    """
    cand = np.unique(scores)
    mated = np.sort(scores[is_mated])
    non = np.sort(scores[~is_mated])
    correct = (mated.size - np.searchsorted(mated, cand, side="left")) + np.searchsorted(
        non, cand, side="left"
    )
    best = int(np.argmax(correct))
    return float(cand[best]), int(correct[best])


def kfold_from_scores(scores, is_mated, k: int = DEFAULT_FOLDS, shuffle_seed: int | None = None) -> VerificationResult:
    scores = np.asarray(scores, dtype=np.float64)
    is_mated = np.asarray(is_mated, dtype=bool)
    n = scores.size
    if k < 2:
        raise AuditError("bad-folds", f"cross-validation needs k >= 2, got {k}")
    if n == 0 or n % k:
        raise AuditError("non-divisible-count", f"{n} pairs cannot be split into {k} equal folds")
    order = np.arange(n) if shuffle_seed is None else make_rng(shuffle_seed).permutation(n)
    folds = order.reshape(k, n // k)
    accs, thrs = [], []
    for f in range(k):
        train = np.concatenate([folds[g] for g in range(k) if g != f])
        test = folds[f]
        t, _ = best_threshold(scores[train], is_mated[train])
        pred = scores[test] >= t
        accs.append(float(np.count_nonzero(pred == is_mated[test]) / test.size))
        thrs.append(t)
    mean = math.fsum(accs) / k
    std = math.sqrt(math.fsum((a - mean) ** 2 for a in accs) / k)
    return VerificationResult(tuple(accs), mean, std, tuple(thrs))


def resolve_pairs(eset: EmbeddingSet, pairs: PairList) -> np.ndarray:
    return np.array(
        [(eset.index_of(e.sample_id_a), eset.index_of(e.sample_id_b)) for e in pairs.entries],
        dtype=np.int64,
    ).reshape(-1, 2)


def kfold_accuracy(
    eset: EmbeddingSet,
    pairs: PairList,
    shuffle_seed: int | None = None,
    workers: int | None = None,
) -> VerificationResult:
    idx = resolve_pairs(eset, pairs)
    scores = pair_scores(eset, idx, workers=workers)
    return kfold_from_scores(scores, pairs.is_mated, pairs.fold_count, shuffle_seed)


def average_accuracy(accuracies: Mapping[str, float]) -> float:
    """Unweighted mean over groups."""
    if not accuracies:
        raise AuditError("no-groups", "at least one group is required")
    return math.fsum(accuracies.values()) / len(accuracies)


def round_half_up(value: float, places: int = 4) -> Decimal:
    # Going through 12 decimals first drops binary noise such as 0.98297499999.
    return Decimal(f"{value:.12f}").quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)


def aggregate_groups(per_group: Mapping[str, VerificationResult]) -> GroupReport:
    ordered = {g: per_group[g] for g in sorted(per_group)}
    avg = average_accuracy({g: r.mean_accuracy for g, r in ordered.items()})
    return GroupReport(per_group=ordered, average=avg)


def group_accuracy(
    eset: EmbeddingSet,
    group_pairlists: Mapping[str, PairList],
    shuffle_seed: int | None = None,
    workers: int | None = None,
) -> GroupReport:
    return aggregate_groups(
        {g: kfold_accuracy(eset, pl, shuffle_seed, workers) for g, pl in group_pairlists.items()}
    )


def max_gap(report: GroupReport | Mapping[str, float]) -> GroupGap:
    """Best and worst group by mean accuracy; ties go to the lexicographically first name."""
    if isinstance(report, GroupReport):
        acc = {g: r.mean_accuracy for g, r in report.per_group.items()}
    else:
        acc = dict(report)
    if len(acc) < 2:
        raise AuditError("too-few-groups", "a gap needs at least two groups")
    best = min(acc, key=lambda g: (-acc[g], g))
    worst = min(acc, key=lambda g: (acc[g], g))
    return GroupGap(best, worst, acc[best] - acc[worst])


def read_group_dir(directory, fold_count: int = DEFAULT_FOLDS) -> dict[str, PairList]:
    directory = Path(directory)
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise AuditError("no-groups", f"no <group>.csv files in {directory}")
    return {f.stem: read_pairlist(f, fold_count) for f in files}
