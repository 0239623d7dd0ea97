"""Seeded sampling of mated and non-mated comparison pairs.

Both samplers draw with replacement and are rejection-free: every draw maps
uniform integers onto valid pairs through exact integer arithmetic, so the
output is a pure function of (set, kind, n, seed).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .embset import EmbeddingSet
from .errors import AuditError
from .rng import check_seed, make_rng

MATED = "mated"
NONMATED = "nonmated"


@dataclass(frozen=True, eq=False)
class PairSample:
    kind: str
    pairs: np.ndarray  # (n, 2) int64, canonical i < j
    seed: int
    source_set: str

    def __len__(self) -> int:
        return len(self.pairs)

    def as_tuples(self) -> list[tuple[int, int]]:
        return [tuple(p) for p in self.pairs.tolist()]


def _grouped(eset: EmbeddingSet):
    """Sample indices grouped by identity, with block starts and sizes."""
    members = list(eset.identity_index.values())
    sizes = np.array([len(m) for m in members], dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    order = np.fromiter((i for m in members for i in m), dtype=np.int64, count=int(sizes.sum()))
    return order, starts, sizes


def _canonical(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1)
    return out.astype(np.int64)


def _decode_ordered(local: np.ndarray, size: np.ndarray):
    # local in [0, size*(size-1)) -> ordered pair (a, b), a != b, both < size
    a = local // (size - 1)
    b = local % (size - 1)
    b = b + (b >= a)
    return a, b


def sample_mated(eset: EmbeddingSet, n: int, seed: int, per_identity: bool = False) -> PairSample:
    """Draw ``n`` same-identity pairs uniformly over all valid unordered pairs.

    With ``per_identity=True`` the identity is drawn uniformly first (among
    identities with at least two samples), then a pair within it.
    """
    seed = check_seed(seed)
    if n < 0:
        raise AuditError("bad-count", f"n must be >= 0, got {n}")
    order, starts, sizes = _grouped(eset)
    eligible = np.flatnonzero(sizes >= 2)
    if eligible.size == 0:
        raise AuditError("no-mated-pairs", "no identity has two or more samples")
    rng = make_rng(seed)
    e_sizes = sizes[eligible]
    if per_identity:
        pick = rng.integers(0, eligible.size, size=n)
        local = rng.integers(0, e_sizes[pick] * (e_sizes[pick] - 1))
    else:
        # Identity weight n_i(n_i - 1) is proportional to its unordered pair count.
        weights = e_sizes * (e_sizes - 1)
        cum = np.cumsum(weights)
        r = rng.integers(0, cum[-1], size=n)
        pick = np.searchsorted(cum, r, side="right")
        local = r - (cum[pick] - weights[pick])
    size = e_sizes[pick]
    a, b = _decode_ordered(local, size)
    base = starts[eligible[pick]]
    pairs = _canonical(order[base + a], order[base + b])
    return PairSample(MATED, pairs, seed, eset.name)


def sample_nonmated(eset: EmbeddingSet, n: int, seed: int) -> PairSample:
    """Draw ``n`` cross-identity pairs: i uniform over samples, then j uniform
    over the samples of all other identities."""
    seed = check_seed(seed)
    if n < 0:
        raise AuditError("bad-count", f"n must be >= 0, got {n}")
    if len(eset.identity_index) < 2:
        raise AuditError("single-identity-set", "non-mated pairs need at least two identities")
    order, starts, sizes = _grouped(eset)
    codes = eset.identity_codes
    total = eset.n_samples
    rng = make_rng(seed)
    i = rng.integers(0, total, size=n)
    ci = codes[i]
    r = rng.integers(0, total - sizes[ci])
    pos = np.where(r < starts[ci], r, r + sizes[ci])
    j = order[pos]
    return PairSample(NONMATED, _canonical(i, j), seed, eset.name)


def enumerate_mated(eset: EmbeddingSet) -> np.ndarray:
    """All unordered same-identity pairs, sorted by (i, j)."""
    rows = [p for members in eset.identity_index.values() for p in combinations(sorted(members), 2)]
    if not rows:
        return np.zeros((0, 2), dtype=np.int64)
    arr = np.asarray(rows, dtype=np.int64)
    return arr[np.lexsort((arr[:, 1], arr[:, 0]))]


def write_pairs_csv(path, eset: EmbeddingSet, sample: PairSample) -> None:
    ids = eset.sample_ids
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id_a", "sample_id_b"])
        for i, j in sample.pairs.tolist():
            w.writerow([ids[i], ids[j]])
