"""Identity-leakage audit of a synthetic set against a real reference set.

For each synthetic sample (or identity) the closest reference sample is found
by exact search; the distribution of those maxima, its upper tail and the
globally most similar cross pairs are reported. The verdict is advisory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .biomet import Histogram, histogram
from .embset import EmbeddingSet
from .errors import AuditError
from .simkern import CHUNK_ROWS, topk_arrays

log = logging.getLogger(__name__)

PER_SAMPLE = "per-sample"
PER_IDENTITY = "per-identity"
MODES = (PER_SAMPLE, PER_IDENTITY)
DEFAULT_THRESHOLD = 0.4
DEFAULT_TOPK = 5
LONG_TAIL_FRACTION = 0.01


@dataclass(frozen=True)
class MaxRecord:
    query_index: int
    query_sample_id: str
    query_identity: str
    target_index: int
    target_sample_id: str
    score: float


@dataclass(frozen=True)
class PairRecord:
    query_index: int
    target_index: int
    query_sample_id: str
    target_sample_id: str
    query_identity: str
    target_identity: str
    score: float


@dataclass(frozen=True)
class LeakageSummary:
    tail_fraction: float
    threshold: float
    histogram: Histogram
    long_tail: bool
    notes: tuple[str, ...]


@dataclass(frozen=True)
class LeakageReport:
    mode: str
    per_query_max: tuple[MaxRecord, ...]
    histogram: Histogram
    top_pairs: tuple[PairRecord, ...]
    tail_fraction: float
    threshold: float
    long_tail: bool
    notes: tuple[str, ...] = field(default=())


def _check_inputs(synthetic: EmbeddingSet, reference: EmbeddingSet) -> None:
    if synthetic.dim != reference.dim:
        raise AuditError("dim-mismatch", f"synthetic dim {synthetic.dim} != reference dim {reference.dim}")
    if reference.n_samples == 0:
        raise AuditError("empty-reference", "reference set has no samples")


def _scan(synthetic, reference, k, workers, chunk_rows):
    _check_inputs(synthetic, reference)

    def progress(done, total):
        log.info("leakage scan: reference chunk %d/%d", done, total)

    return topk_arrays(
        synthetic.vectors, reference.vectors, k,
        workers=workers, chunk_rows=chunk_rows, progress=progress,
    )


def _max_records(synthetic, reference, idx, scores, mode) -> list[MaxRecord]:
    if mode not in MODES:
        raise AuditError("bad-mode", f"mode must be one of {MODES}, got {mode!r}")
    best_t = idx[:, 0]
    best_s = scores[:, 0]
    if mode == PER_SAMPLE:
        rows = range(synthetic.n_samples)
    else:
        # Representative sample: highest max, lowest sample index on ties.
        rows = []
        for members in synthetic.identity_index.values():
            m = np.asarray(members)
            rows.append(int(m[np.argmax(best_s[m])]))
    out = []
    for q in rows:
        meta = synthetic.manifest[q]
        t = int(best_t[q])
        out.append(MaxRecord(q, meta.sample_id, meta.identity, t,
                             reference.manifest[t].sample_id, float(best_s[q])))
    return out


def closest_real(
    synthetic: EmbeddingSet,
    reference: EmbeddingSet,
    mode: str = PER_SAMPLE,
    workers: int | None = None,
    chunk_rows: int = CHUNK_ROWS,
) -> list[MaxRecord]:
    idx, scores = _scan(synthetic, reference, 1, workers, chunk_rows)
    return _max_records(synthetic, reference, idx, scores, mode)


def _global_pairs(synthetic, reference, idx, scores, k) -> list[PairRecord]:
    q = np.repeat(np.arange(idx.shape[0]), idx.shape[1])
    t = idx.ravel()
    s = scores.ravel()
    order = np.lexsort((t, q, -s))[:k]
    out = []
    for o in order:
        qi, ti = int(q[o]), int(t[o])
        qm, tm = synthetic.manifest[qi], reference.manifest[ti]
        out.append(PairRecord(qi, ti, qm.sample_id, tm.sample_id, qm.identity, tm.identity, float(s[o])))
    return out


def top_pairs(
    synthetic: EmbeddingSet,
    reference: EmbeddingSet,
    k: int = DEFAULT_TOPK,
    workers: int | None = None,
    chunk_rows: int = CHUNK_ROWS,
) -> list[PairRecord]:
    """The ``k`` most similar (synthetic, reference) pairs over all pairs.

    Any global top-k pair is within its query's own top-k, so a per-query
    top-k pass followed by one global sort is exact.
    """
    idx, scores = _scan(synthetic, reference, k, workers, chunk_rows)
    return _global_pairs(synthetic, reference, idx, scores, k)


def leakage_summary(maxima, threshold: float = DEFAULT_THRESHOLD, bins: int = 100) -> LeakageSummary:
    """Tail share of closest-sample scores and a long-tail flag.

    The flag is raised when at least 1% of maxima reach ``threshold`` while
    the histogram's modal bin lies below it.
    """
    values = np.asarray(
        [m.score if isinstance(m, MaxRecord) else m for m in maxima], dtype=np.float64
    )
    if values.size == 0:
        raise AuditError("empty-input", "no maxima to summarize")
    tail = int(np.count_nonzero(values >= threshold)) / values.size
    hist = histogram(values, bins=bins)
    mode_bin = int(np.argmax(hist.counts))
    mode_center = 0.5 * (hist.bin_edges[mode_bin] + hist.bin_edges[mode_bin + 1])
    long_tail = tail >= LONG_TAIL_FRACTION and mode_center < threshold
    notes = []
    if long_tail:
        notes.append(
            f"long tail: {tail:.4%} of closest-sample scores reach {threshold} "
            f"while the mode sits near {mode_center:.2f}"
        )
    if mode_center >= threshold:
        notes.append(f"modal closest-sample score {mode_center:.2f} is at or above {threshold}")
    return LeakageSummary(tail, float(threshold), hist, long_tail, tuple(notes))


def audit(
    synthetic: EmbeddingSet,
    reference: EmbeddingSet,
    mode: str = PER_SAMPLE,
    topk: int = DEFAULT_TOPK,
    threshold: float = DEFAULT_THRESHOLD,
    bins: int = 100,
    workers: int | None = None,
    chunk_rows: int = CHUNK_ROWS,
) -> LeakageReport:
    """Full leakage report from a single streamed pass over the reference."""
    if topk < 1:
        raise AuditError("bad-k", f"topk must be >= 1, got {topk}")
    idx, scores = _scan(synthetic, reference, topk, workers, chunk_rows)
    records = _max_records(synthetic, reference, idx, scores, mode)
    pairs = _global_pairs(synthetic, reference, idx, scores, topk)
    summary = leakage_summary(records, threshold=threshold, bins=bins)
    return LeakageReport(
        mode=mode,
        per_query_max=tuple(records),
        histogram=summary.histogram,
        top_pairs=tuple(pairs),
        tail_fraction=summary.tail_fraction,
        threshold=summary.threshold,
        long_tail=summary.long_tail,
        notes=summary.notes,
    )
