"""Exact cosine-similarity kernels: pairwise scores and blocked top-K search.

Vectors are stored as binary32 and promoted to binary64 before every product.
Determinism across worker counts and chunk sizes rests on two rules:

* every GEMM call has the same padded shape (``QUERY_BLOCK`` x ``TARGET_BLOCK``)
  and runs single-threaded inside BLAS, so each score depends only on its two
  vectors, never on where they sit in a block;
* per-chunk candidates are merged in chunk order under the total order
  (score desc, target index asc), whose top-K is unique.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from threadpoolctl import threadpool_limits

from .embset import EmbeddingSet
from .errors import AuditError

CHUNK_ROWS = 4096
# Small or ragged GEMM shapes take BLAS edge paths whose rounding differs, so
# every product is a fixed, padded tile regardless of the chunk size.
QUERY_BLOCK = 256
TARGET_BLOCK = 1024
MIN_CHUNK_ROWS = 256
PAIR_BLOCK = 16384


@dataclass(frozen=True)
class Match:
    target_index: int
    score: float


@dataclass(frozen=True)
class TopKResult:
    query_index: int
    matches: tuple[Match, ...]


def default_workers() -> int:
    env = os.environ.get("FACEAUDIT_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise AuditError("bad-workers", f"FACEAUDIT_WORKERS must be an integer, got {env!r}") from None
        if value < 1:
            raise AuditError("bad-workers", "FACEAUDIT_WORKERS must be >= 1")
        return value
    return os.cpu_count() or 1


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        return default_workers()
    if workers < 1:
        raise AuditError("bad-workers", f"workers must be >= 1, got {workers}")
    return int(workers)


def _ordered_map(fn, items, workers: int):
    """Map ``fn`` over ``items``; results come back in item order."""
    with threadpool_limits(limits=1, user_api="blas"):
        if workers == 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))


def _row_dots(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Row-wise reduction: each row's summation order is independent of row count.
    return (a.astype(np.float64) * b.astype(np.float64)).sum(axis=1)


def cosine(u, v) -> float:
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape or u.ndim != 1:
        raise AuditError("dim-mismatch", f"vector shapes {u.shape} and {v.shape} differ")
    score = float(_row_dots(u[None, :], v[None, :])[0])
    return min(1.0, max(-1.0, score))


def pair_scores(eset: EmbeddingSet, pairs, workers: int | None = None) -> np.ndarray:
    """Cosine score per (i, j) pair, in input order, clamped to [-1, 1]."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    n = eset.n_samples
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
        bad = pairs[((pairs < 0) | (pairs >= n)).any(axis=1)][0]
        raise AuditError("index-out-of-range", f"pair {tuple(bad.tolist())} outside [0, {n})")
    workers = _resolve_workers(workers)
    vecs = eset.vectors
    starts = range(0, len(pairs), PAIR_BLOCK)

    def block(start):
        p = pairs[start:start + PAIR_BLOCK]
        return _row_dots(vecs[p[:, 0]], vecs[p[:, 1]])

    parts = _ordered_map(block, starts, workers)
    out = np.concatenate(parts) if parts else np.zeros(0, dtype=np.float64)
    return np.clip(out, -1.0, 1.0)


def _select_topk(scores: np.ndarray, k: int, offset: int):
    """Top-k (score desc, index asc) of each row of a score block."""
    rows, cols = scores.shape
    if k == 1:
        idx = scores.argmax(axis=1)  # first maximum = lowest index
        return (idx + offset)[:, None], scores[np.arange(rows), idx][:, None]
    if k >= cols:
        idx = np.broadcast_to(np.arange(cols), (rows, cols))
        return idx + offset, scores.copy()
    kth = np.partition(scores, cols - k, axis=1)[:, cols - k]
    mask = scores >= kth[:, None]
    counts = mask.sum(axis=1)
    out_idx = np.empty((rows, k), dtype=np.int64)
    exact = counts == k
    if exact.any():
        out_idx[exact] = np.nonzero(mask[exact])[1].reshape(-1, k)
    for r in np.flatnonzero(~exact):
        # Ties straddle the k-th value; keep the lowest indices among them.
        cand = np.flatnonzero(mask[r])
        order = np.lexsort((cand, -scores[r, cand]))[:k]
        out_idx[r] = cand[order]
    return out_idx + offset, np.take_along_axis(scores, out_idx, axis=1)


def _merge(run_idx, run_score, new_idx, new_score, k):
    idx = np.concatenate([run_idx, new_idx], axis=1)
    score = np.concatenate([run_score, new_score], axis=1)
    order = np.lexsort((idx, -score), axis=1)[:, :k]
    return np.take_along_axis(idx, order, axis=1), np.take_along_axis(score, order, axis=1)


def topk_arrays(
    query: np.ndarray,
    target: np.ndarray,
    k: int,
    workers: int | None = None,
    chunk_rows: int = CHUNK_ROWS,
    progress: Callable[[int, int], None] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact top-k over raw unit-vector matrices.

    Returns ``(indices, scores)``, both shaped (n_query, min(k, n_target)),
    rows sorted by (score desc, index asc).
    """
    if query.ndim != 2 or target.ndim != 2 or query.shape[1] != target.shape[1]:
        raise AuditError("dim-mismatch", f"query dim {query.shape[-1]} != target dim {target.shape[-1]}")
    if k < 1:
        raise AuditError("bad-k", f"k must be >= 1, got {k}")
    workers = _resolve_workers(workers)
    nq, nt = query.shape[0], target.shape[0]
    kk = min(k, nt)
    if nq == 0 or nt == 0:
        return np.zeros((nq, kk), dtype=np.int64), np.zeros((nq, kk), dtype=np.float64)

    chunk = max(int(chunk_rows), MIN_CHUNK_ROWS)
    dim = query.shape[1]
    n_qblocks = -(-nq // QUERY_BLOCK)
    qpad = np.zeros((n_qblocks * QUERY_BLOCK, dim), dtype=np.float64)
    qpad[:nq] = query
    starts = list(range(0, nt, chunk))
    done = [0]

    def scan_chunk(start):
        stop = min(start + chunk, nt)
        width = stop - start
        n_tblocks = -(-width // TARGET_BLOCK)
        tblock = np.zeros((n_tblocks * TARGET_BLOCK, dim), dtype=np.float64)
        tblock[:width] = target[start:stop]
        kc = min(kk, width)
        s = np.empty((QUERY_BLOCK, n_tblocks * TARGET_BLOCK), dtype=np.float64)
        idx = np.empty((nq, kc), dtype=np.int64)
        sc = np.empty((nq, kc), dtype=np.float64)
        for b in range(n_qblocks):
            lo = b * QUERY_BLOCK
            hi = min(lo + QUERY_BLOCK, nq)
            q = qpad[lo:lo + QUERY_BLOCK]
            for t in range(n_tblocks):
                cols = slice(t * TARGET_BLOCK, (t + 1) * TARGET_BLOCK)
                np.matmul(q, tblock[cols].T, out=s[:, cols])
            block = s[: hi - lo, :width]
            np.clip(block, -1.0, 1.0, out=block)
            idx[lo:hi], sc[lo:hi] = _select_topk(block, kc, start)
        done[0] += 1
        if progress is not None:
            progress(done[0], len(starts))
        return idx, sc

    parts = _ordered_map(scan_chunk, starts, workers)
    run_idx = np.zeros((nq, 0), dtype=np.int64)
    run_score = np.zeros((nq, 0), dtype=np.float64)
    for idx, sc in parts:
        run_idx, run_score = _merge(run_idx, run_score, idx, sc, kk)
    return run_idx, run_score


def cross_topk(
    query: EmbeddingSet,
    target: EmbeddingSet,
    k: int,
    workers: int | None = None,
    chunk_rows: int = CHUNK_ROWS,
) -> list[TopKResult]:
    if query.dim != target.dim:
        raise AuditError("dim-mismatch", f"query dim {query.dim} != target dim {target.dim}")
    idx, sc = topk_arrays(query.vectors, target.vectors, k, workers=workers, chunk_rows=chunk_rows)
    return [
        TopKResult(q, tuple(Match(int(t), float(s)) for t, s in zip(idx[q], sc[q])))
        for q in range(idx.shape[0])
    ]
