"""Benchmark reliability: how well a synthetic benchmark tracks real ones.

A model x benchmark accuracy matrix is correlated column-against-column
(Pearson, pairwise-complete over models), and a verification protocol is
re-run on seeded identity subsets to measure its spread.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embset import EmbeddingSet, subset
from .errors import AuditError
from .rng import derive_seed
from .simkern import pair_scores
from .verify import PairList, VerificationResult, kfold_from_scores, resolve_pairs

MIN_MODELS = 3
MIN_PAIRS_PER_FOLD = 10


@dataclass(frozen=True, eq=False)
class AccuracyMatrix:
    models: tuple[str, ...]
    benchmarks: tuple[str, ...]
    accuracy: np.ndarray  # (models, benchmarks); NaN marks a missing entry

    def __post_init__(self):
        acc = np.array(self.accuracy, dtype=np.float64)
        if acc.shape != (len(self.models), len(self.benchmarks)):
            raise AuditError("bad-shape", f"accuracy shape {acc.shape} does not match labels")
        present = acc[~np.isnan(acc)]
        if ((present < 0) | (present > 1)).any() or not np.isfinite(present).all():
            raise AuditError("bad-accuracy", "accuracies must lie in [0, 1]")
        acc.flags.writeable = False
        object.__setattr__(self, "accuracy", acc)
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "benchmarks", tuple(self.benchmarks))

    def column(self, benchmark: str) -> np.ndarray:
        try:
            return self.accuracy[:, self.benchmarks.index(benchmark)]
        except ValueError:
            raise AuditError("column-missing", f"benchmark {benchmark!r} not in matrix") from None


@dataclass(frozen=True)
class PairingResult:
    benchmark: str
    pcc: float | None
    n_models: int
    reason: str | None = None


@dataclass(frozen=True)
class ReliabilityReport:
    synthetic_benchmark: str
    pairings: tuple[PairingResult, ...]


@dataclass(frozen=True)
class ConsistencyReport:
    per_segment: tuple[VerificationResult, ...]
    segment_pair_counts: tuple[int, ...]
    segment_seeds: tuple[int, ...]
    mean: float
    std: float


def read_matrix(path) -> AccuracyMatrix:
    models: dict[str, None] = {}
    benches: dict[str, None] = {}
    cells: dict[tuple[str, str], float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["model", "benchmark", "accuracy"]:
            raise AuditError("bad-header", f"{path}: header must be model,benchmark,accuracy")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise AuditError("bad-row", f"{path}:{lineno}: expected 3 columns")
            model, bench, value = (c.strip() for c in row)
            if (model, bench) in cells:
                raise AuditError("duplicate-entry", f"{path}:{lineno}: {model}/{bench} given twice")
            try:
                cells[model, bench] = float(value)
            except ValueError:
                raise AuditError("bad-accuracy", f"{path}:{lineno}: not a number: {value!r}") from None
            models.setdefault(model)
            benches.setdefault(bench)
    m, b = list(models), list(benches)
    acc = np.full((len(m), len(b)), np.nan)
    for (model, bench), v in cells.items():
        acc[m.index(model), b.index(bench)] = v
    return AccuracyMatrix(tuple(m), tuple(b), acc)


def pcc(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson product-moment correlation, two-pass with exact-rounded sums."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if len(x) != len(y):
        raise AuditError("length-mismatch", f"lengths {len(x)} and {len(y)} differ")
    n = len(x)
    if n < MIN_MODELS:
        raise AuditError("too-few-points", f"need at least {MIN_MODELS} points, got {n}")
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise AuditError("zero-variance", "a column has zero variance")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def assess_benchmark(matrix: AccuracyMatrix, synthetic_benchmark: str) -> ReliabilityReport:
    syn = matrix.column(synthetic_benchmark)
    if np.count_nonzero(~np.isnan(syn)) < MIN_MODELS:
        raise AuditError(
            "insufficient-overlap",
            f"synthetic benchmark {synthetic_benchmark!r} has fewer than {MIN_MODELS} model entries",
        )
    # Canonical model order makes the report independent of input row order.
    order = sorted(range(len(matrix.models)), key=lambda i: matrix.models[i])
    out = []
    for bench in sorted(matrix.benchmarks):
        if bench == synthetic_benchmark:
            continue
        real = matrix.column(bench)
        both = [i for i in order if not (np.isnan(syn[i]) or np.isnan(real[i]))]
        if len(both) < MIN_MODELS:
            out.append(PairingResult(bench, None, len(both), "insufficient-overlap"))
            continue
        try:
            r = pcc([syn[i] for i in both], [real[i] for i in both])
        except AuditError as exc:
            out.append(PairingResult(bench, None, len(both), exc.kind))
            continue
        out.append(PairingResult(bench, r, len(both)))
    return ReliabilityReport(synthetic_benchmark, tuple(out))


def consistency(
    eset: EmbeddingSet,
    pairs: PairList,
    segments: int,
    fraction: float,
    seed: int,
    workers: int | None = None,
) -> ConsistencyReport:
    """Re-run k-fold verification on ``segments`` seeded identity subsets.

    Each segment keeps the pairs whose two samples both survive, in file
    order, truncated to a multiple of the fold count.
    """
    if segments < 2:
        raise AuditError("bad-segments", f"segments must be >= 2, got {segments}")
    k = pairs.fold_count
    idx = resolve_pairs(eset, pairs)
    scores = pair_scores(eset, idx, workers=workers)
    mated = pairs.is_mated
    codes = eset.identity_codes
    code_of = {ident: c for c, ident in enumerate(eset.identities)}
    results, counts, seeds = [], [], []
    for s in range(segments):
        seg_seed = derive_seed(seed, s)
        sub = subset(eset, fraction, seg_seed)
        kept_ids = np.zeros(len(eset.identities), dtype=bool)
        kept_ids[[code_of[ident] for ident in sub.identities]] = True
        keep = np.flatnonzero(kept_ids[codes[idx[:, 0]]] & kept_ids[codes[idx[:, 1]]])
        usable = (keep.size // k) * k
        if usable < MIN_PAIRS_PER_FOLD * k:
            raise AuditError(
                "segment-too-small",
                f"segment {s} keeps {keep.size} pairs; need at least {MIN_PAIRS_PER_FOLD * k}",
            )
        keep = keep[:usable]
        results.append(kfold_from_scores(scores[keep], mated[keep], k))
        counts.append(int(usable))
        seeds.append(seg_seed)
    means = [r.mean_accuracy for r in results]
    mean = math.fsum(means) / segments
    std = math.sqrt(math.fsum((m - mean) ** 2 for m in means) / (segments - 1))
    return ConsistencyReport(tuple(results), tuple(counts), tuple(seeds), mean, std)
