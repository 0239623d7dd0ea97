"""End-to-end audit runners that compose the modules into report sections."""

from __future__ import annotations

import logging
from pathlib import Path

from . import benchrel, biomet, leakage, verify
from .embset import MANIFEST_FILE, MATRIX_FILE, EmbeddingSet, load_set, validate
from .errors import AuditError
from .pairsample import sample_mated, sample_nonmated
from .report import AuditReport, report_timestamp, sha256_file, to_jsonable
from .rng import derive_seed
from .simkern import pair_scores

log = logging.getLogger(__name__)

DEFAULT_N = 1_000_000
DEFAULT_BINS = 100
MATED_STREAM, NONMATED_STREAM = 0, 1


def new_report() -> AuditReport:
    return AuditReport(timestamp=report_timestamp())


def add_set_input(report: AuditReport, label: str, directory) -> EmbeddingSet:
    directory = Path(directory)
    eset = load_set(directory)
    report.inputs[label] = {
        "path": str(directory),
        "embeddings_sha256": sha256_file(directory / MATRIX_FILE),
        "manifest_sha256": sha256_file(directory / MANIFEST_FILE),
    }
    return eset


def add_file_input(report: AuditReport, label: str, path) -> None:
    report.inputs[label] = {"path": str(path), "sha256": sha256_file(path)}


def dataset_section(eset: EmbeddingSet) -> dict:
    v = validate(eset)
    return {
        "name": eset.name,
        "dim": eset.dim,
        "n_samples": v.n_samples,
        "n_identities": v.n_identities,
        "samples_per_identity": v.samples_per_identity,
        "defects": len(v.defects),
    }


def biometric(
    report: AuditReport,
    eset: EmbeddingSet,
    n: int = DEFAULT_N,
    seed: int = 0,
    per_identity: bool = False,
    bins: int = DEFAULT_BINS,
    workers: int | None = None,
) -> dict:
    """Sample mated/non-mated pairs, score them and add the biometric section."""
    mated_seed = derive_seed(seed, MATED_STREAM)
    non_seed = derive_seed(seed, NONMATED_STREAM)
    log.info("sampling %d mated and %d non-mated pairs", n, n)
    mated = sample_mated(eset, n, mated_seed, per_identity=per_identity)
    non = sample_nonmated(eset, n, non_seed)
    log.info("scoring %d pairs", 2 * n)
    gen = pair_scores(eset, mated.pairs, workers=workers)
    imp = pair_scores(eset, non.pairs, workers=workers)

    gstats, istats = biomet.score_stats(gen), biomet.score_stats(imp)
    ops = biomet.operating_points(biomet.det_sweep(gen, imp))
    try:
        fdr = biomet.fdr(gstats, istats)
    except AuditError:
        fdr = None
    spike = biomet.duplicate_spike(gen)
    section = {
        "source_set": eset.name,
        "pair_law": "per-identity" if per_identity else "per-pair",
        "genuine": gstats,
        "impostor": istats,
        **to_jsonable(ops),
        "fdr": fdr,
        "duplicate_fraction": spike.fraction,
        "duplicate_flagged": spike.flagged,
    }
    report.sections["biometric"] = to_jsonable(section)
    report.seeds["mated"] = mated_seed
    report.seeds["nonmated"] = non_seed
    report.histograms["biometric"] = {
        "genuine": biomet.histogram(gen, bins=bins),
        "impostor": biomet.histogram(imp, bins=bins),
    }
    return report.sections["biometric"]


def leakage_scan(
    report: AuditReport,
    synthetic: EmbeddingSet,
    reference: EmbeddingSet,
    mode: str = leakage.PER_SAMPLE,
    topk: int = leakage.DEFAULT_TOPK,
    threshold: float = leakage.DEFAULT_THRESHOLD,
    bins: int = DEFAULT_BINS,
    workers: int | None = None,
) -> dict:
    log.info("leakage scan: %d synthetic x %d reference samples", synthetic.n_samples, reference.n_samples)
    lr = leakage.audit(synthetic, reference, mode=mode, topk=topk, threshold=threshold,
                       bins=bins, workers=workers)
    section = to_jsonable(lr)
    del section["histogram"]
    section["reference_set"] = reference.name
    section["source_set"] = synthetic.name
    report.sections["leakage"] = section
    report.histograms["leakage"] = {"maxima": lr.histogram}
    return section


def verification(report, eset, pairs: verify.PairList, shuffle_seed=None, workers=None) -> dict:
    res = verify.kfold_accuracy(eset, pairs, shuffle_seed=shuffle_seed, workers=workers)
    section = to_jsonable(res)
    section["fold_count"] = pairs.fold_count
    section["n_pairs"] = len(pairs)
    report.sections["verification"] = section
    if shuffle_seed is not None:
        report.seeds["shuffle_folds"] = shuffle_seed
    return section


def bias(report, eset, groups, shuffle_seed=None, workers=None) -> dict:
    gr = verify.group_accuracy(eset, groups, shuffle_seed=shuffle_seed, workers=workers)
    section = {
        "per_group": to_jsonable(dict(gr.per_group)),
        "average": to_jsonable(gr.average),
        "average_rounded": gr.average_rounded,
    }
    if len(gr.per_group) >= 2:
        section["gap"] = to_jsonable(verify.max_gap(gr))
    report.sections["bias"] = section
    return section


def reliability(report, matrix: benchrel.AccuracyMatrix, synthetic_benchmark: str) -> dict:
    section = to_jsonable(benchrel.assess_benchmark(matrix, synthetic_benchmark))
    report.sections.setdefault("reliability", {}).update(section)
    return section


def consistency(report, eset, pairs, segments, fraction, seed, workers=None) -> dict:
    cr = benchrel.consistency(eset, pairs, segments, fraction, seed, workers=workers)
    section = to_jsonable(cr)
    section["fraction"] = fraction
    report.sections.setdefault("reliability", {})["consistency"] = section
    report.seeds["consistency"] = seed
    return section
