"""``faceaudit`` command-line entry point.

Exit codes: 0 success, 1 invalid arguments or failed precondition,
2 data-integrity error in an input set, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, leakage, pipeline
from .benchrel import read_matrix
from .embset import ingest, load_set, save_set, validate
from .errors import AuditError, IngestError, ReportError
from .pairsample import sample_mated, sample_nonmated, write_pairs_csv
from .report import FORMATS, emit, report_from_dict
from .rng import SEED_MAX
from .simkern import cross_topk, default_workers
from .verify import DEFAULT_FOLDS, read_group_dir, read_pairlist

log = logging.getLogger("faceaudit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {value}")
    return value


def _similarity(text: str) -> float:
    value = float(text)
    if not -1.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [-1, 1], got {value}")
    return value


def _formats(text: str) -> tuple[str, ...]:
    items = tuple(sorted({t.strip() for t in text.split(",") if t.strip()}))
    bad = [t for t in items if t not in FORMATS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"formats must be a comma list from {','.join(FORMATS)}")
    return items


def _out_parts(path: str) -> tuple[Path, str]:
    p = Path(path)
    return p.parent, p.name[:-5] if p.name.endswith(".json") else p.name


def _add_common(p, *, seed=False, workers=True, out=True, formats=True):
    if seed:
        p.add_argument("--seed", type=_seed, default=0,
                       help="64-bit seed; fixes every random choice (default: 0)")
    if workers:
        p.add_argument("--workers", type=_positive_int, default=None,
                       help="worker threads (default: $FACEAUDIT_WORKERS, else all CPUs); "
                            "results do not depend on it")
    if out:
        p.add_argument("--out", required=True, help="output report path (REPORT.json)")
    if formats:
        p.add_argument("--formats", type=_formats, default=("csv", "json"),
                       help="comma list of json,csv,svg (default: json,csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="faceaudit", description="Audit face-embedding datasets.")
    parser.add_argument("--version", action="version", version=f"faceaudit {__version__}")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate and normalize an EMBS matrix + manifest into a set")
    p.add_argument("--matrix", required=True, help="EMBS binary file")
    p.add_argument("--manifest", required=True, help="JSON manifest, one object per row")
    p.add_argument("--out", required=True, help="output set directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("pairs", help="sample mated or non-mated comparison pairs")
    p.add_argument("--set", required=True)
    p.add_argument("--kind", required=True, choices=("mated", "nonmated"))
    p.add_argument("-n", type=_positive_int, default=pipeline.DEFAULT_N,
                   help="pairs to draw (default: 1000000, the one-million-comparison protocol)")
    p.add_argument("--per-identity", action="store_true",
                   help="mated: draw identity uniformly, then a pair (default: uniform over pairs)")
    p.add_argument("--out", required=True, help="output CSV")
    _add_common(p, seed=True, workers=False, out=False, formats=False)
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("dist", help="mated/non-mated distributions and biometric metrics")
    p.add_argument("--set", required=True)
    p.add_argument("-n", type=_positive_int, default=pipeline.DEFAULT_N,
                   help="comparisons per kind (default: 1000000, the one-million-comparison protocol)")
    p.add_argument("--per-identity", action="store_true")
    p.add_argument("--bins", type=_positive_int, default=pipeline.DEFAULT_BINS,
                   help="histogram bins over [-1, 1] (default: 100)")
    _add_common(p, seed=True)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("leakage", help="closest-real-sample audit of a synthetic set")
    _add_leakage_args(p, required=True)
    p.add_argument("--bins", type=_positive_int, default=pipeline.DEFAULT_BINS)
    _add_common(p)
    p.set_defaults(func=cmd_leakage)

    p = sub.add_parser("topk", help="exact cross-set top-K search")
    p.add_argument("--query", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("-k", type=_positive_int, default=leakage.DEFAULT_TOPK, help="matches per query (default: 5)")
    _add_common(p, formats=False)
    p.set_defaults(func=cmd_topk)

    p = sub.add_parser("verify", help="k-fold pair-list verification accuracy")
    p.add_argument("--set", required=True)
    p.add_argument("--pairs", required=True, help="CSV: sample_id_a,sample_id_b,label")
    _add_fold_args(p)
    _add_common(p, formats=False)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bias", help="per-demographic-group verification accuracy")
    p.add_argument("--set", required=True)
    p.add_argument("--groups", required=True, help="directory of <group>.csv pair lists")
    _add_fold_args(p)
    _add_common(p, formats=False)
    p.set_defaults(func=cmd_bias)

    p = sub.add_parser("bench-assess", help="correlate a synthetic benchmark with real ones")
    p.add_argument("--matrix", required=True, help="CSV: model,benchmark,accuracy")
    p.add_argument("--synthetic", required=True, help="synthetic benchmark name")
    _add_common(p, workers=False, formats=False)
    p.set_defaults(func=cmd_bench_assess)

    p = sub.add_parser("consistency", help="re-run verification on seeded identity subsets")
    p.add_argument("--set", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--segments", type=_positive_int, default=10, help="number of segments (default: 10)")
    p.add_argument("--fraction", type=_fraction, default=0.5,
                   help="identity fraction kept per segment (default: 0.5)")
    p.add_argument("-k", type=_positive_int, default=DEFAULT_FOLDS,
                   help="folds (default: 10, the LFW-style protocol)")
    _add_common(p, seed=True, formats=False)
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("audit", help="run every applicable section and emit one report")
    p.add_argument("--synthetic", required=True)
    p.add_argument("--reference", help="real reference set for the leakage section")
    p.add_argument("--pairs", help="pair list for the verification section")
    p.add_argument("--groups", help="group pair-list directory for the bias section")
    p.add_argument("--matrix", help="accuracy matrix CSV for the reliability section")
    p.add_argument("--synthetic-benchmark", help="benchmark column to assess in --matrix")
    p.add_argument("-n", type=_positive_int, default=pipeline.DEFAULT_N,
                   help="comparisons per kind (default: 1000000, the one-million-comparison protocol)")
    p.add_argument("--per-identity", action="store_true")
    p.add_argument("--bins", type=_positive_int, default=pipeline.DEFAULT_BINS)
    _add_leakage_args(p, required=False)
    _add_fold_args(p)
    p.add_argument("--out-dir", required=True)
    _add_common(p, seed=True, out=False)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("report", help="re-emit a saved JSON report in other formats")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--stem", default="report")
    p.add_argument("--formats", type=_formats, default=FORMATS)
    p.set_defaults(func=cmd_report)
    return parser


def _add_leakage_args(p, required: bool):
    if required:
        p.add_argument("--synthetic", required=True)
        p.add_argument("--reference", required=True)
    p.add_argument("--mode", choices=leakage.MODES, default=leakage.PER_SAMPLE,
                   help="closest-sample unit (default: per-sample)")
    p.add_argument("--topk", type=_positive_int, default=leakage.DEFAULT_TOPK,
                   help="global most-similar pairs to list (default: 5)")
    p.add_argument("--threshold", type=_similarity, default=leakage.DEFAULT_THRESHOLD,
                   help="tail threshold; 0.4 is the typical upper bound of the closest-sample "
                        "mode observed on public synthetic sets (default: 0.4)")


def _add_fold_args(p):
    p.add_argument("-k", type=_positive_int, default=DEFAULT_FOLDS,
                   help="cross-validation folds (default: 10, the LFW-style protocol)")
    p.add_argument("--shuffle-folds", type=_seed, default=None, metavar="SEED",
                   help="shuffle pairs into folds with this seed (default: off, contiguous folds)")


def _emit_to(report, out: str, formats=("json",)):
    out_dir, stem = _out_parts(out)
    for path in emit(report, formats, out_dir, stem):
        log.info("wrote %s", path)


def cmd_ingest(args):
    eset = ingest(args.matrix, args.manifest, name=Path(args.out).name.removesuffix(".embset"))
    save_set(eset, args.out)
    v = validate(eset)
    print(json.dumps({"out": args.out, "n_samples": v.n_samples, "n_identities": v.n_identities,
                      "dim": eset.dim}, sort_keys=True))


def cmd_pairs(args):
    eset = load_set(args.set)
    if args.kind == "mated":
        sample = sample_mated(eset, args.n, args.seed, per_identity=args.per_identity)
    else:
        sample = sample_nonmated(eset, args.n, args.seed)
    write_pairs_csv(args.out, eset, sample)


def cmd_dist(args):
    report = pipeline.new_report()
    eset = pipeline.add_set_input(report, "set", args.set)
    report.sections["dataset"] = pipeline.dataset_section(eset)
    pipeline.biometric(report, eset, args.n, args.seed, args.per_identity, args.bins, args.workers)
    _emit_to(report, args.out, args.formats)


def cmd_leakage(args):
    report = pipeline.new_report()
    syn = pipeline.add_set_input(report, "synthetic", args.synthetic)
    ref = pipeline.add_set_input(report, "reference", args.reference)
    pipeline.leakage_scan(report, syn, ref, args.mode, args.topk, args.threshold, args.bins, args.workers)
    _emit_to(report, args.out, args.formats)


def cmd_topk(args):
    report = pipeline.new_report()
    q = pipeline.add_set_input(report, "query", args.query)
    t = pipeline.add_set_input(report, "target", args.target)
    results = cross_topk(q, t, args.k, workers=args.workers)
    report.sections["topk"] = {
        "k": args.k,
        "results": [
            {
                "query_sample_id": q.sample_ids[r.query_index],
                "matches": [{"target_sample_id": t.sample_ids[m.target_index], "score": m.score}
                            for m in r.matches],
            }
            for r in results
        ],
    }
    _emit_to(report, args.out)


def _load_pairs_with_k(report, label, path, k):
    pipeline.add_file_input(report, label, path)
    return read_pairlist(path, fold_count=k)


def cmd_verify(args):
    report = pipeline.new_report()
    eset = pipeline.add_set_input(report, "set", args.set)
    pairs = _load_pairs_with_k(report, "pairs", args.pairs, args.k)
    pipeline.verification(report, eset, pairs, args.shuffle_folds, args.workers)
    _emit_to(report, args.out)


def _load_groups(report, directory, k):
    groups = read_group_dir(directory, fold_count=k)
    for g in groups:
        pipeline.add_file_input(report, f"group:{g}", Path(directory) / f"{g}.csv")
    return groups


def cmd_bias(args):
    report = pipeline.new_report()
    eset = pipeline.add_set_input(report, "set", args.set)
    groups = _load_groups(report, args.groups, args.k)
    pipeline.bias(report, eset, groups, args.shuffle_folds, args.workers)
    _emit_to(report, args.out)


def cmd_bench_assess(args):
    report = pipeline.new_report()
    pipeline.add_file_input(report, "matrix", args.matrix)
    pipeline.reliability(report, read_matrix(args.matrix), args.synthetic)
    _emit_to(report, args.out)


def cmd_consistency(args):
    report = pipeline.new_report()
    eset = pipeline.add_set_input(report, "set", args.set)
    pairs = _load_pairs_with_k(report, "pairs", args.pairs, args.k)
    pipeline.consistency(report, eset, pairs, args.segments, args.fraction, args.seed, args.workers)
    _emit_to(report, args.out)


def cmd_audit(args):
    if (args.matrix is None) != (args.synthetic_benchmark is None):
        raise UsageError("faceaudit audit: error: --matrix and --synthetic-benchmark go together")
    report = pipeline.new_report()
    syn = pipeline.add_set_input(report, "synthetic", args.synthetic)
    report.sections["dataset"] = pipeline.dataset_section(syn)
    pipeline.biometric(report, syn, args.n, args.seed, args.per_identity, args.bins, args.workers)
    if args.reference:
        ref = pipeline.add_set_input(report, "reference", args.reference)
        pipeline.leakage_scan(report, syn, ref, args.mode, args.topk, args.threshold, args.bins, args.workers)
    if args.pairs:
        pairs = _load_pairs_with_k(report, "pairs", args.pairs, args.k)
        pipeline.verification(report, syn, pairs, args.shuffle_folds, args.workers)
    if args.groups:
        groups = _load_groups(report, args.groups, args.k)
        pipeline.bias(report, syn, groups, args.shuffle_folds, args.workers)
    if args.matrix:
        pipeline.add_file_input(report, "matrix", args.matrix)
        pipeline.reliability(report, read_matrix(args.matrix), args.synthetic_benchmark)
    for path in emit(report, args.formats, args.out_dir, "report"):
        log.info("wrote %s", path)


def cmd_report(args):
    with open(args.input, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ReportError("bad-json", f"{args.input}: {exc}") from None
    for path in emit(report_from_dict(data), args.formats, args.out_dir, args.stem):
        log.info("wrote %s", path)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    logging.basicConfig(stream=sys.stderr, format="faceaudit: %(message)s", force=True,
                        level=logging.WARNING if args.quiet else logging.INFO)
    try:
        if getattr(args, "workers", None) is None and hasattr(args, "workers"):
            args.workers = default_workers()
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except IngestError as exc:
        print(f"faceaudit: data integrity error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AuditError, ReportError) as exc:
        print(f"faceaudit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"faceaudit: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())

