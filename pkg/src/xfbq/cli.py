"""Command-line front end: build, search, bench, error-report.

Flag values win over ``XFBQ_*`` environment variables, which win over
built-in defaults.  Exit codes: 0 success, 2 usage, 3 missing/unreadable
files, 4 malformed index or data files, 5 invalid arguments or shape
mismatches, 1 anything else.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import __version__
from .bench import bench_inner_product, bench_search
from .dataio import read_fvecs, read_ivecs
from .errors import (
    DataFormatError,
    DimensionMismatchError,
    IndexFormatError,
    InvalidInputError,
)
from .index import (
    DEFAULT_DOC_BITS,
    DEFAULT_QUERY_BITS,
    DEFAULT_SCALE_PERCENTILE,
    QuantParams,
    build_index,
    estimate_scale,
    load_index,
    save_index,
)
from .oracle import quantization_error_report
from .search import SearchRequest, k_select, suggest_extra_distance

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_INVALID = 5

DEFAULT_EXTRA_FRACTION = 0.05

SEARCH_CSV_SCHEMA = "# schema: xfbq-search-csv-v1"


def _env(name: str, fallback, cast):
    raw = os.environ.get(f"XFBQ_{name}")
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError as exc:
        raise InvalidInputError(f"bad value for XFBQ_{name}: {raw!r}") from exc


def _resolve(flag_value, env_name: str, default, cast):
    if flag_value is not None:
        return flag_value
    return _env(env_name, default, cast)


def _add_build(sub):
    p = sub.add_parser("build", help="quantize an fvecs file into an index")
    p.add_argument("--input", required=True, help="document vectors (fvecs)")
    p.add_argument("--output", required=True, help="index file to write")
    p.add_argument("--doc-bits", type=int, default=None)
    p.add_argument("--query-bits", type=int, default=None)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--scale", type=float, default=None,
                       help="explicit scale factor (bypasses estimation)")
    group.add_argument("--scale-percentile", type=float, default=None,
                       help="estimate scale from this |component| percentile")
    p.add_argument("--normalize", action="store_true",
                   help="L2-normalize rows before quantizing")
    p.add_argument("--drop-originals", action="store_true",
                   help="store only packed codes (refine becomes approximate)")


def _add_search(sub):
    p = sub.add_parser("search", help="run top-K queries against an index")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True, help="query vectors (fvecs)")
    p.add_argument("--k", type=int, default=10)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--extra-distance", type=int, default=None)
    group.add_argument("--extra-fraction", type=float, default=None)
    p.add_argument("--output", default=None, help="CSV path (default: stdout)")


def _add_bench(sub):
    p = sub.add_parser("bench", help="QPS/precision sweep plus kernel microbench")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--ground-truth", default=None, help="exact neighbor ids (ivecs)")
    p.add_argument("--oracle", action="store_true",
                   help="compute ground truth by brute force")
    p.add_argument("--k", default="1,10,100", help="comma-separated K levels")
    p.add_argument("--extra", default=None, help="comma-separated extra distances")
    p.add_argument("--extra-fractions", default=None,
                   help="comma-separated fractions of the distance range")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--csv", default=None, help="write the sweep as CSV")
    p.add_argument("--kernel", action="store_true",
                   help="also run the isolated kernel microbenchmark")


def _add_error_report(sub):
    p = sub.add_parser("error-report", help="quantization length/angle error report")
    p.add_argument("--input", required=True, help="vectors to analyze (fvecs)")
    p.add_argument("--doc-bits", type=int, default=None)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--scale", type=float, default=None)
    group.add_argument("--scale-percentile", type=float, default=None)
    p.add_argument("--sample", type=int, default=None, help="rows to sample")


def _cmd_build(args) -> int:
    doc_bits = _resolve(args.doc_bits, "DOC_BITS", DEFAULT_DOC_BITS, int)
    query_bits = _resolve(args.query_bits, "QUERY_BITS", DEFAULT_QUERY_BITS, int)
    dataset = read_fvecs(args.input)
    if dataset.n == 0:
        raise InvalidInputError(f"{args.input}: no vectors to index")
    if args.scale is not None:
        scale = args.scale
    else:
        percentile = _resolve(
            args.scale_percentile, "SCALE_PERCENTILE", DEFAULT_SCALE_PERCENTILE, float
        )
        scale = estimate_scale(dataset.data, percentile)
    params = QuantParams(dim=dataset.dim, scale=scale,
                         doc_bits=doc_bits, query_bits=query_bits)
    t0 = time.perf_counter()
    index = build_index(dataset.data, params, normalize=args.normalize,
                        keep_originals=not args.drop_originals)
    build_seconds = time.perf_counter() - t0
    save_index(index, args.output)
    written = os.path.getsize(args.output)
    print(f"n={index.n}")
    print(f"dim={index.dim}")
    print(f"doc_bits={doc_bits} query_bits={query_bits}")
    print(f"scale={scale:.6f}")
    print(f"bytes_written={written}")
    print(f"build_seconds={build_seconds:.3f}")
    return EXIT_OK


def _resolve_extra(index, extra_distance, extra_fraction) -> int:
    if extra_distance is not None:
        if extra_distance < 0:
            raise InvalidInputError("extra distance must be >= 0")
        return extra_distance
    fraction = extra_fraction
    if fraction is None:
        fraction = _env("EXTRA_FRACTION", DEFAULT_EXTRA_FRACTION, float)
    return suggest_extra_distance(index, fraction)


def _cmd_search(args) -> int:
    index = load_index(args.index)
    queries = read_fvecs(args.queries)
    if queries.dim != index.dim:
        raise DimensionMismatchError(
            f"queries have dim {queries.dim}, index has {index.dim}"
        )
    extra = _resolve_extra(index, args.extra_distance, args.extra_fraction)

    lines = [SEARCH_CSV_SCHEMA, "query_id,rank,doc_id,similarity"]
    any_approximate = False
    for qid, row in enumerate(queries.data):
        result = k_select(index, SearchRequest(query=row, k=args.k, extra_distance=extra))
        any_approximate = any_approximate or result.approximate
        for rank, (doc_id, sim) in enumerate(result.hits, start=1):
            lines.append(f"{qid},{rank},{doc_id},{sim:.9g}")
    if any_approximate:
        print("note: index has no originals; similarities are quantized, not exact",
              file=sys.stderr)
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
        print(f"wrote {args.output} ({len(lines) - 2} rows)")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise InvalidInputError(f"bad {what} list: {text!r}") from exc


def _cmd_bench(args) -> int:
    index = load_index(args.index)
    queries = read_fvecs(args.queries)
    if queries.n == 0:
        raise InvalidInputError(f"{args.queries}: zero-length query set")
    if queries.dim != index.dim:
        raise DimensionMismatchError(
            f"queries have dim {queries.dim}, index has {index.dim}"
        )
    k_list = _parse_int_list(args.k, "k")
    if args.extra is not None:
        extra_list = _parse_int_list(args.extra, "extra")
    elif args.extra_fractions is not None:
        try:
            fractions = [float(t) for t in args.extra_fractions.split(",") if t.strip()]
        except ValueError as exc:
            raise InvalidInputError(f"bad fractions: {args.extra_fractions!r}") from exc
        extra_list = [suggest_extra_distance(index, f) for f in fractions]
    else:
        extra_list = [suggest_extra_distance(index, DEFAULT_EXTRA_FRACTION)]

    ground_truth = None
    if args.ground_truth is not None:
        ground_truth = read_ivecs(args.ground_truth)
    elif not args.oracle:
        raise InvalidInputError("provide --ground-truth or pass --oracle")

    report = bench_search(index, queries.data, k_list, extra_list,
                          ground_truth=ground_truth, threads=args.threads)

    header = f"{'extra':>8} {'k':>6} {'precision':>10} {'qps':>10}"
    if report.threads > 1:
        header += f" {'qps@' + str(report.threads) + 't':>10}"
    print(header)
    for p in report.points:
        row = f"{p.extra_distance:>8} {p.k:>6} {p.precision:>10.4f} {p.qps:>10.1f}"
        if report.threads > 1 and p.qps_threads is not None:
            row += f" {p.qps_threads:>10.1f}"
        print(row)
    print(f"baseline_brute_force_qps={report.baseline_qps:.1f}")
    print(f"speedup_vs_baseline={report.speedup_vs_baseline:.2f}")
    for stage, sec in report.stage_seconds.items():
        print(f"stage_{stage}_seconds={sec:.6f}")
    for k, extra in report.monotonic_violations:
        print(f"warning: precision@k={k} dipped at extra={extra}", file=sys.stderr)

    if args.kernel:
        quant, flt, details = bench_inner_product(
            n=min(index.n, 100_000) or 1, dim=index.dim,
            doc_bits=index.params.doc_bits, query_bits=index.params.query_bits,
        )
        print(f"kernel_quantized_seconds={quant.seconds:.6f}")
        print(f"kernel_float_seconds={flt.seconds:.6f}")
        print(f"kernel_speedup={details['speedup']:.2f}")
        print(f"kernel_instruction_ratio={details['instruction_ratio']:.4f}")
        print(f"kernel_memory_fraction={details['memory_fraction']:.4f}")

    if args.csv:
        with open(args.csv, "w") as f:
            f.write(report.to_csv())
        print(f"wrote {args.csv}")
    return EXIT_OK


def _cmd_error_report(args) -> int:
    doc_bits = _resolve(args.doc_bits, "DOC_BITS", DEFAULT_DOC_BITS, int)
    dataset = read_fvecs(args.input)
    if dataset.n == 0:
        raise InvalidInputError(f"{args.input}: no vectors")
    if args.scale is not None:
        scale = args.scale
    else:
        percentile = _resolve(
            args.scale_percentile, "SCALE_PERCENTILE", DEFAULT_SCALE_PERCENTILE, float
        )
        scale = estimate_scale(dataset.data, percentile)
    sample = args.sample
    if sample is not None and sample > dataset.n:
        print(f"warning: sample {sample} exceeds {dataset.n} rows; clamping",
              file=sys.stderr)
        sample = dataset.n
    params = QuantParams(dim=dataset.dim, scale=scale, doc_bits=doc_bits)
    report = quantization_error_report(dataset.data, params, sample=sample)
    sys.stdout.write(f"scale={scale:.6f}\n" + report.to_kv_text())
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xfbq",
        description="Exhaustive top-K cosine search over XOR-friendly binary codes",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_build(sub)
    _add_search(sub)
    _add_bench(sub)
    _add_error_report(sub)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    handlers = {
        "build": _cmd_build,
        "search": _cmd_search,
        "bench": _cmd_bench,
        "error-report": _cmd_error_report,
    }
    try:
        return handlers[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (IndexFormatError, DataFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
