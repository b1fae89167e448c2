"""Command-line interface: build, query, extract, stats, generate, bench.

Exit codes: 0 ok / found, 1 not found, 2 usage error, 3 data error.
"""

import argparse
import csv
import json
import sys
import time

import numpy as np

from . import instrument
from .datagen import (
    WalkConfig,
    gen_grid_network,
    gen_poisson_digraph,
    gen_walks,
    sample_query_paths,
    walks_for_text_length,
)
from .errors import (
    ConfigurationError,
    IndexFormatError,
    InputFormatError,
    InvalidQueryError,
    TrajfmError,
)
from .index import BaselineFmIndex, SntIndex, load_index
from .labeling import LabelStrategy
from .text import build_trajectory_string, read_trajectories, symbol_name, write_trajectories

EXIT_OK = 0
EXIT_NOT_FOUND = 1
EXIT_USAGE = 2
EXIT_DATA = 3


class _UsageError(Exception):
    pass


# --- output ---------------------------------------------------------------

def _flatten(record, prefix=""):
    out = {}
    for key, value in record.items():
        if isinstance(value, dict):
            out.update(_flatten(value, f"{prefix}{key}."))
        else:
            out[prefix + key] = value
    return out


def _fmt_value(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return " ".join(map(str, v))
    return "" if v is None else str(v)


def emit(records, fmt, out=None):
    """Write a list of flat-or-nested dicts as human text, JSON or CSV."""
    out = out or sys.stdout
    if isinstance(records, dict):
        records = [records]
    if fmt == "json":
        payload = records[0] if len(records) == 1 else records
        json.dump(payload, out, indent=2, sort_keys=True, default=_json_default)
        out.write("\n")
        return
    flat = [_flatten(r) for r in records]
    if fmt == "csv":
        fields = []
        for row in flat:
            fields.extend(k for k in row if k not in fields)
        writer = csv.DictWriter(out, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in flat:
            writer.writerow({k: _fmt_value(v) for k, v in row.items()})
        return
    for i, row in enumerate(flat):
        if i:
            out.write("\n")
        width = max(len(k) for k in row)
        for k, v in row.items():
            out.write(f"{k.ljust(width)}  {_fmt_value(v)}\n")


def _json_default(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


# --- helpers --------------------------------------------------------------

def _parse_path(tokens):
    try:
        return [int(tok) for tok in tokens]
    except ValueError:
        raise _UsageError(f"edge ids must be integers, got {' '.join(tokens)!r}") from None


def _parse_length(text):
    if ":" in text:
        lo, hi = text.split(":", 1)
        return int(lo), int(hi)
    return int(text)


def _int_list(text):
    return [int(x) for x in text.split(",") if x]


def _float_list(text):
    return [float(x) for x in text.split(",") if x]


def _make_strategy(name, seed):
    return LabelStrategy(name, seed if name == "random" else 0)


def build_from_args(trajectories, args):
    """Build an index according to --backend / --strategy / bitvector flags."""
    kind = args.bitvector
    if args.backend == "baseline":
        return BaselineFmIndex.build(trajectories, kind, args.block_size,
                                     args.num_edges, args.debug_oracle)
    return SntIndex.build(trajectories, _make_strategy(args.strategy, args.seed), kind,
                          args.block_size, args.num_edges, args.debug_oracle)


# --- commands -------------------------------------------------------------

def cmd_build(args):
    trajectories = read_trajectories(args.input)
    idx = build_from_args(trajectories, args)
    if args.output:
        idx.save(args.output)
    emit(idx.stats(), args.format)
    return EXIT_OK


def _query_one(idx, path):
    with instrument.counting() as ops:
        t0 = time.perf_counter()
        rng = idx.suffix_range(path)
        elapsed = time.perf_counter() - t0
    if rng is None:
        sp = ep = None
        count = 0
    else:
        sp, ep, count = rng.sp, rng.ep, rng.count
    return {"sp": sp, "ep": ep, "count": count, "micros": elapsed * 1e6,
            "bit_ranks": ops.bit_ranks, "pseudo_ranks": ops.pseudo_ranks}


def cmd_query(args):
    idx = load_index(args.index)
    if args.batch:
        return _query_batch(idx, args)
    if not args.path:
        raise _UsageError("give a path of edge ids or --batch FILE")
    res = _query_one(idx, _parse_path(args.path))
    emit({"sp": res["sp"], "ep": res["ep"], "count": res["count"]}, args.format)
    return EXIT_OK if res["count"] else EXIT_NOT_FOUND


def _query_batch(idx, args):
    rows = []
    with open(args.batch, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                path = [int(tok) for tok in text.split()]
            except ValueError:
                raise InputFormatError(f"non-integer edge id in {text!r}", lineno) from None
            res = _query_one(idx, path)
            res["query"] = lineno
            rows.append(res)
    if not rows:
        raise InputFormatError("batch file has no queries")
    micros = np.array([r["micros"] for r in rows])
    summary = {
        "queries": len(rows),
        "found": sum(1 for r in rows if r["count"]),
        "mean_micros": float(micros.mean()),
        "median_micros": float(np.median(micros)),
        "mean_bit_ranks": float(np.mean([r["bit_ranks"] for r in rows])),
        "mean_pseudo_ranks": float(np.mean([r["pseudo_ranks"] for r in rows])),
    }
    if args.per_query:
        cols = ["query", "sp", "ep", "count", "micros", "bit_ranks", "pseudo_ranks"]
        emit([{k: r[k] for k in cols} for r in rows], args.format)
    else:
        emit(summary, args.format)
    return EXIT_OK if summary["found"] else EXIT_NOT_FOUND


def cmd_extract(args):
    idx = load_index(args.index)
    if args.full:
        j, length = idx.locate_text_start(), idx.n
    else:
        if args.row is None or args.length is None:
            raise _UsageError("extract needs --row and --length (or --full)")
        j, length = args.row, args.length
    if length < 0:
        raise _UsageError("--length must be non-negative")
    if not 0 <= j < idx.n:
        raise _UsageError(f"--row must lie in [0, {idx.n})")
    if args.mode == "path":
        symbols = idx.extract_path(j, length)
        text = " ".join(map(str, symbols))
    else:
        symbols = idx.extract(j, length)
        text = " ".join(symbol_name(s) for s in symbols)
    if args.format == "human":
        print(text)
    else:
        emit({"row": j, "length": length, "mode": args.mode, "symbols": text}, args.format)
    return EXIT_OK


def cmd_stats(args):
    idx = load_index(args.index)
    stats = idx.stats()
    stats["size_breakdown"] = idx.size_breakdown()
    emit(stats, args.format)
    return EXIT_OK


def _generate(args):
    if args.grid:
        rows, cols = (int(x) for x in args.grid.lower().split("x"))
        g = gen_grid_network(rows, cols)
    else:
        g = gen_poisson_digraph(args.sigma, args.d_bar, args.seed)
    if args.text_length:
        length = args.length
        if isinstance(length, tuple):
            raise _UsageError("--text-length needs a fixed --length")
        walks = walks_for_text_length(g, args.text_length, length, args.seed + 1, args.bias)
    else:
        walks = gen_walks(g, WalkConfig(args.num_walks, args.length, args.seed + 1, args.bias))
    return g, walks


def cmd_generate(args):
    g, walks = _generate(args)
    header = (f"sigma={g.sigma} mean_out_degree={g.mean_out_degree():.4f} "
              f"walks={len(walks)} length={args.length} bias={args.bias} seed={args.seed}")
    write_trajectories(args.output, walks, header=header)
    emit({"output": str(args.output), "sigma": g.sigma, "arcs": g.num_arcs,
          "mean_out_degree": g.mean_out_degree(), "walks": len(walks),
          "symbols": sum(map(len, walks)) + len(walks) + 1}, args.format)
    return EXIT_OK


def bench_rows(sigmas, d_bars, text_length, block_sizes, backends, strategies,
               queries=500, query_length=20, walk_length=20, bias=1.0, seed=0,
               extract_rows=50, extract_length=20):
    """Generate -> build -> query/extract for every configuration; one dict per build."""
    rows = []
    for sigma in sigmas:
        for d_bar in d_bars:
            g = gen_poisson_digraph(sigma, d_bar, seed)
            walks = walks_for_text_length(g, text_length, walk_length, seed + 1, bias)
            text = build_trajectory_string(walks, sigma)
            paths = sample_query_paths(walks, queries, query_length, seed + 2)
            for b in block_sizes:
                for backend in backends:
                    for strategy in (strategies if backend == "snt" else [None]):
                        rows.append(_bench_one(text, paths, backend, strategy, b, seed,
                                               extract_rows, extract_length, sigma, d_bar))
    return rows


def _bench_one(text, paths, backend, strategy, b, seed, extract_rows, extract_length, sigma, d_bar):
    t0 = time.perf_counter()
    if backend == "baseline":
        idx = BaselineFmIndex.build(text, "rrr", b)
    else:
        idx = SntIndex.build(text, _make_strategy(strategy, seed), "rrr", b)
    build_s = time.perf_counter() - t0
    bit_ranks = []
    t0 = time.perf_counter()
    for p in paths:
        with instrument.counting() as ops:
            idx.suffix_range(p)
        bit_ranks.append(ops.bit_ranks)
    query_s = time.perf_counter() - t0
    rng = np.random.default_rng(seed + 3)
    rows_j = rng.integers(0, idx.n, extract_rows).tolist()
    t0 = time.perf_counter()
    for j in rows_j:
        idx.extract(j, extract_length)
    extract_s = time.perf_counter() - t0
    return {
        "sigma": sigma,
        "d_bar": d_bar,
        "n": idx.n,
        "backend": backend,
        "strategy": strategy or "",
        "block_size": b,
        "bits_per_symbol": idx.bits_per_symbol(),
        "mean_query_micros": query_s / len(paths) * 1e6,
        "mean_bit_ranks": float(np.mean(bit_ranks)),
        "extract_micros_per_symbol": extract_s / (extract_rows * extract_length) * 1e6,
        "build_seconds": build_s,
    }


def cmd_bench(args):
    rows = bench_rows(args.sigmas, args.d_bars, args.text_length, args.block_sizes,
                      args.backends.split(","), args.strategies.split(","),
                      args.queries, args.query_length, args.walk_length, args.bias,
                      args.seed)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            emit(rows, "csv", fh)
    emit(rows, args.format)
    return EXIT_OK


# --- parser ---------------------------------------------------------------

def _add_index_flags(p):
    p.add_argument("--block-size", type=int, choices=(15, 31, 63), default=63)
    p.add_argument("--bitvector", choices=("rrr", "plain"), default="rrr")
    p.add_argument("--strategy", choices=("bigram", "random", "mel"), default="bigram")
    p.add_argument("--backend", choices=("snt", "baseline"), default="snt")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-edges", type=int, default=None,
                   help="edge alphabet size (default: largest id + 1)")
    p.add_argument("--debug-oracle", action="store_true",
                   help="keep the suffix array and raw text in the index for verification")


def _format_flag(default="human"):
    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", choices=("human", "json", "csv"), default=default)
    return fmt


def build_parser():
    parser = argparse.ArgumentParser(prog="trajfm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", parents=[_format_flag()], help="index a trajectory file")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--output", "-o")
    _add_index_flags(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", parents=[_format_flag()], help="suffix range of a travel-order path")
    p.add_argument("index")
    p.add_argument("path", nargs="*", help="edge ids in travel order")
    p.add_argument("--batch", metavar="FILE", help="one path per line")
    p.add_argument("--per-query", action="store_true", help="batch: one row per query")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("extract", parents=[_format_flag()], help="read symbols preceding a BWT row")
    p.add_argument("index")
    p.add_argument("--row", "-j", type=int)
    p.add_argument("--length", "-l", type=int)
    p.add_argument("--full", action="store_true", help="the whole text from the terminator row")
    p.add_argument("--mode", choices=("raw", "path"), default="raw")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("stats", parents=[_format_flag()], help="index statistics and size breakdown")
    p.add_argument("index")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("generate", parents=[_format_flag()], help="synthetic random-walk trajectories")
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--sigma", type=int, default=1024, help="number of road edges")
    p.add_argument("--d-bar", type=float, default=4.0)
    p.add_argument("--grid", metavar="RxC", help="use a street grid instead of a random digraph")
    p.add_argument("--num-walks", type=int, default=1000)
    p.add_argument("--text-length", type=int, help="target trajectory-string length")
    p.add_argument("--length", type=_parse_length, default=20, help="walk length or LO:HI")
    p.add_argument("--bias", type=float, default=1.0, help="geometric transition bias q")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", parents=[_format_flag("csv")], help="size/time sweeps as CSV")
    p.add_argument("--sigmas", type=_int_list, default=[1024])
    p.add_argument("--d-bars", type=_float_list, default=[4.0])
    p.add_argument("--text-length", type=int, default=100_000)
    p.add_argument("--block-sizes", type=_int_list, default=[63])
    p.add_argument("--backends", default="snt,baseline")
    p.add_argument("--strategies", default="bigram")
    p.add_argument("--queries", type=int, default=500)
    p.add_argument("--query-length", type=int, default=20)
    p.add_argument("--walk-length", type=int, default=20)
    p.add_argument("--bias", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", help="also write the CSV report here")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (_UsageError, InvalidQueryError, ConfigurationError) as exc:
        print(f"trajfm {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputFormatError, IndexFormatError, OSError, TrajfmError, ValueError) as exc:
        print(f"trajfm {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
