"""Command-line entry point.

Exit codes
----------
0  success
1  unexpected internal error
2  usage error (unknown flag, bad value)
3  infeasible configuration (too few admissible neighbors)
4  I/O error
5  malformed input file
6  memory budget exceeded
7  other invalid configuration

On failure a single JSON line ``{"error": kind, "exit_code": n, "message": ...}``
is written to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, bench, field_store, oracle, spatial
from .config import DEFAULT_BATCH, DEFAULT_D, DEFAULT_K, DEFAULT_K_VALUES, RunConfig
from .errors import ConfigError, FormatError, InfeasibleConfigError, MemoryBudgetError
from .pipeline import file_digest, score_sequence
from .rarity import RarityReport, read_report, write_report

log = logging.getLogger("traknn")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO, EXIT_FORMAT, EXIT_MEMORY, EXIT_CONFIG = range(8)
ORACLE_MAX_N = 2000


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("usage", EXIT_USAGE, message)


def _fail(kind, code, message):
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": str(message)}) + "\n")
    raise SystemExit(code)


# ---------------------------------------------------------------- shared flags


def _run_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--d", type=int, default=DEFAULT_D, help="trajectory duration (default 5)")
    p.add_argument("--k", type=int, default=DEFAULT_K, help="neighbor count (default 10)")
    p.add_argument("--k-values", type=int, nargs="+", default=list(DEFAULT_K_VALUES),
                   help="additional k evaluated in the same pass (default 1 5 10)")
    p.add_argument("--e", type=int, default=None, help="exclusion radius (default: d)")
    return p


def _engine_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--b", type=int, default=DEFAULT_BATCH, help="tile edge (default 256)")
    p.add_argument("--storage", choices=("input", "float32", "float64"), default="input")
    p.add_argument("--refresh", type=int, default=None, help="exact recomputation every R rows")
    p.add_argument("--threads", type=int, default=None, help="worker cap (env TRAKNN_THREADS)")
    p.add_argument("--memory-budget", type=int, default=None, help="bytes (env TRAKNN_MEMORY_BUDGET)")
    return p


def _prep_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--anomaly", choices=("none", "gridpoint", "calendar"), default="none")
    p.add_argument("--period", type=int, default=None, help="calendar period for --anomaly calendar")
    p.add_argument("--lat-weight", type=float, nargs=2, metavar=("LAT_FIRST", "LAT_LAST"),
                   default=None, help="cosine-latitude weights, rows spaced linearly")
    p.add_argument("--standardize", action="store_true", help="per-gridpoint standardization")
    return p


def _prep_echo(args):
    return {"anomaly": args.anomaly, "period": args.period,
            "lat_weight": list(args.lat_weight) if args.lat_weight else None,
            "standardize": args.standardize}


def _load_prepared(args):
    seq = field_store.load(args.input)
    if args.anomaly != "none":
        seq = field_store.remove_climatology(seq, args.anomaly, args.period)
    if args.lat_weight:
        lats = np.linspace(args.lat_weight[0], args.lat_weight[1], seq.h)
        seq = field_store.apply_weights(seq, field_store.cos_lat_weights(lats, seq.w))
    if args.standardize:
        seq = field_store.standardize(seq)
    return seq


def _cfg(args):
    return RunConfig(d=args.d, k=args.k, e=args.e, k_values=tuple(args.k_values),
                     b=getattr(args, "b", DEFAULT_BATCH), storage=getattr(args, "storage", "input"),
                     refresh=getattr(args, "refresh", None), threads=getattr(args, "threads", None),
                     memory_budget=getattr(args, "memory_budget", None))


# ---------------------------------------------------------------- subcommands


def cmd_synth(args):
    seq = field_store.synth(args.n, args.h, args.w, args.kind, seed=args.seed, t_star=args.t_star,
                            amplitude=args.amplitude, duration=args.duration, dtype=np.dtype(args.dtype))
    field_store.save(seq, args.out)
    log.info("wrote %s (%s)", args.out, seq)


def cmd_convert(args):
    seq = field_store.load(args.input)
    if args.dtype:
        seq = field_store.FieldSequence(seq.values.astype(args.dtype))
    field_store.save(seq, args.out)
    log.info("converted %s -> %s", args.input, args.out)


def cmd_matrix(args):
    seq = _load_prepared(args)
    cfg = RunConfig(d=1, k=1, e=0, b=args.b, storage=args.storage, threads=args.threads,
                    memory_budget=args.memory_budget)
    sdm = spatial.spatial_distance_matrix(seq, cfg)
    spatial.save_matrix(sdm, args.out)
    log.info("wrote %dx%d matrix to %s (%d tiles)", sdm.n, sdm.n, args.out, sdm.tiles_computed)


def cmd_score(args):
    cfg = _cfg(args)
    digest = file_digest(args.input)
    seq_header_n = None
    S = None
    if args.matrix:
        S = spatial.load_matrix(args.matrix)
        seq_header_n = S.n
        cfg.check(seq_header_n)
    seq = _load_prepared(args)
    if seq_header_n is not None and seq_header_n != seq.n:
        raise ConfigError(f"matrix side {seq_header_n} does not match n={seq.n}")
    extra = {"input": str(args.input), "matrix": str(args.matrix) if args.matrix else None,
             **_prep_echo(args)}
    log.info("scoring %s with d=%d e=%d k=%s", seq, cfg.d, cfg.e, list(cfg.k_values))
    report = score_sequence(seq, cfg, S=S, input_digest=digest, config_extra=extra)
    write_report(report, args.out)
    log.info("wrote %s; timings %s", args.out, report.provenance["timings"])


def cmd_oracle(args):
    cfg = RunConfig(d=args.d, k=args.k, e=args.e, k_values=tuple(args.k_values))
    digest = file_digest(args.input)
    seq = _load_prepared(args)
    cfg.check(seq.n)
    if seq.n > args.max_n:
        raise ConfigError(f"oracle limited to n <= {args.max_n} (got {seq.n}); raise --max-n to force")
    scores, nbrs, dists = oracle.naive_rarity(seq, cfg.d, cfg.k_values, cfg.e)
    config = cfg.echo()
    config.update({"n": seq.n, "h": seq.h, "w": seq.w, "dtype": str(seq.dtype), "input": str(args.input),
                   "engine": "oracle", **_prep_echo(args)})
    k_max = cfg.k_max
    report = RarityReport(config, nbrs[k_max], dists[k_max], {k: scores[k] for k in cfg.k_values},
                          {"software": f"traknn {__version__}", "input_digest": digest})
    write_report(report, args.out)
    log.info("wrote %s", args.out)


def cmd_id(args):
    ks = sorted(args.k_values)
    if args.report:
        report = read_report(args.report)
    else:
        if not args.input:
            raise ConfigError("id needs --report or --input")
        seq = _load_prepared(args)
        cfg = RunConfig(d=args.d, k=ks[-1], e=args.e, k_values=tuple(ks), b=args.b, threads=args.threads,
                        memory_budget=args.memory_budget)
        report = score_sequence(seq, cfg)
    est = analysis.macro_id(report.distances, ks)
    out = {"mean": est.mean, "std": est.std, "k_values": list(est.k_values), "discarded": est.discarded,
           "points": int(est.per_point.shape[1])}
    _emit(out, args.out)


def cmd_compare(args):
    a, b = read_report(args.a), read_report(args.b)
    common, rho = analysis.top_set_overlap(a, b, args.count, k=args.k)
    _emit({"count": args.count, "k": args.k, "common": common,
           "spearman": None if rho != rho else rho}, args.out)


def cmd_bench(args):
    dims = dict(bench.FULL_SCALE_DIMS if args.full_scale else bench.DESK_DIMS)
    for key in ("n", "h", "w"):
        if getattr(args, key) is not None:
            dims[key] = getattr(args, key)
    cfg = RunConfig(d=args.d, k=args.k, e=args.e, b=args.b, storage=args.storage, threads=args.threads,
                    memory_budget=args.memory_budget)
    records = bench.sweep(args.sweep, args.values, cfg, dims, reps=args.reps, seed=args.seed,
                          dtype=np.dtype(args.dtype), measure_memory=args.memory, log=log.info)
    bench.write_csv(records, args.out)
    env_path = Path(args.out).with_suffix(".json")
    extra = {"sweep": args.sweep, "values": args.values, "base_dims": dims, "config": cfg.echo(),
             "dtype": args.dtype}
    if len(records) >= 2 and all(not r.skipped for r in records):
        extra["loglog_slope_total"] = bench.loglog_slope([r.value for r in records], [r.total for r in records])
    bench.write_environment(env_path, extra)
    log.info("wrote %s and %s", args.out, env_path)


def _emit(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


# ---------------------------------------------------------------- parser


def build_parser():
    run, engine, prep = _run_flags(), _engine_flags(), _prep_flags()
    parser = _Parser(prog="traknn", description="Exact kNN rarity of field trajectories.")
    parser.add_argument("--version", action="version", version=f"traknn {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("score", parents=[run, engine, prep], help="full rarity pass")
    p.add_argument("--input", required=True)
    p.add_argument("--matrix", default=None, help="reuse a TRKS spatial matrix")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("oracle", parents=[run, prep], help="brute-force pass (small n)")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-n", type=int, default=ORACLE_MAX_N)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("synth", help="generate a synthetic TRAK file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--h", type=int, required=True)
    p.add_argument("--w", type=int, required=True)
    p.add_argument("--kind", choices=field_store.SYNTH_KINDS, default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-star", type=int, default=None)
    p.add_argument("--amplitude", type=float, default=10.0)
    p.add_argument("--duration", type=int, default=DEFAULT_D)
    p.add_argument("--dtype", choices=("float32", "float64"), default="float64")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("convert", help="CSV <-> TRAK by file extension")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dtype", choices=("float32", "float64"), default=None)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("matrix", parents=[engine, prep], help="compute and persist the spatial matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("id", parents=[engine, prep], help="macro intrinsic dimension")
    p.add_argument("--report", default=None)
    p.add_argument("--input", default=None)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--e", type=int, default=None)
    p.add_argument("--k-values", type=int, nargs="+", default=[20, 30, 40])
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_id)

    p = sub.add_parser("compare", help="top-set overlap and Spearman between two reports")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", parents=[engine], help="scaling sweeps")
    p.add_argument("--sweep", choices=bench.SWEEP_VARIABLES, required=True)
    p.add_argument("--values", type=int, nargs="+", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--h", type=int, default=None)
    p.add_argument("--w", type=int, default=None)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--e", type=int, default=None)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    p.add_argument("--memory", action="store_true", help="also record traced peak memory")
    p.add_argument("--full-scale", action="store_true", help="full-scale base dims n=27000, h=180, w=280 (long, needs many GB)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def run(argv=None):
    """Parse ``argv`` and execute one subcommand; returns the exit code."""
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
        args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except InfeasibleConfigError as exc:
        return _code("infeasible", EXIT_INFEASIBLE, exc)
    except MemoryBudgetError as exc:
        return _code("memory", EXIT_MEMORY, exc)
    except FormatError as exc:
        return _code("format", EXIT_FORMAT, exc)
    except ConfigError as exc:
        return _code("config", EXIT_CONFIG, exc)
    except OSError as exc:
        return _code("io", EXIT_IO, exc)
    except Exception as exc:  # noqa: BLE001
        return _code("internal", EXIT_INTERNAL, f"{type(exc).__name__}: {exc}")
    return EXIT_OK


def _code(kind, code, exc):
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": str(exc)}) + "\n")
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
