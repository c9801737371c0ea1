"""``maxcut-qaoa`` command line.

Exit codes: 0 success, 2 usage, 3 not found, 4 data missing, 5 I/O.
Machine-readable output goes to stdout or ``--out``; logs go to stderr.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from pathlib import Path

from . import analysis as an
from .angles import AngleVector, Unit, convert_units
from .baselines import brute_force_maxcut
from .graphs import (
    Graph,
    GraphError,
    canonical_certificate,
    connected_graphs_up_to,
    enumerate_connected,
    enumerate_regular,
    parse_graph6,
    read_graph6_file,
    write_graph6,
)
from .optimize import OptConfig, enumerate_degenerate_optima, multistart_optimize
from .paramdb import (
    DB_ENV_VAR,
    DatabaseError,
    LookupKind,
    build_db,
    compile_db,
    dumps_db,
    ingest_raw,
    load_db,
    lookup,
    merge_db,
    save_db,
)
from .simulator import simulate

log = logging.getLogger("maxcut_qaoa.cli")

EXIT_OK, EXIT_USAGE, EXIT_NOT_FOUND, EXIT_DATA, EXIT_IO = 0, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- input helpers -----------------------------------------------------------


def read_edge_list(path: Path) -> Graph:
    """Whitespace-separated ``u v`` lines; ``# n=K`` sets the vertex count
    (otherwise the largest endpoint + 1)."""
    n = None
    edges = []
    for line in path.read_text().splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            body = s[1:].replace(" ", "")
            if body.startswith("n="):
                n = int(body[2:])
            continue
        u, v = s.split()[:2]
        edges.append((int(u), int(v)))
    if n is None:
        n = max((max(e) for e in edges), default=0) + 1
    return Graph(n, edges)


def read_graphs(text: str, fmt: str = "auto") -> list[Graph]:
    """Inline graph6, a graph6 file, or an edge-list file."""
    path = Path(text)
    if fmt == "auto":
        if path.is_file():
            fmt = "edgelist" if path.suffix.lower() in (".txt", ".edges", ".edgelist", ".el") else "g6file"
        else:
            fmt = "graph6"
    if fmt == "graph6":
        return [parse_graph6(text)]
    if fmt == "g6file":
        return read_graph6_file(path)
    if fmt == "edgelist":
        return [read_edge_list(path)]
    raise CliError(f"unknown graph format {fmt!r}", EXIT_USAGE)


def read_one_graph(text: str, fmt: str) -> Graph:
    gs = read_graphs(text, fmt)
    if len(gs) != 1:
        raise CliError(f"expected one graph, got {len(gs)}", EXIT_USAGE)
    return gs[0]


def parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def parse_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def parse_restarts(text: str | None, base: OptConfig) -> OptConfig:
    """``"50"`` applies to every depth; ``"1=50,2=100"`` per depth."""
    if not text:
        return base
    r = dict(base.restarts)
    for part in text.split(","):
        if "=" in part:
            p, v = part.split("=")
            r[int(p)] = int(v)
        else:
            r = {p: int(part) for p in set(r) | {1, 2, 3}}
    return OptConfig(r, base.seed, base.max_iterations, base.gradient_tolerance)


def resolve_db(args) -> Path:
    path = args.db or os.environ.get(DB_ENV_VAR)
    if not path:
        raise CliError(f"no database given (use --db or set {DB_ENV_VAR})", EXIT_USAGE)
    return Path(path)


def open_db(args):
    path = resolve_db(args)
    try:
        return load_db(path)
    except OSError as exc:
        raise CliError(f"cannot read database {path}: {exc.strerror or exc}", EXIT_IO) from None
    except DatabaseError as exc:
        raise CliError(f"{path}: {exc}", EXIT_IO) from None


@contextlib.contextmanager
def output(args, binary: bool = False):
    if args.out and args.out != "-":
        try:
            fh = open(args.out, "wb" if binary else "w", encoding=None if binary else "utf-8", newline=None if binary else "")
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc.strerror or exc}", EXIT_IO) from None
        with fh:
            yield fh
    else:
        yield sys.stdout.buffer if binary else sys.stdout


def emit_json(args, obj) -> None:
    with output(args) as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def angle_json(a: AngleVector) -> dict:
    pi, rad = convert_units(a, Unit.PI), convert_units(a, Unit.RAD)
    return {"pi": {"gamma": list(pi.gamma), "beta": list(pi.beta)},
            "rad": {"gamma": list(rad.gamma), "beta": list(rad.beta)}}


def config(args) -> OptConfig:
    return OptConfig(seed=args.seed)


# -- commands -----------------------------------------------------------------


def cmd_gen_graphs(args) -> int:
    try:
        if args.regular is not None:
            gs = enumerate_regular(args.n, args.regular)
        elif args.up_to:
            gs = connected_graphs_up_to(args.n, args.n_min)
        else:
            gs = enumerate_connected(args.n)
        lines = [write_graph6(g) for g in gs]
    except GraphError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    with output(args) as fh:
        for line in lines:
            fh.write(line + "\n")
    print(f"{len(lines)} graphs", file=sys.stderr)
    return EXIT_OK


def cmd_build_db(args) -> int:
    graphs = read_graphs(args.graphs, args.format)
    p_values = parse_ints(args.p)
    cfg = parse_restarts(args.restarts, config(args))
    grid = None
    if args.grid:
        # "G,B" for every depth or "1=G,B;2=G,B"
        grid = {}
        for part in args.grid.split(";"):
            if "=" in part:
                p, dims = part.split("=")
                grid[int(p)] = tuple(parse_ints(dims))
            else:
                grid = {1: tuple(parse_ints(part)), 2: tuple(parse_ints(part))}
    db = build_db(graphs, p_values, cfg, enumerate_degenerates=args.degenerate, degenerate_grid=grid,
                  workers=args.threads)
    if not args.out:
        args.out = str(resolve_db(args))
    with output(args, binary=True) as fh:
        fh.write(dumps_db(db))
    print(f"{len(db)} entries written to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_ingest(args) -> int:
    records = []
    rejected = 0
    for path in args.files:
        try:
            res = ingest_raw(path, args.raw_format)
        except OSError as exc:
            raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from None
        for lineno, why in res.rejected:
            print(f"{path}:{lineno}: rejected: {why}", file=sys.stderr)
        rejected += len(res.rejected)
        records += res.records
    db = compile_db(records, {"format_version": 1, "source": "ingested",
                              "inputs": [Path(p).name for p in args.files]})
    quarantined = db.quarantined
    for where, why in quarantined:
        print(f"{where}: quarantined: {why}", file=sys.stderr)
    if args.merge:
        db = merge_db(load_db(args.merge), db)
    if not args.out:
        args.out = str(resolve_db(args))
    try:
        save_db(db, args.out)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc.strerror or exc}", EXIT_IO) from None
    print(f"{len(db)} entries, {len(db.fixed_angles)} fixed-angle rows, {len(quarantined)} quarantined, "
          f"{rejected} rejected; written to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_lookup(args) -> int:
    db = open_db(args)
    g = read_one_graph(args.graph, args.format)
    res = lookup(db, g, args.p, fallback=args.fallback)
    if res.kind is LookupKind.NOT_FOUND:
        emit_json(args, {"kind": res.kind.value, "p": args.p, "certificate": canonical_certificate(g).decode()})
        return EXIT_NOT_FOUND
    obj = {"kind": res.kind.value, "p": args.p, "certificate": canonical_certificate(g).decode(),
           "angles": angle_json(res.angles)}
    if res.kind is LookupKind.EXACT:
        e = res.entry
        obj.update(expectation=e.expectation, ratio=e.ratio, c_max=e.c_max, source=e.source)
    else:
        obj.update(degree=res.entry.degree, expected_ratio=res.entry.expected_ratio)
    emit_json(args, obj)
    return EXIT_OK


def cmd_simulate(args) -> int:
    g = read_one_graph(args.graph, args.format)
    gamma, beta = parse_floats(args.gamma), parse_floats(args.beta)
    if len(gamma) != len(beta):
        raise CliError(f"--gamma has {len(gamma)} values but --beta has {len(beta)}", EXIT_USAGE)
    angles = AngleVector(gamma, beta, Unit(args.units)).radians()
    c_max, _ = brute_force_maxcut(g)
    res = simulate(g, angles, c_max)
    with output(args) as fh:
        an.write_csv(fh, ["metric", "value"], [
            ["expectation", res.expectation],
            ["cut_fraction", res.expectation / g.m if g.m else None],
            ["success_probability", res.success_probability],
            ["approximation_ratio", res.expectation / c_max if c_max else None],
            ["c_max", c_max],
        ])
        fh.write("\n")
        an.write_csv(fh, ["cut", "probability"], sorted(res.cut_histogram.items()))
    return EXIT_OK


def cmd_optimize(args) -> int:
    g = read_one_graph(args.graph, args.format)
    if g.m == 0:
        raise CliError("graph has no edges", EXIT_USAGE)
    cfg = config(args)
    if args.restarts:
        cfg = parse_restarts(str(args.restarts), cfg)
    res = multistart_optimize(g, args.p, cfg)
    c_max, _ = brute_force_maxcut(g)
    obj = {"p": args.p, "certificate": canonical_certificate(g).decode(),
           "angles": angle_json(res.best_angles), "value": res.best_value, "ratio": res.best_value / c_max,
           "c_max": c_max, "restarts": res.n_restarts_used, "converged": res.converged}
    if args.enumerate_degenerate:
        if args.p not in (1, 2):
            raise CliError("degenerate enumeration supports p=1 and p=2", EXIT_USAGE)
        opts = enumerate_degenerate_optima(g, args.p)
        obj["degenerate"] = [{"gamma": list(a.gamma), "beta": list(a.beta)} for a in opts]
    emit_json(args, obj)
    return EXIT_OK


def _write_table(args, header, rows) -> None:
    with output(args) as fh:
        an.write_csv(fh, header, rows)


def cmd_analyze(args) -> int:
    db = None if args.analysis == "classical" and not (args.db or os.environ.get(DB_ENV_VAR)) else open_db(args)
    filt = an.parse_filter(getattr(args, "filter", None))
    if args.analysis == "concentration":
        rep = an.concentration_report(db, args.p, args.k, seed=args.seed, graph_filter=filt)
        _write_table(args, rep.header, rep.rows())
        print(f"N={rep.n_points} graphs={rep.n_graphs} rms={rep.rms_overall:.6g}", file=sys.stderr)
    elif args.analysis == "transfer":
        targets = read_graphs(args.targets, args.format)
        rep = an.transfer_experiment(db, an.parse_filter(args.source), targets, args.p, config(args),
                                     workers=args.threads)
        _write_table(args, rep.header, rep.rows())
        print(json.dumps(rep.summary()), file=sys.stderr)
    elif args.analysis in ("degree", "density", "orbits"):
        if args.p == 0:
            table = _p0_table(db, filt, args.threads)
        else:
            table = an.performance_table(db, [args.p], graph_filter=filt, workers=args.threads)
        if args.analysis == "degree":
            buckets = [float(x) for x in args.buckets.split(",")] if args.buckets else None
            rows = an.performance_by_degree(table, args.p, buckets)
            _write_table(args, an.BUCKET_HEADER, [[r.low, r.high, r.count, r.mean_cut_fraction, r.mean_ratio] for r in rows])
        elif args.analysis == "density":
            rep = an.density_report(table, args.p)
            _write_table(args, rep.header, rep.rows())
            corr = "absent" if rep.correlation is None else format(rep.correlation, ".6g")
            print(f"pearson(success_probability, average_degree) = {corr}", file=sys.stderr)
        else:
            rows = an.performance_by_orbits(table, args.p, sparse_only=args.sparse_only)
            _write_table(args, an.ORBIT_HEADER, [[r.orbit_count, r.count, r.mean_ratio] for r in rows])
    elif args.analysis == "classical":
        graphs = read_graphs(args.graphs, args.format)
        rep = an.classical_comparison(graphs, db, samples=args.samples, seed=args.seed,
                                      build_cfg=config(args) if args.build_missing else None, workers=args.threads)
        with output(args) as fh:
            an.write_csv(fh, rep.header, rep.rows())
            fh.write("\n")
            an.write_csv(fh, rep.summary_header, rep.summary_rows())
    return EXIT_OK


def _p0_table(db, filt, threads):
    depths = db.depths()
    if not depths:
        raise an.MissingDataError("database is empty")
    table = an.performance_table(db, [depths[0]], include_p0=True, graph_filter=filt, workers=threads)
    return an.PerformanceTable(table.at_depth(0))


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--db", help=f"database path (default: ${DB_ENV_VAR})")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", default="auto", choices=["auto", "graph6", "g6file", "edgelist"],
                        help="graph input format")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="maxcut-qaoa", description="Optimized QAOA angles for MaxCut.")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-graphs", parents=[common], help="enumerate non-isomorphic connected graphs")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--regular", type=int)
    s.add_argument("--up-to", action="store_true", help="all sizes n_min..n")
    s.add_argument("--n-min", type=int, default=1)
    s.set_defaults(func=cmd_gen_graphs)

    s = sub.add_parser("build-db", parents=[common], help="optimize angles for a graph set")
    s.add_argument("--graphs", required=True)
    s.add_argument("--p", default="1")
    s.add_argument("--restarts", help='"N" or "1=50,2=100"')
    s.add_argument("--degenerate", action="store_true", help="also enumerate degenerate optima (p<=2)")
    s.add_argument("--grid", help="degenerate-search grid points per gamma/beta: 'G,B' or '1=G,B;2=G,B' (listed depths only)")
    s.set_defaults(func=cmd_build_db)

    s = sub.add_parser("ingest", parents=[common], help="compile raw JSON-lines/CSV files into a database")
    s.add_argument("files", nargs="+")
    s.add_argument("--merge", help="existing database to merge into")
    s.add_argument("--raw-format", choices=["json_lines", "csv"], help="default: by file extension")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("lookup", parents=[common], help="retrieve stored angles")
    s.add_argument("--graph", required=True)
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--fallback", action="store_true")
    s.set_defaults(func=cmd_lookup)

    s = sub.add_parser("simulate", parents=[common], help="evaluate QAOA at given angles")
    s.add_argument("--graph", required=True)
    s.add_argument("--gamma", required=True)
    s.add_argument("--beta", required=True)
    s.add_argument("--units", choices=["pi", "rad"], default="pi")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("optimize", parents=[common], help="multistart angle optimization")
    s.add_argument("--graph", required=True)
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--restarts", type=int)
    s.add_argument("--enumerate-degenerate", action="store_true")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("analyze", help="studies over a database")
    asub = s.add_subparsers(dest="analysis", required=True)
    a = asub.add_parser("concentration", parents=[common])
    a.add_argument("--p", type=int, default=1)
    a.add_argument("--k", type=int)
    a.add_argument("--filter")
    a = asub.add_parser("transfer", parents=[common])
    a.add_argument("--source", help='entry filter, e.g. "n<=7"')
    a.add_argument("--targets", required=True)
    a.add_argument("--p", type=int, default=1)
    a = asub.add_parser("degree", parents=[common])
    a.add_argument("--p", type=int, default=1)
    a.add_argument("--buckets", help="explicit bucket edges, comma separated")
    a.add_argument("--filter")
    a = asub.add_parser("density", parents=[common])
    a.add_argument("--p", type=int, default=2)
    a.add_argument("--filter")
    a = asub.add_parser("orbits", parents=[common])
    a.add_argument("--p", type=int, default=1)
    a.add_argument("--sparse-only", action="store_true")
    a.add_argument("--filter")
    a = asub.add_parser("classical", parents=[common])
    a.add_argument("--graphs", required=True)
    a.add_argument("--samples", type=int, default=1000)
    a.add_argument("--build-missing", action="store_true", help="optimize graphs absent from the database")
    s.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    resolved["db"] = args.db or os.environ.get(DB_ENV_VAR)
    print(f"config: {json.dumps(resolved, sort_keys=True, default=str)}", file=sys.stderr)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except an.MissingDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (GraphError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
