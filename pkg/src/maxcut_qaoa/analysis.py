"""Studies over a parameter database: concentration of optimal angles,
median-angle transfer, performance against degree, depth, density and
symmetry, and comparison with classical cuts.

Reports are plain dataclasses with ``header`` / ``rows()`` for CSV output;
floats are written at 12 significant digits.
"""

from __future__ import annotations

import csv
import math
import operator
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .angles import AngleVector, Unit
from .baselines import (
    brute_force_maxcut,
    explicit_vector_cut,
    local_search_cut,
    random_cut_expectation,
)
from .graphs import Graph, canonical_certificate, degree_stats, vertex_orbits
from .optimize import OptConfig, multistart_optimize
from .paramdb import Database, DatabaseError, DbEntry, LookupKind, lookup, median_angles
from .simulator import MaxCutSimulator
from .symmetry import GraphParity, graph_parity, normalize_to_sector


class MissingDataError(DatabaseError):
    """The database lacks data a report needs (e.g. degenerate optima)."""


def _map(fn, items: Sequence, workers: int = 1) -> list:
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# -- CSV ---------------------------------------------------------------------


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bytes):
        return x.decode("ascii")
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def write_csv(fh, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])


# -- k-means --------------------------------------------------------------------


@dataclass(frozen=True)
class KMeansResult:
    centers: np.ndarray
    assignments: np.ndarray
    rms: float
    inertia: float
    iterations: int


def _assign(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    lab = np.argmin(d2, axis=1)
    return lab, d2[np.arange(len(points)), lab]


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [points[rng.integers(len(points))]]
    for _ in range(1, k):
        _, d2 = _assign(points, np.array(centers))
        total = d2.sum()
        if total <= 0:
            # fewer distinct points than k: reuse an arbitrary point
            centers.append(points[rng.integers(len(points))])
            continue
        centers.append(points[rng.choice(len(points), p=d2 / total)])
    return np.array(centers, dtype=float)


def _lloyd(points: np.ndarray, centers: np.ndarray, tol: float, max_iter: int) -> KMeansResult:
    it = 0
    for it in range(1, max_iter + 1):
        lab, _ = _assign(points, centers)
        new = centers.copy()
        for c in range(len(centers)):
            members = points[lab == c]
            if len(members):
                new[c] = members.mean(axis=0)
        shift = np.abs(new - centers).max()
        centers = new
        if shift < tol:
            break
    lab, d2 = _assign(points, centers)
    inertia = float(d2.sum())
    return KMeansResult(centers, lab, math.sqrt(inertia / len(points)), inertia, it)


def kmeans(points, k: int, seed: int = 0, n_init: int = 10, tol: float = 1e-9, max_iter: int = 300) -> KMeansResult:
    """Lloyd's algorithm from k-means++ seeds; best of ``n_init`` runs."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if k < 1 or len(pts) < k:
        raise ValueError(f"need at least k={k} points, got {len(pts)}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        res = _lloyd(pts, _kmeans_pp(pts, k, rng), tol, max_iter)
        if best is None or res.inertia < best.inertia - 1e-15:
            best = res
    return best


# -- concentration -----------------------------------------------------------------------


@dataclass(frozen=True)
class ConcentrationReport:
    p: int
    k: int
    centers: np.ndarray  # pi units, columns gamma_1..gamma_p, beta_1..beta_p
    display_centers: list[AngleVector]
    points: np.ndarray
    assignments: np.ndarray
    rms_overall: float
    rms_per_cluster: list[float]
    counts: list[int]
    n_graphs: int

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def header(self) -> list[str]:
        p = self.p
        return (["cluster", "count", "rms"] + [f"gamma{l}" for l in range(1, p + 1)]
                + [f"beta{l}" for l in range(1, p + 1)]
                + [f"display_gamma{l}" for l in range(1, p + 1)] + [f"display_beta{l}" for l in range(1, p + 1)])

    def rows(self) -> list[list]:
        out = []
        for c in range(self.k):
            d = self.display_centers[c]
            out.append([c, self.counts[c], self.rms_per_cluster[c], *self.centers[c], *d.gamma, *d.beta])
        out.append(["all", self.n_points, self.rms_overall] + [None] * (4 * self.p))
        return out


def concentration_report(db: Database, p: int, k: int | None = None, seed: int = 0,
                         graph_filter: Callable[[DbEntry], bool] | None = None) -> ConcentrationReport:
    k = k or {1: 4, 2: 8}.get(p, 2 ** (p + 1))
    entries = [e for e in db.at_depth(p) if graph_filter is None or graph_filter(e)]
    if not entries:
        raise MissingDataError(f"no entries at p={p}")
    missing = [e for e in entries if not e.degenerate_angles]
    if missing:
        raise MissingDataError(
            f"{len(missing)} entries at p={p} have no degenerate optima; build with degenerate enumeration")
    points = np.array([a.flat() for e in entries for a in e.degenerate_angles], dtype=float)
    res = kmeans(points, k, seed=seed)
    parities = {graph_parity(e.graph) for e in entries}
    parity = parities.pop() if len(parities) == 1 else GraphParity.MIXED
    display = [normalize_to_sector(AngleVector.from_flat(c, Unit.PI), parity, mode="positive") for c in res.centers]
    per, counts = [], []
    for c in range(k):
        m = points[res.assignments == c]
        counts.append(len(m))
        per.append(float(math.sqrt(((m - res.centers[c]) ** 2).sum() / len(m))) if len(m) else 0.0)
    return ConcentrationReport(p, k, res.centers, display, points, res.assignments, res.rms, per, counts, len(entries))


# -- transfer -------------------------------------------------------------------------------


@dataclass(frozen=True)
class TransferRow:
    certificate: bytes
    p: int
    transferred_ratio: float
    optimized_ratio: float

    @property
    def gap(self) -> float:
        return self.optimized_ratio - self.transferred_ratio


@dataclass(frozen=True)
class TransferReport:
    median: AngleVector
    rows_: list[TransferRow]

    header = ["certificate", "p", "transferred_ratio", "optimized_ratio", "gap"]

    def rows(self) -> list[list]:
        return [[r.certificate, r.p, r.transferred_ratio, r.optimized_ratio, r.gap] for r in self.rows_]

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r.gap for r in self.rows_])

    def summary(self) -> dict:
        g = self.gaps
        return {"mean_gap": float(g.mean()), "median_gap": float(np.median(g)), "max_gap": float(g.max()),
                "count": len(g)}


def _transfer_one(args) -> TransferRow:
    g, median, p, cfg = args
    c_max, _ = brute_force_maxcut(g)
    rad = median.radians()
    transferred = float(MaxCutSimulator(g).expectations([rad.gamma], [rad.beta])[0])
    # the median itself seeds one restart, so the optimum never falls below it
    best = multistart_optimize(g, p, cfg, warm_starts=[median]).best_value
    best = max(best, transferred)
    return TransferRow(canonical_certificate(g), p, transferred / c_max, best / c_max)


def transfer_experiment(db: Database, source_filter, targets: Sequence[Graph], p: int,
                        cfg: OptConfig | None = None, workers: int = 1) -> TransferReport:
    median = median_angles(db, source_filter, p)
    for g in targets:
        if g.m == 0:
            raise ValueError("transfer targets need at least one edge")
    rows = _map(_transfer_one, [(g, median, p, cfg or OptConfig()) for g in targets], workers)
    return TransferReport(median, rows)


# -- performance tables -----------------------------------------------------------------


@dataclass(frozen=True)
class PerformanceRow:
    certificate: bytes
    n: int
    m: int
    average_degree: float
    orbit_count: int
    p: int
    c_max: int
    expectation: float
    success_probability: float

    @property
    def ratio(self) -> float:
        return self.expectation / self.c_max

    @property
    def cut_fraction(self) -> float:
        return self.expectation / self.m

    @property
    def e_opt_minus_e(self) -> float:
        return max(self.c_max - self.expectation, 0.0)


@dataclass
class PerformanceTable:
    rows_: list[PerformanceRow] = field(default_factory=list)

    header = ["certificate", "n", "average_degree", "orbit_count", "p", "ratio", "cut_fraction",
              "success_probability", "e_opt_minus_e"]

    def rows(self) -> list[list]:
        return [[r.certificate, r.n, r.average_degree, r.orbit_count, r.p, r.ratio, r.cut_fraction,
                 r.success_probability, r.e_opt_minus_e] for r in self.rows_]

    def at_depth(self, p: int) -> list[PerformanceRow]:
        return [r for r in self.rows_ if r.p == p]

    def by_graph(self, p: int) -> dict[bytes, PerformanceRow]:
        return {r.certificate: r for r in self.at_depth(p)}


def _performance_rows(args) -> list[PerformanceRow]:
    entry_group, include_p0 = args
    first = entry_group[0]
    g = first.graph
    sim = MaxCutSimulator(g)
    m = g.m
    rows = []
    if include_p0:
        _, n_opt = brute_force_maxcut(g)
        rows.append(PerformanceRow(first.certificate, g.n, m, float(first.average_degree), first.orbit_count, 0,
                                   first.c_max, m / 2, n_opt / 2 ** g.n))
    for e in entry_group:
        rad = e.angles.radians()
        probs = 2.0 * np.abs(sim.half_states([rad.gamma], [rad.beta])[0]) ** 2
        rows.append(PerformanceRow(e.certificate, g.n, m, float(e.average_degree), e.orbit_count, e.p,
                                   e.c_max, e.expectation, min(float(probs[sim.cuts == e.c_max].sum()), 1.0)))
    return rows


def performance_table(db: Database, p_values: Sequence[int] | None = None, include_p0: bool = False,
                      graph_filter: Callable[[DbEntry], bool] | None = None, workers: int = 1) -> PerformanceTable:
    """One row per (graph, p); ``include_p0`` adds the uniform-superposition row."""
    wanted = set(p_values) if p_values is not None else None
    groups: dict[bytes, list[DbEntry]] = {}
    for (cert, p), e in sorted(db.entries.items()):
        if (wanted is None or p in wanted) and (graph_filter is None or graph_filter(e)):
            groups.setdefault(cert, []).append(e)
    chunks = _map(_performance_rows, [(grp, include_p0) for grp in groups.values()], workers)
    return PerformanceTable([r for chunk in chunks for r in chunk])


def table_from_graphs(graphs: Iterable[Graph], results: dict[bytes, dict[int, AngleVector]]) -> PerformanceTable:
    """Table for graphs with externally supplied angles (keyed by certificate, then p)."""
    rows = []
    for g in graphs:
        cert = canonical_certificate(g)
        c_max, _ = brute_force_maxcut(g)
        sim = MaxCutSimulator(g)
        for p, a in sorted(results[cert].items()):
            rad = a.radians()
            probs = 2.0 * np.abs(sim.half_states([rad.gamma], [rad.beta])[0]) ** 2
            rows.append(PerformanceRow(cert, g.n, g.m, float(degree_stats(g).average_degree),
                                       vertex_orbits(g).orbit_count, p, c_max, float(probs @ sim.cuts),
                                       min(float(probs[sim.cuts == c_max].sum()), 1.0)))
    return PerformanceTable(rows)


@dataclass(frozen=True)
class BucketRow:
    low: float
    high: float
    count: int
    mean_cut_fraction: float
    mean_ratio: float


def performance_by_degree(table: PerformanceTable, p: int, buckets: Sequence[float] | None = None) -> list[BucketRow]:
    """Mean cut fraction per average-degree bucket.

    Default buckets are unit width centred on the integers, [d - 1/2, d + 1/2).
    ``buckets`` gives explicit ascending edges instead.  Empty buckets are
    omitted.
    """
    rows = table.at_depth(p)
    if not rows:
        return []
    degs = np.array([r.average_degree for r in rows])
    if buckets is None:
        lo = math.floor(degs.min() + 0.5)
        hi = math.floor(degs.max() + 0.5)
        edges = [d - 0.5 for d in range(lo, hi + 2)]
    else:
        edges = list(buckets)
    out = []
    for a, b in zip(edges, edges[1:]):
        sel = [r for r, d in zip(rows, degs) if a <= d < b]
        if sel:
            out.append(BucketRow(a, b, len(sel), float(np.mean([r.cut_fraction for r in sel])),
                                 float(np.mean([r.ratio for r in sel]))))
    return out


BUCKET_HEADER = ["degree_low", "degree_high", "count", "mean_cut_fraction", "mean_ratio"]


@dataclass(frozen=True)
class OrbitRow:
    orbit_count: int
    count: int
    mean_ratio: float


def performance_by_orbits(table: PerformanceTable, p: int, sparse_only: bool = False) -> list[OrbitRow]:
    rows = [r for r in table.at_depth(p) if not sparse_only or r.average_degree < 4]
    groups: dict[int, list[float]] = {}
    for r in rows:
        groups.setdefault(r.orbit_count, []).append(r.ratio)
    return [OrbitRow(k, len(v), float(np.mean(v))) for k, v in sorted(groups.items())]


ORBIT_HEADER = ["orbit_count", "count", "mean_ratio"]


def pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        return None
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = math.sqrt(float(dx @ dx)), math.sqrt(float(dy @ dy))
    if sx == 0 or sy == 0:
        return None
    return float(dx @ dy) / (sx * sy)


@dataclass(frozen=True)
class DensityReport:
    points: list[tuple[bytes, float, float, float]]
    correlation: float | None

    header = ["certificate", "average_degree", "success_probability", "e_opt_minus_e"]

    def rows(self) -> list[list]:
        return [list(pt) for pt in self.points]


def density_report(table: PerformanceTable, p: int) -> DensityReport:
    rows = table.at_depth(p)
    pts = [(r.certificate, r.average_degree, r.success_probability, r.e_opt_minus_e) for r in rows]
    return DensityReport(pts, pearson([r.average_degree for r in rows], [r.success_probability for r in rows]))


# -- classical comparison ----------------------------------------------------------------

CLASSICAL_COLUMNS = ["qaoa_p1", "qaoa_p2", "explicit_vector", "local_search", "random"]


@dataclass(frozen=True)
class ClassicalReport:
    certificates: list[bytes]
    ratios: dict[str, np.ndarray]

    header = ["certificate"] + CLASSICAL_COLUMNS

    def rows(self) -> list[list]:
        return [[c] + [self.ratios[k][i] for k in CLASSICAL_COLUMNS] for i, c in enumerate(self.certificates)]

    def quartiles(self) -> dict[str, tuple[float, float, float, float, float]]:
        return {k: tuple(float(x) for x in np.percentile(v, [0, 25, 50, 75, 100])) for k, v in self.ratios.items()}

    summary_header = ["algorithm", "min", "q1", "median", "q3", "max"]

    def summary_rows(self) -> list[list]:
        return [[k, *q] for k, q in self.quartiles().items()]


def _qaoa_value(g: Graph, db: Database | None, p: int, cfg: OptConfig | None) -> float:
    if db is not None:
        res = lookup(db, g, p, fallback=False)
        if res.kind is LookupKind.EXACT:
            return res.entry.expectation
    if cfg is None:
        raise MissingDataError(f"no database entry for {canonical_certificate(g).decode()} at p={p}")
    return multistart_optimize(g, p, cfg).best_value


def _classical_one(args) -> tuple:
    g, db, samples, seed, cfg = args
    c_max, _ = brute_force_maxcut(g)
    return (
        canonical_certificate(g),
        _qaoa_value(g, db, 1, cfg) / c_max,
        _qaoa_value(g, db, 2, cfg) / c_max,
        explicit_vector_cut(g, samples=samples, seed=seed).cut_value / c_max,
        local_search_cut(g, seed=seed).cut_value / c_max,
        random_cut_expectation(g) / c_max,
    )


def classical_comparison(graphs: Sequence[Graph], db: Database | None, samples: int = 1000, seed: int = 0,
                         build_cfg: OptConfig | None = None, workers: int = 1) -> ClassicalReport:
    """Per-graph approximation ratios of QAOA p=1,2 and the classical cuts.

    QAOA values come from ``db``; graphs without entries are optimized on
    demand when ``build_cfg`` is given and are an error otherwise.
    """
    out = _map(_classical_one, [(g, db, samples, seed, build_cfg) for g in graphs], workers)
    certs = [r[0] for r in out]
    ratios = {k: np.array([r[i + 1] for r in out]) for i, k in enumerate(CLASSICAL_COLUMNS)}
    return ClassicalReport(certs, ratios)


# -- graph sources and filters --------------------------------------------------------------


def erdos_renyi_connected(n: int, prob: float, count: int, seed: int = 0) -> list[Graph]:
    """``count`` connected G(n, prob) samples; disconnected draws are redrawn."""
    if not 0 < prob <= 1:
        raise ValueError("edge probability must be in (0, 1]")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    out = []
    while len(out) < count:
        mask = rng.random(len(iu[0])) < prob
        g = Graph(n, list(zip(iu[0][mask].tolist(), iu[1][mask].tolist())))
        if g.is_connected():
            out.append(g)
    return out


_OPS = {"<=": operator.le, ">=": operator.ge, "==": operator.eq, "=": operator.eq, "!=": operator.ne,
        "<": operator.lt, ">": operator.gt}
_CLAUSE = re.compile(r"^\s*([a-z_]+)\s*(<=|>=|==|!=|=|<|>)\s*(-?[0-9.]+)\s*$")
_FIELDS: dict[str, Callable[[DbEntry], float]] = {
    "n": lambda e: e.n,
    "p": lambda e: e.p,
    "m": lambda e: e.n_edges,
    "edges": lambda e: e.n_edges,
    "degree": lambda e: float(e.average_degree),
    "average_degree": lambda e: float(e.average_degree),
    "orbits": lambda e: e.orbit_count,
    "orbit_count": lambda e: e.orbit_count,
    "c_max": lambda e: e.c_max,
    "ratio": lambda e: e.ratio,
}


def parse_filter(expr: str | None) -> Callable[[DbEntry], bool] | None:
    """Entry predicate from e.g. ``"n<=7"`` or ``"n>=6 and degree<4"``.

    Clauses are joined with ``and`` or commas; ``regular==d`` selects
    d-regular graphs.
    """
    if expr is None or not expr.strip():
        return None
    preds = []
    for clause in re.split(r",|\band\b", expr):
        m = _CLAUSE.match(clause)
        if not m:
            raise ValueError(f"cannot parse filter clause {clause.strip()!r}")
        name, op, raw = m.groups()
        value = float(raw)
        cmp = _OPS[op]
        if name == "regular":
            preds.append(lambda e, v=value, c=cmp: degree_stats(e.graph).regular_degree is not None
                         and c(degree_stats(e.graph).regular_degree, v))
        elif name in _FIELDS:
            preds.append(lambda e, f=_FIELDS[name], v=value, c=cmp: c(f(e), v))
        else:
            raise ValueError(f"unknown filter field {name!r}; known: {', '.join(sorted(_FIELDS) + ['regular'])}")
    return lambda e: all(pr(e) for pr in preds)
