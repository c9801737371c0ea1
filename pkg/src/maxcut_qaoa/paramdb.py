"""Parameter database: raw-file ingestion, compilation to a checksummed
binary file, certificate-keyed lookup with fixed-angle fallback.

Binary layout (little-endian)::

    b"QKDB" | u16 version | u32 len + metadata JSON
    u32 entry count, entries sorted by (certificate, p)
    u32 fixed-angle count, sorted by (degree, p)
    u64 checksum (first 8 bytes of BLAKE2b over everything before it)
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .angles import AngleVector, Unit, convert_units
from .baselines import brute_force_maxcut
from .graphs import Graph, canonical_certificate, degree_stats, parse_graph6, vertex_orbits
from .optimize import OptConfig, enumerate_degenerate_optima, optimize_depths
from .simulator import MaxCutSimulator
from .symmetry import graph_parity, normalize_to_sector, reduce_to_box

log = logging.getLogger(__name__)

MAGIC = b"QKDB"
FORMAT_VERSION = 1
DB_ENV_VAR = "QAOAKIT_DB"
VALIDATION_TOL = 1e-6


class DatabaseError(Exception):
    pass


class ChecksumError(DatabaseError):
    pass


class VersionError(DatabaseError):
    pass


@dataclass(frozen=True)
class DbEntry:
    certificate: bytes
    n: int
    p: int
    gamma: tuple[float, ...]  # pi units, canonical sector
    beta: tuple[float, ...]
    c_max: int
    expectation: float
    ratio: float
    orbit_count: int
    average_degree: Fraction
    source: str
    restarts: int
    degenerate_angles: tuple[AngleVector, ...] | None = None

    @property
    def angles(self) -> AngleVector:
        return AngleVector(self.gamma, self.beta, Unit.PI)

    @property
    def graph(self) -> Graph:
        return parse_graph6(self.certificate)

    @property
    def n_edges(self) -> int:
        return int(self.average_degree * self.n) // 2


@dataclass(frozen=True)
class FixedAngleEntry:
    degree: int
    p: int
    gamma: tuple[float, ...]  # pi units
    beta: tuple[float, ...]
    expected_ratio: float | None = None

    def __post_init__(self) -> None:
        if len(self.gamma) != self.p or len(self.beta) != self.p:
            raise ValueError("fixed-angle lists must have length p")

    @property
    def angles(self) -> AngleVector:
        return AngleVector(self.gamma, self.beta, Unit.PI)


@dataclass
class Database:
    entries: dict[tuple[bytes, int], DbEntry] = field(default_factory=dict)
    fixed_angles: dict[tuple[int, int], FixedAngleEntry] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    quarantined: list[tuple[str, str]] = field(default_factory=list, compare=False)

    def __len__(self) -> int:
        return len(self.entries)

    def at_depth(self, p: int) -> list[DbEntry]:
        return [e for (c, q), e in sorted(self.entries.items()) if q == p]

    def depths(self) -> list[int]:
        return sorted({p for _, p in self.entries})

    def add(self, entry: DbEntry) -> None:
        key = (entry.certificate, entry.p)
        old = self.entries.get(key)
        if old is None or entry.expectation > old.expectation:
            self.entries[key] = entry


# -- building ------------------------------------------------------------------


def _graph_features(g: Graph) -> tuple[bytes, int, Fraction]:
    return canonical_certificate(g), vertex_orbits(g).orbit_count, degree_stats(g).average_degree


def _make_entry(
    g: Graph,
    cert: bytes,
    orbit_count: int,
    c_max: int,
    angles: AngleVector,
    source: str,
    restarts: int,
    degenerate: Sequence[AngleVector] | None = None,
) -> DbEntry:
    canon = normalize_to_sector(angles.pi_units(), graph_parity(g))
    rad = canon.radians()
    value = float(MaxCutSimulator(g).expectations([rad.gamma], [rad.beta])[0])
    value = min(value, float(c_max))  # rounding can overshoot a perfect cut by an ulp
    return DbEntry(
        certificate=cert,
        n=g.n,
        p=canon.p,
        gamma=canon.gamma,
        beta=canon.beta,
        c_max=c_max,
        expectation=value,
        ratio=value / c_max,
        orbit_count=orbit_count,
        average_degree=degree_stats(g).average_degree,
        source=source,
        restarts=restarts,
        degenerate_angles=tuple(degenerate) if degenerate is not None else None,
    )


@dataclass(frozen=True)
class _BuildJob:
    graph: Graph
    p_values: tuple[int, ...]
    cfg: OptConfig
    degenerate_grid: dict[int, tuple[int, int]] | None
    source: str


def _build_one(job: _BuildJob) -> list[DbEntry]:
    g = job.graph
    cert, orbits, _ = _graph_features(g)
    # entries are stored in the canonical labeling so certificates decode to them
    canon = parse_graph6(cert)
    c_max, _ = brute_force_maxcut(canon)
    results = optimize_depths(canon, job.p_values, job.cfg)
    out = []
    for p in job.p_values:
        res = results[p]
        best, value = res.best_angles, res.best_value
        degenerate = None
        if job.degenerate_grid and p in job.degenerate_grid:
            gg, gb = job.degenerate_grid[p]
            degenerate = enumerate_degenerate_optima(canon, p, gg, gb)
            rad = degenerate[0].radians()
            dval = float(MaxCutSimulator(canon).expectations([rad.gamma], [rad.beta])[0])
            if dval > value + 1e-9:
                best, value = degenerate[0], dval
        out.append(_make_entry(canon, cert, orbits, c_max, best, job.source, res.n_restarts_used, degenerate))
    return out


DEFAULT_DEGENERATE_GRID = {1: (24, 12), 2: (24, 12)}


def build_db(
    graphs: Iterable[Graph],
    p_values: Sequence[int],
    cfg: OptConfig | None = None,
    enumerate_degenerates: bool = False,
    degenerate_grid: dict[int, tuple[int, int]] | None = None,
    workers: int = 1,
    source: str = "regenerated",
) -> Database:
    """Optimize every (graph, p) and collect the results.

    Output is independent of ``workers``: jobs are reduced in input order.
    """
    cfg = cfg or OptConfig()
    p_values = tuple(sorted(set(p_values)))
    grid = None
    if enumerate_degenerates:
        # only depths named in the grid get degenerate enumeration
        table = degenerate_grid or DEFAULT_DEGENERATE_GRID
        grid = {p: tuple(table[p]) for p in p_values if p in table and p in (1, 2)}
    jobs = []
    for g in graphs:
        if g.m == 0:
            log.warning("skipping edgeless graph %s", g)
            continue
        jobs.append(_BuildJob(g, p_values, cfg, grid, source))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_build_one, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        results = [_build_one(j) for j in jobs]
    db = Database(metadata={
        "format_version": FORMAT_VERSION,
        "build": {
            "optimizer": cfg.as_dict(),
            "p_values": list(p_values),
            "enumerate_degenerates": enumerate_degenerates,
            "degenerate_grid": {str(k): list(v) for k, v in sorted(grid.items())} if grid else None,
            "restarts_used": {str(p): cfg.restarts_for(p) for p in p_values},
        },
        "source": source,
    })
    for entries in results:
        for e in entries:
            db.add(e)
    return db


# -- raw ingestion -------------------------------------------------------------------


@dataclass(frozen=True)
class RawRecord:
    graph6: str
    p: int
    gamma: tuple[float, ...]
    beta: tuple[float, ...]
    units: Unit
    c_max: int
    expectation: float
    source: str
    restarts: int | None
    provenance: str
    degenerate: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...] | None = None


@dataclass(frozen=True)
class RawFixedAngle:
    degree: int
    p: int
    gamma: tuple[float, ...]
    beta: tuple[float, ...]
    units: Unit
    expected_ratio: float | None
    provenance: str


@dataclass
class IngestResult:
    records: list[RawRecord | RawFixedAngle]
    rejected: list[tuple[int, str]]
    warnings: list[tuple[int, str]]


RECORD_FIELDS = {"graph6", "p", "gamma", "beta", "units", "c_max", "expectation", "source", "restarts", "degenerate", "kind"}
REQUIRED_FIELDS = ("graph6", "p", "gamma", "beta", "units", "c_max", "expectation", "source")
FIXED_FIELDS = {"kind", "degree", "p", "gamma", "beta", "units", "expected_ratio"}
FIXED_REQUIRED = ("degree", "p", "gamma", "beta", "units")
CSV_COLUMNS = ["kind", "graph6", "degree", "p", "gamma", "beta", "units", "c_max", "expectation", "expected_ratio", "source", "restarts"]


class RecordError(ValueError):
    pass


def _floats(v) -> tuple[float, ...]:
    if isinstance(v, str):
        v = [x for x in v.split(";") if x.strip()]
    return tuple(float(x) for x in v)


def _parse_record(obj: dict, provenance: str) -> tuple[RawRecord | RawFixedAngle, list[str]]:
    kind = obj.get("kind") or "entry"
    allowed, required = (FIXED_FIELDS, FIXED_REQUIRED) if kind == "fixed_angle" else (RECORD_FIELDS, REQUIRED_FIELDS)
    if kind not in ("entry", "fixed_angle"):
        raise RecordError(f"unknown record kind {kind!r}")
    warns = [f"unknown field {k!r} ignored" for k in obj if k not in allowed and obj[k] not in (None, "")]
    missing = [k for k in required if obj.get(k) in (None, "")]
    if missing:
        raise RecordError(f"missing required field(s): {', '.join(missing)}")
    try:
        p = int(obj["p"])
        gamma, beta = _floats(obj["gamma"]), _floats(obj["beta"])
        units = Unit(obj["units"])
    except (ValueError, TypeError) as exc:
        raise RecordError(str(exc)) from None
    if len(gamma) != p or len(beta) != p:
        raise RecordError(f"angle lists have lengths {len(gamma)}/{len(beta)} but p={p}")
    if kind == "fixed_angle":
        er = obj.get("expected_ratio")
        return RawFixedAngle(int(obj["degree"]), p, gamma, beta, units, float(er) if er not in (None, "") else None, provenance), warns
    restarts = obj.get("restarts")
    degenerate = None
    if obj.get("degenerate"):
        degenerate = tuple((_floats(d["gamma"]), _floats(d["beta"])) for d in obj["degenerate"])
    try:
        rec = RawRecord(
            graph6=str(obj["graph6"]).strip(),
            p=p,
            gamma=gamma,
            beta=beta,
            units=units,
            c_max=int(obj["c_max"]),
            expectation=float(obj["expectation"]),
            source=str(obj["source"]),
            restarts=int(restarts) if restarts not in (None, "") else None,
            provenance=provenance,
            degenerate=degenerate,
        )
    except (ValueError, TypeError) as exc:
        raise RecordError(str(exc)) from None
    return rec, warns


def ingest_raw(path, fmt: str | None = None) -> IngestResult:
    """Parse a JSON-lines or CSV raw dataset; bad lines are rejected, not fatal."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "json_lines")
    result = IngestResult([], [], [])
    with open(path, encoding="utf-8", newline="") as fh:
        if fmt == "csv":
            rows = ((i + 2, row) for i, row in enumerate(csv.DictReader(fh)))
        elif fmt in ("json_lines", "jsonl", "json"):
            rows = _json_rows(fh, result)
        else:
            raise ValueError(f"unknown raw format {fmt!r}")
        for lineno, obj in rows:
            try:
                rec, warns = _parse_record(obj, f"{path.name}:{lineno}")
            except RecordError as exc:
                log.warning("%s:%d rejected: %s", path, lineno, exc)
                result.rejected.append((lineno, str(exc)))
                continue
            for w in warns:
                log.warning("%s:%d %s", path, lineno, w)
                result.warnings.append((lineno, w))
            result.records.append(rec)
    return result


def _json_rows(fh, result: IngestResult):
    for lineno, line in enumerate(fh, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            result.rejected.append((lineno, f"malformed JSON: {exc.msg}"))
            continue
        if not isinstance(obj, dict):
            result.rejected.append((lineno, "record is not a JSON object"))
            continue
        yield lineno, obj


def record_to_json(rec: RawRecord | RawFixedAngle) -> str:
    if isinstance(rec, RawFixedAngle):
        obj = {"kind": "fixed_angle", "degree": rec.degree, "p": rec.p, "gamma": list(rec.gamma),
               "beta": list(rec.beta), "units": rec.units.value, "expected_ratio": rec.expected_ratio}
    else:
        obj = {"graph6": rec.graph6, "p": rec.p, "gamma": list(rec.gamma), "beta": list(rec.beta),
               "units": rec.units.value, "c_max": rec.c_max, "expectation": rec.expectation,
               "source": rec.source, "restarts": rec.restarts}
    return json.dumps(obj)


def compile_db(records: Iterable[RawRecord | RawFixedAngle], metadata: dict | None = None) -> Database:
    """Certificates, orbit counts and canonical angles for every record.

    Each record is re-simulated; if the stored expectation only matches with
    the sign of gamma flipped, the angles are remapped to this package's
    convention.  Records that match under neither convention, or violate
    0 < expectation <= c_max, are quarantined (see ``Database.quarantined``).
    """
    db = Database(metadata=dict(metadata or {"format_version": FORMAT_VERSION, "source": "ingested"}))
    features: dict[str, tuple] = {}
    for rec in records:
        if isinstance(rec, RawFixedAngle):
            a = convert_units(AngleVector(rec.gamma, rec.beta, rec.units), Unit.PI)
            db.fixed_angles[(rec.degree, rec.p)] = FixedAngleEntry(rec.degree, rec.p, a.gamma, a.beta, rec.expected_ratio)
            continue
        try:
            g = parse_graph6(rec.graph6)
        except ValueError as exc:
            db.quarantined.append((rec.provenance, f"bad graph6: {exc}"))
            continue
        if g.m == 0:
            db.quarantined.append((rec.provenance, "edgeless graph"))
            continue
        if rec.graph6 not in features:
            cert, orbits, _ = _graph_features(g)
            canon = parse_graph6(cert)
            features[rec.graph6] = (cert, orbits, brute_force_maxcut(g)[0], canon)
        cert, orbits, c_max, canon = features[rec.graph6]
        if rec.c_max != c_max:
            db.quarantined.append((rec.provenance, f"stored c_max={rec.c_max} but brute force gives {c_max}"))
            continue
        if not 0 < rec.expectation <= c_max + 1e-9:
            db.quarantined.append((rec.provenance, f"expectation {rec.expectation} outside (0, c_max={c_max}]"))
            continue
        angles = convert_units(AngleVector(rec.gamma, rec.beta, rec.units), Unit.RAD)
        sim = MaxCutSimulator(g)
        value = float(sim.expectations([angles.gamma], [angles.beta])[0])
        if abs(value - rec.expectation) > VALIDATION_TOL:
            flipped = AngleVector(tuple(-x for x in angles.gamma), angles.beta, Unit.RAD)
            value_f = float(sim.expectations([flipped.gamma], [flipped.beta])[0])
            if abs(value_f - rec.expectation) > VALIDATION_TOL:
                db.quarantined.append((rec.provenance,
                    f"convention mismatch: stored {rec.expectation}, re-simulated {value} (gamma sign flipped: {value_f})"))
                continue
            log.info("%s: accepted under flipped gamma sign", rec.provenance)
            angles = flipped
        degenerate = None
        if rec.degenerate:
            degenerate = tuple(reduce_to_box(convert_units(AngleVector(gm, bt, rec.units), Unit.PI)) for gm, bt in rec.degenerate)
        # angle symmetries do not depend on vertex labels, so canonical relabeling keeps angles valid
        entry = _make_entry(canon, cert, orbits, c_max, angles, rec.source, rec.restarts or 0, degenerate)
        db.add(entry)
    return db


# -- binary file --------------------------------------------------------------------------


def _pack_angles(w: io.BytesIO, xs: Sequence[float]) -> None:
    w.write(struct.pack(f"<{len(xs)}d", *xs))


def _entry_bytes(e: DbEntry) -> bytes:
    w = io.BytesIO()
    w.write(struct.pack("<H", len(e.certificate)))
    w.write(e.certificate)
    w.write(struct.pack("<BB", e.n, e.p))
    _pack_angles(w, e.gamma)
    _pack_angles(w, e.beta)
    w.write(struct.pack("<Iddh", e.c_max, e.expectation, e.ratio, e.orbit_count))
    w.write(struct.pack("<II", e.average_degree.numerator, e.average_degree.denominator))
    src = e.source.encode("utf-8")
    w.write(struct.pack("<H", len(src)))
    w.write(src)
    w.write(struct.pack("<I", e.restarts))
    if e.degenerate_angles is None:
        w.write(struct.pack("<i", -1))
    else:
        w.write(struct.pack("<i", len(e.degenerate_angles)))
        for a in e.degenerate_angles:
            _pack_angles(w, a.gamma)
            _pack_angles(w, a.beta)
    return w.getvalue()


def dumps_db(db: Database) -> bytes:
    w = io.BytesIO()
    w.write(MAGIC)
    w.write(struct.pack("<H", FORMAT_VERSION))
    meta = json.dumps(db.metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    w.write(struct.pack("<I", len(meta)))
    w.write(meta)
    w.write(struct.pack("<I", len(db.entries)))
    for key in sorted(db.entries):
        w.write(_entry_bytes(db.entries[key]))
    w.write(struct.pack("<I", len(db.fixed_angles)))
    for key in sorted(db.fixed_angles):
        f = db.fixed_angles[key]
        w.write(struct.pack("<HH", f.degree, f.p))
        _pack_angles(w, f.gamma)
        _pack_angles(w, f.beta)
        w.write(struct.pack("<Bd", f.expected_ratio is not None, f.expected_ratio or 0.0))
    body = w.getvalue()
    return body + _checksum(body)


def _checksum(body: bytes) -> bytes:
    return hashlib.blake2b(body, digest_size=8).digest()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise DatabaseError("unexpected end of database file")
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return vals

    def raw(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise DatabaseError("unexpected end of database file")
        out = self.data[self.pos:self.pos + size]
        self.pos += size
        return out


def loads_db(data: bytes) -> Database:
    if len(data) < 4 or data[:4] != MAGIC:
        raise DatabaseError("not a parameter database (bad magic)")
    if len(data) < 14:
        raise ChecksumError("database file truncated")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != FORMAT_VERSION:
        raise VersionError(f"database format version {version} is not supported (expected {FORMAT_VERSION})")
    body, tail = data[:-8], data[-8:]
    if _checksum(body) != tail:
        raise ChecksumError("database checksum mismatch (file corrupt or truncated)")
    r = _Reader(body)
    r.pos = 6
    (mlen,) = r.take("<I")
    metadata = json.loads(r.raw(mlen).decode("utf-8"))
    (count,) = r.take("<I")
    db = Database(metadata=metadata)
    for _ in range(count):
        (clen,) = r.take("<H")
        cert = r.raw(clen)
        n, p = r.take("<BB")
        gamma = r.take(f"<{p}d")
        beta = r.take(f"<{p}d")
        c_max, expectation, ratio, orbits = r.take("<Iddh")
        num, den = r.take("<II")
        (slen,) = r.take("<H")
        source = r.raw(slen).decode("utf-8")
        (restarts,) = r.take("<I")
        (ndeg,) = r.take("<i")
        degenerate = None
        if ndeg >= 0:
            degenerate = tuple(AngleVector(r.take(f"<{p}d"), r.take(f"<{p}d"), Unit.PI) for _ in range(ndeg))
        e = DbEntry(cert, n, p, tuple(gamma), tuple(beta), c_max, expectation, ratio, orbits,
                    Fraction(num, den), source, restarts, degenerate)
        db.entries[(cert, p)] = e
    (nfixed,) = r.take("<I")
    for _ in range(nfixed):
        degree, p = r.take("<HH")
        gamma = r.take(f"<{p}d")
        beta = r.take(f"<{p}d")
        has, ratio = r.take("<Bd")
        db.fixed_angles[(degree, p)] = FixedAngleEntry(degree, p, tuple(gamma), tuple(beta), ratio if has else None)
    if r.pos != len(body):
        raise DatabaseError("trailing bytes in database file")
    return db


def save_db(db: Database, path) -> None:
    Path(path).write_bytes(dumps_db(db))


def load_db(path) -> Database:
    return loads_db(Path(path).read_bytes())


def merge_db(*dbs: Database) -> Database:
    out = Database(metadata={"format_version": FORMAT_VERSION, "merged": [d.metadata for d in dbs]})
    for d in dbs:
        for e in d.entries.values():
            out.add(e)
        out.fixed_angles.update(d.fixed_angles)
    return out


# -- queries ---------------------------------------------------------------------------------


class LookupKind(str, Enum):
    EXACT = "Exact"
    FIXED_ANGLE_FALLBACK = "FixedAngleFallback"
    NOT_FOUND = "NotFound"


@dataclass(frozen=True)
class LookupResult:
    kind: LookupKind
    angles: AngleVector | None = None
    entry: DbEntry | FixedAngleEntry | None = None


def lookup(db: Database, g: Graph, p: int, fallback: bool = True) -> LookupResult:
    cert = canonical_certificate(g)
    e = db.entries.get((cert, p))
    if e is not None:
        return LookupResult(LookupKind.EXACT, e.angles, e)
    if fallback:
        degrees = sorted(d for d, q in db.fixed_angles if q == p)
        if degrees:
            target = math.floor(float(degree_stats(g).average_degree) + 0.5)
            d = min(degrees, key=lambda d: (abs(d - target), d))
            f = db.fixed_angles[(d, p)]
            return LookupResult(LookupKind.FIXED_ANGLE_FALLBACK, f.angles, f)
    return LookupResult(LookupKind.NOT_FOUND)


EntryFilter = Callable[[DbEntry], bool]


def median_angles(db: Database, graph_filter: EntryFilter | None, p: int) -> AngleVector:
    """Coordinate-wise median (pi units) over the selected entries at depth p.

    Each entry is first mapped to its smallest-magnitude symmetric image so
    that all graphs, whatever their degree parity, sit in one sector.
    """
    chosen = [e for e in db.at_depth(p) if graph_filter is None or graph_filter(e)]
    if not chosen:
        raise DatabaseError(f"no entries at p={p} match the filter")
    points = np.array([
        normalize_to_sector(e.angles, graph_parity(e.graph), mode="magnitude").flat() for e in chosen
    ])
    med = np.median(points, axis=0)
    return AngleVector.from_flat(med, Unit.PI)
