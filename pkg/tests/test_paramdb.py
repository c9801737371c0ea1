from __future__ import annotations

import json
import math
import random

import pytest

from maxcut_qaoa.angles import AngleVector, Unit
from maxcut_qaoa.graphs import (
    Graph,
    canonical_certificate,
    complete_graph,
    connected_graphs_up_to,
    path_graph,
    write_graph6,
)
from maxcut_qaoa.optimize import OptConfig
from maxcut_qaoa.paramdb import (
    ChecksumError,
    Database,
    DatabaseError,
    FixedAngleEntry,
    LookupKind,
    RawFixedAngle,
    RawRecord,
    VersionError,
    build_db,
    compile_db,
    dumps_db,
    ingest_raw,
    load_db,
    loads_db,
    lookup,
    median_angles,
    save_db,
)
from maxcut_qaoa.simulator import expected_cut
from maxcut_qaoa.symmetry import graph_parity, normalize_to_sector


@pytest.fixture(scope="module")
def db5():
    return build_db(connected_graphs_up_to(5), [1])


def k3_record(**over):
    # K3 at its p=1 optimum (gamma, beta) = (-0.8040867..., 0.0979566...) pi gives the perfect cut 2
    base = dict(graph6="Bw", p=1, gamma=[-0.8040867239876166], beta=[0.09795663800894695], units="pi",
                c_max=2, expectation=2.0, source="test")
    base.update(over)
    return base


# -- build ------------------------------------------------------------------


def test_build_counts_and_invariants(db5):
    assert len(db5) == 30
    for e in db5.entries.values():
        assert e.ratio == pytest.approx(e.expectation / e.c_max, abs=1e-12)
        assert 0 < e.ratio <= 1
        assert normalize_to_sector(e.angles, graph_parity(e.graph)) == e.angles
        assert expected_cut(e.graph, e.angles.radians()) == pytest.approx(e.expectation, abs=1e-8)
        assert canonical_certificate(e.graph) == e.certificate


def test_build_k2_value(db5):
    e = db5.entries[(canonical_certificate(complete_graph(2)), 1)]
    assert e.expectation == pytest.approx(1.0, abs=1e-9)
    assert e.restarts == 50


def test_build_deterministic_bytes(db5):
    again = build_db(connected_graphs_up_to(5), [1])
    assert dumps_db(again) == dumps_db(db5)


def test_build_skips_edgeless(caplog):
    db = build_db([Graph(3), path_graph(3)], [1], OptConfig().with_restarts(p1=5))
    assert len(db) == 1
    assert "edgeless" in caplog.text


def test_build_with_degenerates():
    db = build_db([complete_graph(4)], [1], OptConfig().with_restarts(p1=5), enumerate_degenerates=True)
    (e,) = db.entries.values()
    assert len(e.degenerate_angles) == 4
    assert db.metadata["build"]["restarts_used"] == {"1": 5}


def test_build_metadata_restart_schedule():
    db = build_db([complete_graph(2)], [1, 2, 3])
    assert db.metadata["build"]["restarts_used"] == {"1": 50, "2": 100, "3": 1000}


# -- persistence ------------------------------------------------------------------


def test_roundtrip(db5, tmp_path):
    path = tmp_path / "db.bin"
    save_db(db5, path)
    assert load_db(path) == db5


def test_roundtrip_with_degenerates_and_fixed():
    db = build_db([complete_graph(4)], [1], OptConfig().with_restarts(p1=5), enumerate_degenerates=True)
    db.fixed_angles[(3, 1)] = FixedAngleEntry(3, 1, (0.2,), (0.12,), 0.69)
    db.fixed_angles[(4, 1)] = FixedAngleEntry(4, 1, (0.15,), (0.1,), None)
    assert loads_db(dumps_db(db)) == db


def test_load_errors(db5):
    data = dumps_db(db5)
    with pytest.raises(ChecksumError):
        loads_db(data[:-10])
    corrupted = bytearray(data)
    corrupted[40] ^= 1
    with pytest.raises(ChecksumError):
        loads_db(bytes(corrupted))
    with pytest.raises(DatabaseError):
        loads_db(b"NOPE" + data[4:])
    future = bytearray(data)
    future[4:6] = (2).to_bytes(2, "little")
    with pytest.raises(VersionError):
        loads_db(bytes(future))


def test_entries_sorted_in_file(db5):
    # first entry after the header is the smallest certificate
    data = dumps_db(db5)
    mlen = int.from_bytes(data[6:10], "little")
    pos = 10 + mlen + 4
    clen = int.from_bytes(data[pos:pos + 2], "little")
    assert data[pos + 2:pos + 2 + clen] == min(c for c, _ in db5.entries)


# -- lookup ------------------------------------------------------------------------


def test_lookup_exact_and_relabel_invariance(db5):
    g = path_graph(3)
    res = lookup(db5, g, 1)
    assert res.kind is LookupKind.EXACT
    assert res.entry.certificate == canonical_certificate(g)
    rnd = random.Random(1)
    for g in connected_graphs_up_to(5, 3):
        ref = lookup(db5, g, 1)
        perm = list(range(g.n))
        rnd.shuffle(perm)
        assert lookup(db5, g.relabel(perm), 1) == ref


def test_lookup_fallback():
    db = Database()
    db.fixed_angles[(3, 1)] = FixedAngleEntry(3, 1, (0.19,), (0.12,), 0.69)
    db.fixed_angles[(5, 1)] = FixedAngleEntry(5, 1, (0.15,), (0.1,), None)
    # 7-prism: 3-regular on 14 vertices, absent from any n <= 12 database
    g14 = Graph(14, [(i, (i + 1) % 7) for i in range(7)] + [(7 + i, 7 + (i + 1) % 7) for i in range(7)]
                + [(i, i + 7) for i in range(7)])
    res = lookup(db, g14, 1)
    assert res.kind is LookupKind.FIXED_ANGLE_FALLBACK and res.entry.degree == 3
    # degree 4 is equidistant from 3 and 5: lower wins
    res = lookup(db, complete_graph(5), 1)
    assert res.entry.degree == 3
    assert lookup(db, g14, 1, fallback=False).kind is LookupKind.NOT_FOUND
    assert lookup(db, g14, 7).kind is LookupKind.NOT_FOUND


# -- median ----------------------------------------------------------------------


def test_median_single_and_odd_count(db5):
    one = Database()
    e = db5.entries[(canonical_certificate(path_graph(3)), 1)]
    one.add(e)
    med = median_angles(one, None, 1)
    assert med.gamma == pytest.approx(e.gamma) and med.beta == pytest.approx(e.beta)
    with pytest.raises(DatabaseError):
        median_angles(one, lambda e: e.n > 10, 1)


def test_median_of_synthetic_entries():
    from dataclasses import replace

    base = build_db([path_graph(3)], [1], OptConfig().with_restarts(p1=3))
    (e,) = base.entries.values()
    db = Database()
    for i, gm in enumerate([-0.1, -0.2, -0.3]):
        db.entries[(bytes([i]), 1)] = replace(e, certificate=e.certificate, gamma=(gm,), beta=(-0.1,))
    assert median_angles(db, None, 1).gamma[0] == pytest.approx(-0.2)
    db.entries[(b"\x09", 1)] = replace(e, gamma=(-0.4,), beta=(-0.1,))
    assert median_angles(db, None, 1).gamma[0] == pytest.approx(-0.25)


# -- ingestion --------------------------------------------------------------------


def write_jsonl(path, objs):
    path.write_text("\n".join(o if isinstance(o, str) else json.dumps(o) for o in objs) + "\n")


def test_ingest_json_and_csv_equivalent(tmp_path):
    js = tmp_path / "a.jsonl"
    write_jsonl(js, [k3_record()])
    cs = tmp_path / "a.csv"
    r = k3_record()
    cs.write_text("graph6,p,gamma,beta,units,c_max,expectation,source\n"
                  f"Bw,1,{r['gamma'][0]},{r['beta'][0]},pi,2,2.0,test\n")
    a = ingest_raw(js)
    b = ingest_raw(cs)
    assert len(a.records) == len(b.records) == 1
    ra, rb = a.records[0], b.records[0]
    assert (ra.graph6, ra.p, ra.gamma, ra.beta, ra.units, ra.c_max, ra.expectation) == \
           (rb.graph6, rb.p, rb.gamma, rb.beta, rb.units, rb.c_max, rb.expectation)


def test_ingest_rejects_and_warns(tmp_path):
    js = tmp_path / "bad.jsonl"
    write_jsonl(js, [
        k3_record(),
        k3_record(gamma=[0.1, 0.2]),
        "{not json",
        {k: v for k, v in k3_record().items() if k != "c_max"},
        k3_record(color="blue"),
        k3_record(units="degrees"),
    ])
    res = ingest_raw(js)
    assert len(res.records) == 2
    assert [ln for ln, _ in res.rejected] == [2, 3, 4, 6]
    assert "p=1" in res.rejected[0][1]
    assert "c_max" in res.rejected[2][1]
    assert res.warnings and res.warnings[0][0] == 5


def test_ingest_fixed_angle_records(tmp_path):
    js = tmp_path / "fixed.jsonl"
    write_jsonl(js, [{"kind": "fixed_angle", "degree": 3, "p": 1, "gamma": [0.616], "beta": [0.393],
                      "units": "rad", "expected_ratio": 0.6925}])
    res = ingest_raw(js)
    assert isinstance(res.records[0], RawFixedAngle)
    db = compile_db(res.records)
    f = db.fixed_angles[(3, 1)]
    assert f.gamma[0] == pytest.approx(0.616 / math.pi)


def _record(obj, where="t:1"):
    return RawRecord(obj["graph6"], obj["p"], tuple(obj["gamma"]), tuple(obj["beta"]), Unit(obj["units"]),
                     obj["c_max"], obj["expectation"], obj["source"], obj.get("restarts"), where)


def test_compile_dedups_relabelings():
    p3a = write_graph6(Graph(3, [(0, 1), (1, 2)]))
    p3b = write_graph6(Graph(3, [(0, 2), (1, 2)]))
    assert p3a != p3b
    a = AngleVector((-1 / 3,), (-0.125,), Unit.PI)
    f = expected_cut(path_graph(3), a.radians())
    recs = [_record(dict(graph6=s, p=1, gamma=a.gamma, beta=a.beta, units="pi", c_max=2, expectation=f,
                         source="x")) for s in (p3a, p3b)]
    db = compile_db(recs)
    assert len(db) == 1 and not db.quarantined


def test_compile_flipped_gamma_convention():
    g = path_graph(4)
    a = AngleVector((0.3,), (0.15,), Unit.PI)
    f_flipped = expected_cut(g, AngleVector((-0.3 * math.pi,), (0.15 * math.pi,)))
    assert abs(f_flipped - expected_cut(g, a.radians())) > 1e-3
    rec = _record(dict(graph6=write_graph6(g), p=1, gamma=[0.3], beta=[0.15], units="pi", c_max=3,
                       expectation=f_flipped, source="other-convention"))
    db = compile_db([rec])
    assert not db.quarantined
    (e,) = db.entries.values()
    assert e.expectation == pytest.approx(f_flipped, abs=1e-8)


def test_compile_quarantines():
    ok = k3_record()
    recs = [
        _record(ok, "t:1"),
        _record(dict(ok, expectation=2.5), "t:2"),
        _record(dict(ok, expectation=1.3), "t:3"),
        _record(dict(ok, c_max=3, expectation=2.0), "t:4"),
    ]
    db = compile_db(recs)
    assert len(db) == 1
    assert [w for w, _ in db.quarantined] == ["t:2", "t:3", "t:4"]
    assert "convention mismatch" in db.quarantined[1][1]


def test_compile_keeps_higher_expectation():
    g = path_graph(3)
    good = AngleVector((-1 / 3,), (-0.125,), Unit.PI)
    worse = AngleVector((-0.2,), (-0.1,), Unit.PI)
    recs = [_record(dict(graph6=write_graph6(g), p=1, gamma=a.gamma, beta=a.beta, units="pi", c_max=2,
                         expectation=expected_cut(g, a.radians()), source=s)) for a, s in ((worse, "w"), (good, "g"))]
    (e,) = compile_db(recs).entries.values()
    assert e.source == "g"
