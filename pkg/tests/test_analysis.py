from __future__ import annotations

import io
import math

import numpy as np
import pytest

from maxcut_qaoa.analysis import (
    MissingDataError,
    PerformanceTable,
    classical_comparison,
    concentration_report,
    density_report,
    erdos_renyi_connected,
    kmeans,
    parse_filter,
    pearson,
    performance_by_degree,
    performance_by_orbits,
    performance_table,
    transfer_experiment,
    write_csv,
)
from maxcut_qaoa.graphs import complete_graph, connected_graphs_up_to, cycle_graph, enumerate_regular
from maxcut_qaoa.optimize import OptConfig
from maxcut_qaoa.paramdb import Database, build_db

FAST = OptConfig().with_restarts(p1=10, p2=10)


@pytest.fixture(scope="module")
def db5():
    return build_db(connected_graphs_up_to(5), [1, 2], FAST)


# -- kmeans ------------------------------------------------------------------


def test_kmeans_exact_points():
    pts = np.array([[0, 0], [1, 1], [5, 5]] * 4, dtype=float)
    res = kmeans(pts, 3, seed=1)
    assert res.rms == pytest.approx(0.0, abs=1e-12)
    assert sorted(map(tuple, res.centers.round(9))) == [(0, 0), (1, 1), (5, 5)]


def test_kmeans_single_cluster_is_mean(rng):
    pts = rng.normal(size=(50, 3))
    res = kmeans(pts, 1)
    assert np.allclose(res.centers[0], pts.mean(axis=0), atol=1e-12)
    assert res.rms == pytest.approx(math.sqrt(((pts - pts.mean(axis=0)) ** 2).sum() / 50))


def test_kmeans_recovers_blobs(rng):
    a = rng.normal(size=(200, 2)) * 0.01 + [0, 0]
    b = rng.normal(size=(200, 2)) * 0.01 + [3, 1]
    res = kmeans(np.vstack([a, b]), 2, seed=0)
    centers = sorted(map(tuple, res.centers))
    assert np.allclose(centers[0], a.mean(axis=0), atol=1e-6)
    assert np.allclose(centers[1], b.mean(axis=0), atol=1e-6)


def test_kmeans_assignments_nearest(rng):
    pts = rng.uniform(size=(100, 2))
    res = kmeans(pts, 5, seed=2)
    d = ((pts[:, None] - res.centers[None]) ** 2).sum(axis=2)
    assert np.array_equal(res.assignments, d.argmin(axis=1))


def test_kmeans_errors():
    with pytest.raises(ValueError):
        kmeans(np.zeros((2, 2)), 3)


# -- concentration -------------------------------------------------------------


def test_concentration_requires_degenerates(db5):
    with pytest.raises(MissingDataError):
        concentration_report(db5, 1)


def test_concentration_small_cubic():
    db = build_db(list(enumerate_regular(6, 3)) + list(enumerate_regular(8, 3)), [1], FAST,
                  enumerate_degenerates=True)
    rep = concentration_report(db, 1)
    assert rep.k == 4 and rep.n_points == 4 * 7
    assert sum(rep.counts) == rep.n_points
    assert rep.rms_overall < 0.05
    # order of graphs does not matter
    shuffled = Database(dict(reversed(list(db.entries.items()))))
    rep2 = concentration_report(shuffled, 1)
    assert np.allclose(sorted(map(tuple, rep.centers)), sorted(map(tuple, rep2.centers)))


def test_concentration_one_graph_zero_rms():
    db = build_db([complete_graph(4)], [1], FAST, enumerate_degenerates=True)
    rep = concentration_report(db, 1)
    assert rep.rms_overall == pytest.approx(0.0, abs=1e-9)
    assert all(r == pytest.approx(0.0, abs=1e-9) for r in rep.rms_per_cluster)


# -- transfer ------------------------------------------------------------------


def test_transfer_gaps_nonnegative(db5):
    targets = erdos_renyi_connected(7, 0.5, 3, seed=5)
    rep = transfer_experiment(db5, parse_filter("n<=5"), targets, 1, FAST)
    assert all(g >= -1e-9 for g in rep.gaps)
    again = transfer_experiment(db5, parse_filter("n<=5"), targets, 1, FAST)
    assert again == rep


def test_transfer_self_source_zero_gap(db5):
    g = cycle_graph(5)
    filt = lambda e: e.n == 5 and e.n_edges == 5 and e.orbit_count == 1
    rep = transfer_experiment(db5, filt, [g], 1, FAST)
    assert rep.gaps[0] == pytest.approx(0.0, abs=1e-7)


def test_erdos_renyi_connected_seeded():
    a = erdos_renyi_connected(12, 0.5, 4, seed=9)
    assert a == erdos_renyi_connected(12, 0.5, 4, seed=9)
    assert all(g.is_connected() and g.n == 12 for g in a)


# -- performance tables ------------------------------------------------------------


def test_performance_table(db5):
    table = performance_table(db5, [1, 2], include_p0=True)
    assert len(table.at_depth(0)) == len(table.at_depth(1)) == len(table.at_depth(2)) == 30
    for r in table.rows_:
        assert r.e_opt_minus_e >= 0
        assert 0 <= r.success_probability <= 1
    p1, p2 = table.by_graph(1), table.by_graph(2)
    for c in p1:
        assert p2[c].ratio >= p1[c].ratio - 1e-9
    for r in table.at_depth(0):
        assert r.ratio == pytest.approx((r.m / 2) / r.c_max)


def test_performance_by_degree(db5):
    table = performance_table(db5, [1], graph_filter=parse_filter("n==5"))
    rows = performance_by_degree(table, 1)
    assert len(rows) >= 3
    assert all(0.5 < r.mean_cut_fraction <= 1 for r in rows)
    assert sum(r.count for r in rows) == 21
    single = PerformanceTable(table.rows_[:1])
    (row,) = performance_by_degree(single, 1)
    assert row.mean_cut_fraction == pytest.approx(single.rows_[0].cut_fraction)


def test_performance_by_orbits(db5):
    table = performance_table(db5, [1], include_p0=True)
    rows = performance_by_orbits(table, 1)
    assert sum(r.count for r in rows) == 30
    assert performance_by_orbits(PerformanceTable([r for r in table.rows_ if r.average_degree >= 4]), 1,
                                 sparse_only=True) == []


def test_density_report(db5):
    table = performance_table(db5, [2])
    rep = density_report(table, 2)
    assert len(rep.points) == 30
    assert rep.correlation is not None and -1 <= rep.correlation <= 1


def test_pearson():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([3, 3, 3], [1, 2, 3]) is None
    assert pearson([1], [1]) is None


def test_classical_comparison():
    graphs = list(enumerate_regular(8, 3))
    db = build_db(graphs, [1, 2], FAST)
    rep = classical_comparison(graphs, db, samples=200, seed=1)
    for col, vals in rep.ratios.items():
        assert np.all(vals <= 1 + 1e-12), col
    assert np.all(rep.ratios["qaoa_p2"] >= rep.ratios["qaoa_p1"] - 1e-9)
    q = rep.quartiles()
    assert set(q) == {"qaoa_p1", "qaoa_p2", "explicit_vector", "local_search", "random"}
    with pytest.raises(MissingDataError):
        classical_comparison([cycle_graph(5)], db)
    built = classical_comparison([cycle_graph(5)], None, samples=50, build_cfg=FAST)
    assert built.ratios["random"][0] == pytest.approx(2.5 / 4)


# -- misc ------------------------------------------------------------------------------


def test_parse_filter(db5):
    f = parse_filter("n<=4 and degree>=2")
    sel = [e for e in db5.entries.values() if f(e)]
    assert sel and all(e.n <= 4 and e.average_degree >= 2 for e in sel)
    assert parse_filter("") is None
    reg = parse_filter("regular==2")
    assert all(e.graph.degrees() == [2] * e.n for e in db5.entries.values() if reg(e))
    with pytest.raises(ValueError):
        parse_filter("colour==3")
    with pytest.raises(ValueError):
        parse_filter("n <<= 3")


def test_write_csv_precision():
    buf = io.StringIO()
    write_csv(buf, ["a", "b"], [[1 / 3, b"Bw"], [None, 2]])
    assert buf.getvalue() == "a,b\n0.333333333333,Bw\n,2\n"
