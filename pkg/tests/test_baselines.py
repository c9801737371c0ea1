from __future__ import annotations


import numpy as np
import pytest

from maxcut_qaoa.baselines import (
    assignment_cut,
    brute_force_maxcut,
    explicit_vector_cut,
    explicit_vector_cut_exact,
    explicit_vectors,
    local_search_cut,
    random_cut_expectation,
)
from maxcut_qaoa.graphs import Graph, complete_graph, cycle_graph, enumerate_connected, enumerate_regular, petersen_graph


def gray_code_maxcut(g: Graph) -> tuple[int, int]:
    """Independent oracle: walk all 2^n assignments in Gray-code order."""
    x = [0] * g.n
    cut = 0
    best, count = 0, 1
    for k in range(1, 1 << g.n):
        v = (k & -k).bit_length() - 1
        delta = sum(1 if x[w] == x[v] else -1 for w in g.neighbors(v))
        x[v] ^= 1
        cut += delta
        if cut > best:
            best, count = cut, 1
        elif cut == best:
            count += 1
    return best, count


def test_brute_force_examples():
    assert brute_force_maxcut(complete_graph(2)) == (1, 2)
    assert brute_force_maxcut(complete_graph(3)) == (2, 6)
    assert brute_force_maxcut(petersen_graph())[0] == 12
    assert brute_force_maxcut(cycle_graph(6)) == (6, 2)


def test_brute_force_matches_gray_code():
    for n in range(2, 7):
        for g in enumerate_connected(n):
            assert brute_force_maxcut(g) == gray_code_maxcut(g)


def test_brute_force_limit():
    with pytest.raises(ValueError):
        brute_force_maxcut(Graph(25))


def test_local_search_is_local_optimum():
    for g in list(enumerate_regular(10, 3))[:5]:
        res = local_search_cut(g, seed=7)
        assert res.cut_value == assignment_cut(g, res.assignment)
        for v in range(g.n):
            flipped = list(res.assignment)
            flipped[v] ^= 1
            assert assignment_cut(g, flipped) <= res.cut_value
        assert local_search_cut(g, seed=7) == res


def test_random_cut():
    assert random_cut_expectation(petersen_graph()) == 7.5


def test_explicit_vectors_structure():
    g = cycle_graph(5)
    m = explicit_vectors(g)
    assert np.allclose(np.diag(m), 1.0)
    assert m[0, 1] == pytest.approx(-1.0)  # D - 1 = 1 for a cycle
    assert m[0, 2] == 0.0


def test_explicit_vector_monte_carlo_matches_exact():
    for g in [petersen_graph(), next(enumerate_regular(12, 3)), cycle_graph(7)]:
        exact = explicit_vector_cut_exact(g)
        mc = explicit_vector_cut(g, samples=20000, seed=3)
        # standard error of the mean cut is below m / sqrt(4 * samples)
        assert mc.cut_value == pytest.approx(exact, abs=4 * g.m / np.sqrt(4 * 20000))
        assert mc.cut_value <= brute_force_maxcut(g)[0]


def test_explicit_vector_seeded():
    g = petersen_graph()
    assert explicit_vector_cut(g, 100, seed=1) == explicit_vector_cut(g, 100, seed=1)
    with pytest.raises(ValueError):
        explicit_vector_cut(g, 0)


def test_explicit_vector_beats_random_on_cubic():
    for g in enumerate_regular(10, 3):
        assert explicit_vector_cut_exact(g) > random_cut_expectation(g)
