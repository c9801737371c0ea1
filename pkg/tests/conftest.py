from __future__ import annotations

import itertools

import numpy as np
import pytest
import scipy.linalg

from maxcut_qaoa.graphs import Graph

X = np.array([[0, 1], [1, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def dense_operators(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal cost C and mixer B = sum X_i as dense 2^n matrices (vertex i = bit i)."""
    n = g.n
    x = np.arange(1 << n)
    cost = np.zeros(1 << n)
    for u, v in g.edges:
        cost += ((x >> u) ^ (x >> v)) & 1
    mixer = np.zeros((1 << n, 1 << n), dtype=complex)
    for i in range(n):
        op = np.array([[1.0]], dtype=complex)
        for q in reversed(range(n)):
            op = np.kron(op, X if q == i else I2)
        mixer += op
    return np.diag(cost).astype(complex), mixer


def dense_state(g: Graph, gamma, beta) -> np.ndarray:
    cost, mixer = dense_operators(g)
    psi = np.full(1 << g.n, 2 ** (-g.n / 2), dtype=complex)
    for gm, bt in zip(gamma, beta):
        psi = scipy.linalg.expm(-1j * gm * cost) @ psi
        psi = scipy.linalg.expm(-1j * bt * mixer) @ psi
    return psi


def dense_expectation(g: Graph, gamma, beta) -> float:
    cost, _ = dense_operators(g)
    psi = dense_state(g, gamma, beta)
    return float(np.real(psi.conj() @ cost @ psi))


def labeled_graphs(n: int):
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        yield Graph(n, [pairs[i] for i in range(len(pairs)) if mask >> i & 1])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ---------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {name}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
