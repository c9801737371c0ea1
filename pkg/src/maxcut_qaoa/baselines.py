"""Classical MaxCut references."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .graphs import Graph
from .simulator import cut_values

MAX_BRUTE_FORCE_N = 24

# Rule pinned for comparison tables: each vertex u gets the explicit vector
# v_u = sum_{w: dist(u,w) <= r} (-1)^dist (D-1)^(-dist/2) e_w with D the
# maximum degree (D-1 floored at 1), rounded by a random Gaussian hyperplane.
EXPLICIT_VECTOR_RULE = "explicit-vector-v1"


@dataclass(frozen=True)
class CutResult:
    cut_value: float
    assignment: tuple[int, ...] | None = None
    ratio: float | None = None


def brute_force_maxcut(g: Graph) -> tuple[int, int]:
    """``(c_max, number of optimal bitstrings including complements)``."""
    if g.n > MAX_BRUTE_FORCE_N:
        raise ValueError(f"brute force limited to n <= {MAX_BRUTE_FORCE_N}")
    cuts = cut_values(g, half=True)  # vertex n-1 fixed to 0
    c_max = int(cuts.max())
    return c_max, 2 * int(np.count_nonzero(cuts == c_max))


def assignment_cut(g: Graph, assignment) -> int:
    return sum(1 for u, v in g.edges if assignment[u] != assignment[v])


def random_cut_expectation(g: Graph) -> float:
    return g.m / 2


def local_search_cut(g: Graph, seed: int = 0, c_max: int | None = None) -> CutResult:
    """Steepest single-flip ascent from a seeded random assignment."""
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, size=g.n).tolist()
    nbrs = [g.neighbors(v) for v in range(g.n)]
    while True:
        best_gain, best_v = 0, -1
        for v in range(g.n):
            same = sum(1 for w in nbrs[v] if x[w] == x[v])
            gain = same - (len(nbrs[v]) - same)
            if gain > best_gain:
                best_gain, best_v = gain, v
        if best_v < 0:
            break
        x[best_v] ^= 1
    value = assignment_cut(g, x)
    return CutResult(value, tuple(x), value / c_max if c_max else None)


def _distances(g: Graph, radius: int) -> list[dict[int, int]]:
    out = []
    for s in range(g.n):
        dist = {s: 0}
        q = deque([s])
        while q:
            u = q.popleft()
            if dist[u] == radius:
                continue
            for w in g.neighbors(u):
                if w not in dist:
                    dist[w] = dist[u] + 1
                    q.append(w)
        out.append(dist)
    return out


def explicit_vectors(g: Graph, radius: int = 1) -> np.ndarray:
    """Row u is the (unnormalized) explicit vector of vertex u."""
    dmax = max(g.degrees())
    base = max(dmax - 1, 1)
    m = np.zeros((g.n, g.n))
    for u, dist in enumerate(_distances(g, radius)):
        for w, d in dist.items():
            m[u, w] = (-1) ** d * base ** (-d / 2)
    return m


def explicit_vector_cut_exact(g: Graph, radius: int = 1) -> float:
    """Closed-form expectation of hyperplane rounding: sum of angle/pi over edges."""
    m = explicit_vectors(g, radius)
    unit = m / np.linalg.norm(m, axis=1, keepdims=True)
    return float(sum(np.arccos(np.clip(unit[u] @ unit[v], -1, 1)) / np.pi for u, v in g.edges))


def explicit_vector_cut(
    g: Graph, samples: int = 1000, seed: int = 0, radius: int = 1, c_max: int | None = None
) -> CutResult:
    """Monte Carlo mean cut of the explicit-vector algorithm."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    m = explicit_vectors(g, radius)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((samples, g.n))
    side = (z @ m.T) > 0
    edges = np.array(g.edges, dtype=int).reshape(-1, 2)
    cuts = np.count_nonzero(side[:, edges[:, 0]] != side[:, edges[:, 1]], axis=1)
    mean = float(cuts.mean())
    return CutResult(mean, None, mean / c_max if c_max else None)
