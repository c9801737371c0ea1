"""Simple undirected graphs: graph6 codec, canonical certificates,
vertex orbits and exhaustive enumeration of small connected graphs.

Canonical labeling uses individualization-refinement: an equitable
ordered partition is refined, the first non-singleton cell is split by
individualizing each of its vertices in turn, and the minimum adjacency
code over all leaves is kept.  Automorphisms discovered at equal leaves
prune children that lie in one orbit of the prefix stabilizer.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

MAX_VERTICES = 62
GRAPH6_HEADER = ">>graph6<<"


class GraphError(ValueError):
    pass


class Graph6Error(GraphError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on vertices ``0 .. n-1``.

    ``edges`` is normalized to a sorted tuple of ``(u, v)`` with ``u < v``,
    so two graphs with the same edge set compare equal.
    """

    n: int
    edges: tuple[tuple[int, int], ...] = ()
    _adj: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = self.n
        if not 1 <= n <= MAX_VERTICES:
            raise GraphError(f"vertex count {n} outside [1, {MAX_VERTICES}]")
        norm = set()
        for e in self.edges:
            u, v = (int(x) for x in e)
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) has a vertex out of range for n={n}")
            norm.add((u, v) if u < v else (v, u))
        edges = tuple(sorted(norm))
        adj = [0] * n
        for u, v in edges:
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_adj", tuple(adj))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def adjacency(self) -> tuple[int, ...]:
        """Neighbor sets as bitmasks, one int per vertex."""
        return self._adj

    def degrees(self) -> list[int]:
        return [a.bit_count() for a in self._adj]

    def neighbors(self, v: int) -> list[int]:
        a = self._adj[v]
        return [u for u in range(self.n) if a >> u & 1]

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self._adj[u] >> v & 1)

    def is_connected(self) -> bool:
        seen = 1
        frontier = 1
        full = (1 << self.n) - 1
        while frontier:
            nxt = 0
            f = frontier
            while f:
                low = f & -f
                nxt |= self._adj[low.bit_length() - 1]
                f ^= low
            frontier = nxt & ~seen
            seen |= nxt
        return seen == full

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Graph with vertex ``v`` renamed to ``perm[v]``."""
        return Graph(self.n, tuple((perm[u], perm[v]) for u, v in self.edges))

    def __str__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


def graph_from_edges(n: int, edges: Iterable[Sequence[int]]) -> Graph:
    return Graph(n, tuple(tuple(e) for e in edges))


# -- named graphs used throughout tests and examples -----------------------


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple(itertools.combinations(range(n), 2)))


def path_graph(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def cycle_graph(n: int) -> Graph:
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)))


def star_graph(leaves: int) -> Graph:
    """Center 0 joined to ``leaves`` leaves (n = leaves + 1)."""
    return Graph(leaves + 1, tuple((0, i) for i in range(1, leaves + 1)))


def petersen_graph() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return Graph(10, tuple(outer + spokes + inner))


# -- graph6 ------------------------------------------------------------------


def write_graph6(g: Graph) -> str:
    n = g.n
    if n > MAX_VERTICES:
        raise Graph6Error("extended graph6 length encoding is not supported")
    out = [chr(n + 63)]
    acc = 0
    nbits = 0
    adj = g.adjacency
    for j in range(1, n):
        row = adj[j]
        for i in range(j):
            acc = (acc << 1) | (row >> i & 1)
            nbits += 1
            if nbits == 6:
                out.append(chr(acc + 63))
                acc = 0
                nbits = 0
    if nbits:
        out.append(chr((acc << (6 - nbits)) + 63))
    return "".join(out)


def parse_graph6(text: str | bytes) -> Graph:
    if isinstance(text, bytes):
        text = text.decode("ascii")
    s = text.strip()
    if s.startswith(GRAPH6_HEADER):
        s = s[len(GRAPH6_HEADER):].strip()
    if not s:
        raise Graph6Error("empty graph6 string")
    vals = []
    for ch in s:
        o = ord(ch)
        if not 63 <= o <= 126:
            raise Graph6Error(f"byte {o} outside [63, 126]")
        vals.append(o - 63)
    if vals[0] == 63:
        raise Graph6Error("extended graph6 length encoding (n > 62) is not supported")
    n = vals[0]
    if n < 1:
        raise Graph6Error("graph6 with zero vertices")
    nbits = n * (n - 1) // 2
    nchars = (nbits + 5) // 6
    payload = vals[1:]
    if len(payload) < nchars:
        raise Graph6Error(f"truncated graph6 payload: need {nchars} bytes, got {len(payload)}")
    if len(payload) > nchars:
        raise Graph6Error(f"trailing data after graph6 payload ({len(payload) - nchars} extra bytes)")
    edges = []
    k = 0
    for j in range(1, n):
        for i in range(j):
            if payload[k // 6] >> (5 - k % 6) & 1:
                edges.append((i, j))
            k += 1
    return Graph(n, tuple(edges))


def read_graph6_file(path) -> list[Graph]:
    graphs = []
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line == GRAPH6_HEADER:
                continue
            try:
                graphs.append(parse_graph6(line))
            except Graph6Error as exc:
                raise Graph6Error(f"{path}:{lineno}: {exc}") from None
    return graphs


def write_graph6_file(path, graphs: Iterable[Graph]) -> int:
    count = 0
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for g in graphs:
            fh.write(write_graph6(g) + "\n")
            count += 1
    return count


# -- canonical labeling --------------------------------------------------------


def _refine(cells: list[list[int]], adj: Sequence[int]) -> list[list[int]]:
    """Refine an ordered partition to the coarsest equitable refinement.

    Cells split in place, fragments ordered by ascending neighbor count, so
    the result is a label-invariant function of (graph, partition).
    """
    cells = [c for c in cells]
    queue = [_mask(c) for c in cells]
    qi = 0
    while qi < len(queue):
        w = queue[qi]
        qi += 1
        out = []
        changed = False
        for cell in cells:
            if len(cell) == 1:
                out.append(cell)
                continue
            groups: dict[int, list[int]] = {}
            for v in cell:
                groups.setdefault((adj[v] & w).bit_count(), []).append(v)
            if len(groups) == 1:
                out.append(cell)
                continue
            changed = True
            for key in sorted(groups):
                frag = groups[key]
                out.append(frag)
                queue.append(_mask(frag))
        if changed:
            cells = out
    return cells


def _mask(vs: Iterable[int]) -> int:
    m = 0
    for v in vs:
        m |= 1 << v
    return m


def _leaf_code(order: Sequence[int], adj: Sequence[int]) -> int:
    # bits in graph6 column order: (0,1), (0,2), (1,2), (0,3), ...
    code = 0
    for j in range(1, len(order)):
        row = adj[order[j]]
        for i in range(j):
            code = (code << 1) | (row >> order[i] & 1)
    return code


def _orbit_reps(candidates: list[int], gens: list[tuple[int, ...]]) -> dict[int, int]:
    parent = {v: v for v in candidates}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for g in gens:
        for v in candidates:
            w = g[v]
            if w in parent:
                a, b = find(v), find(w)
                if a != b:
                    parent[max(a, b)] = min(a, b)
    return {v: find(v) for v in candidates}


class _Canonizer:
    def __init__(self, g: Graph):
        self.adj = g.adjacency
        self.n = g.n
        self.best_code: int | None = None
        self.best_order: list[int] | None = None
        self.automorphisms: list[tuple[int, ...]] = []

    def run(self, cells: list[list[int]]) -> None:
        self._search(cells, [])

    def _search(self, cells: list[list[int]], prefix: list[int]) -> None:
        cells = _refine(cells, self.adj)
        target = next((i for i, c in enumerate(cells) if len(c) > 1), None)
        if target is None:
            self._leaf([c[0] for c in cells])
            return
        cell = sorted(cells[target])
        explored: set[int] = set()
        for v in cell:
            gens = [a for a in self.automorphisms if all(a[x] == x for x in prefix)]
            if gens:
                reps = _orbit_reps(cell, gens)
                if reps[v] in explored:
                    continue
                explored = {reps[u] for u in explored} | {reps[v]}
            else:
                explored.add(v)
            rest = [u for u in cells[target] if u != v]
            child = cells[:target] + [[v], rest] + cells[target + 1:]
            self._search(child, prefix + [v])

    def _leaf(self, order: list[int]) -> None:
        code = _leaf_code(order, self.adj)
        if self.best_code is None or code < self.best_code:
            self.best_code = code
            self.best_order = order
        elif code == self.best_code:
            auto = [0] * self.n
            for a, b in zip(self.best_order, order):
                auto[a] = b
            auto_t = tuple(auto)
            if any(auto_t[i] != i for i in range(self.n)) and auto_t not in self.automorphisms:
                self.automorphisms.append(auto_t)


def canonical_labeling(g: Graph, partition: Sequence[Sequence[int]] | None = None) -> list[int]:
    """Return ``order`` such that ``order[i]`` is the vertex placed at position i."""
    cells = [list(c) for c in partition] if partition else [list(range(g.n))]
    c = _Canonizer(g)
    c.run(cells)
    return c.best_order


def canonical_form(g: Graph) -> Graph:
    order = canonical_labeling(g)
    new_label = [0] * g.n
    for pos, v in enumerate(order):
        new_label[v] = pos
    return g.relabel(new_label)


def canonical_certificate(g: Graph) -> bytes:
    """graph6 bytes of the canonically relabeled graph; equal iff isomorphic."""
    return write_graph6(canonical_form(g)).encode("ascii")


def _colored_code(g: Graph, cells: list[list[int]]) -> int:
    c = _Canonizer(g)
    c.run(cells)
    return c.best_code


def automorphism_generators(g: Graph) -> list[tuple[int, ...]]:
    """Automorphisms found while canonicalizing (not necessarily a full generating set)."""
    c = _Canonizer(g)
    c.run([list(range(g.n))])
    return list(c.automorphisms)


# -- orbits and degree statistics ---------------------------------------------


@dataclass(frozen=True)
class OrbitPartition:
    orbits: tuple[tuple[int, ...], ...]

    @property
    def orbit_count(self) -> int:
        return len(self.orbits)

    def orbit_of(self, v: int) -> tuple[int, ...]:
        for o in self.orbits:
            if v in o:
                return o
        raise KeyError(v)


def vertex_orbits(g: Graph) -> OrbitPartition:
    """Orbits of the full automorphism group on the vertices.

    Two vertices share an orbit iff the graph individualized at one is
    canonically identical to the graph individualized at the other.
    """
    n = g.n
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: int, b: int) -> None:
        a, b = find(a), find(b)
        if a != b:
            parent[max(a, b)] = min(a, b)

    for auto in automorphism_generators(g):
        for v in range(n):
            union(v, auto[v])

    cells = _refine([list(range(n))], g.adjacency)
    for cell in cells:
        if len(cell) == 1:
            continue
        codes: dict[int, int] = {}
        for v in sorted(cell):
            r = find(v)
            if r in codes:
                continue
            rest = [u for u in range(n) if u != v]
            code = _colored_code(g, [[v], rest])
            match = next((rep for rep, c in codes.items() if c == code), None)
            if match is not None:
                union(match, v)
            else:
                codes[r] = code
    groups: dict[int, list[int]] = {}
    for v in range(n):
        groups.setdefault(find(v), []).append(v)
    return OrbitPartition(tuple(tuple(o) for o in sorted(groups.values())))


@dataclass(frozen=True)
class DegreeStats:
    average_degree: Fraction
    all_even: bool
    all_odd: bool
    regular_degree: int | None


def degree_stats(g: Graph) -> DegreeStats:
    deg = g.degrees()
    return DegreeStats(
        average_degree=Fraction(2 * g.m, g.n),
        all_even=all(d % 2 == 0 for d in deg),
        all_odd=all(d % 2 == 1 for d in deg),
        regular_degree=deg[0] if len(set(deg)) == 1 else None,
    )


# -- enumeration ------------------------------------------------------------


def enumerate_connected(n: int) -> Iterator[Graph]:
    """All connected graphs on n vertices up to isomorphism, canonically
    labeled and ordered by certificate.

    Every connected graph has a non-cut vertex, so each class on n vertices
    arises from a connected graph on n-1 vertices by attaching a new vertex
    to a nonempty neighbor set; children are deduplicated by certificate.
    """
    if n < 1:
        raise GraphError("n must be >= 1")
    level = {canonical_certificate(Graph(1)): Graph(1)}
    for k in range(2, n + 1):
        nxt: dict[bytes, Graph] = {}
        for parent in level.values():
            for graph in _vertex_extensions(parent):
                cert = canonical_certificate(graph)
                if cert not in nxt:
                    nxt[cert] = graph
        level = nxt
    for cert in sorted(level):
        yield parse_graph6(cert)


def _vertex_extensions(g: Graph) -> Iterator[Graph]:
    n = g.n
    # subsets in one orbit of the parent's automorphisms give isomorphic children
    autos = automorphism_generators(g)
    seen: set[int] = set()
    for s in range(1, 1 << n):
        if s in seen:
            continue
        if autos:
            stack = [s]
            seen.add(s)
            while stack:
                t = stack.pop()
                for a in autos:
                    img = 0
                    for v in range(n):
                        if t >> v & 1:
                            img |= 1 << a[v]
                    if img not in seen:
                        seen.add(img)
                        stack.append(img)
        new_edges = g.edges + tuple((v, n) for v in range(n) if s >> v & 1)
        yield Graph(n + 1, new_edges)


def enumerate_regular(n: int, d: int) -> Iterator[Graph]:
    """Connected d-regular graphs on n vertices up to isomorphism.

    Cubic graphs are grown from K4 by edge insertion (subdivide two distinct
    edges and join the new vertices), triangle expansion of a vertex, diamond
    insertion into an edge, and bridge joins of two smaller cubic graphs.
    Other degrees use direct constructions or filter enumerate_connected.
    """
    if n * d % 2:
        raise GraphError(f"no {d}-regular graph on {n} vertices: n*d is odd")
    if d >= n or d < 0:
        raise GraphError(f"degree {d} must satisfy 0 <= d < n={n}")
    if d == 3:
        yield from _cubic(n)
        return
    if d == 0:
        graphs = [Graph(1)] if n == 1 else []
    elif d == 1:
        graphs = [Graph(2, ((0, 1),))] if n == 2 else []
    elif d == 2:
        graphs = [cycle_graph(n)]
    elif d == n - 1:
        graphs = [complete_graph(n)]
    else:
        graphs = [g for g in enumerate_connected(n) if degree_stats(g).regular_degree == d]
    certs = sorted(canonical_certificate(g) for g in graphs)
    for cert in certs:
        yield parse_graph6(cert)


def _cubic(n: int) -> Iterator[Graph]:
    if n < 4:
        return
    levels: dict[int, dict[bytes, Graph]] = {4: {canonical_certificate(complete_graph(4)): complete_graph(4)}}
    for k in range(6, n + 1, 2):
        found: dict[bytes, Graph] = {}

        def add(h: Graph) -> None:
            cert = canonical_certificate(h)
            if cert not in found:
                found[cert] = h

        for g in levels[k - 2].values():
            for e1, e2 in itertools.combinations(g.edges, 2):
                add(_insert_edge(g, e1, e2))
            for v in range(g.n):
                add(_expand_triangle(g, v))
        if k - 4 in levels:
            for g in levels[k - 4].values():
                for e in g.edges:
                    add(_insert_diamond(g, e))
        for k1 in range(4, k - 5, 2):
            k2 = k - 2 - k1
            if k2 < k1:
                break
            for g1 in levels[k1].values():
                for g2 in levels[k2].values():
                    for e1 in g1.edges:
                        for e2 in g2.edges:
                            add(_bridge_join(g1, e1, g2, e2))
        levels[k] = found
    for cert in sorted(levels.get(n, {})):
        yield parse_graph6(cert)


# Each operation maps connected simple cubic graphs to connected simple cubic
# graphs; together they reach every class for the sizes checked in the tests.


def _insert_edge(g: Graph, e1: tuple[int, int], e2: tuple[int, int]) -> Graph:
    """Subdivide two distinct edges and join the new vertices."""
    a, b = e1
    c, d = e2
    x, y = g.n, g.n + 1
    keep = [e for e in g.edges if e != e1 and e != e2]
    keep += [(a, x), (x, b), (c, y), (y, d), (x, y)]
    return Graph(g.n + 2, tuple(keep))


def _expand_triangle(g: Graph, v: int) -> Graph:
    """Replace vertex v by a triangle, one corner per former neighbor."""
    a, b, c = g.neighbors(v)
    x, y = g.n, g.n + 1
    keep = [e for e in g.edges if e != (min(v, b), max(v, b)) and e != (min(v, c), max(v, c))]
    keep += [(x, b), (y, c), (v, x), (v, y), (x, y)]
    return Graph(g.n + 2, tuple(keep))


def _insert_diamond(g: Graph, e: tuple[int, int]) -> Graph:
    """Replace edge ab by a path through a diamond (K4 minus an edge)."""
    a, b = e
    p, q, r, s = range(g.n, g.n + 4)
    keep = [f for f in g.edges if f != e]
    keep += [(a, p), (p, q), (p, r), (q, r), (q, s), (r, s), (s, b)]
    return Graph(g.n + 4, tuple(keep))


def _bridge_join(g1: Graph, e1: tuple[int, int], g2: Graph, e2: tuple[int, int]) -> Graph:
    """Subdivide an edge in each of two graphs and join the subdivision vertices."""
    off = g1.n
    a, b = e1
    c, d = (e2[0] + off, e2[1] + off)
    x, y = g1.n + g2.n, g1.n + g2.n + 1
    keep = [f for f in g1.edges if f != e1]
    keep += [(u + off, v + off) for u, v in g2.edges if (u, v) != e2]
    keep += [(a, x), (x, b), (c, y), (y, d), (x, y)]
    return Graph(g1.n + g2.n + 2, tuple(keep))


def connected_graphs_up_to(n_max: int, n_min: int = 1) -> list[Graph]:
    out = []
    for n in range(n_min, n_max + 1):
        out.extend(enumerate_connected(n))
    return out


def cubic_graphs_up_to(n_max: int) -> list[Graph]:
    out = []
    for n in range(4, n_max + 1, 2):
        out.extend(enumerate_regular(n, 3))
    return out
