"""Angle symmetries of MaxCut QAOA.

Universal: time reversal (gamma, beta) -> (-gamma, -beta), gamma_l -> gamma_l
+ 2 pi, beta_l -> beta_l + pi/2.  All-even-degree graphs: gamma_l -> gamma_l
+ pi.  All-odd-degree graphs: gamma_l -> gamma_l + pi together with beta_q ->
-beta_q for every q >= l.

The fundamental box is gamma in (-pi, pi], beta in (-pi/4, pi/4].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .angles import AngleVector
from .graphs import Graph, degree_stats


class GraphParity(str, Enum):
    ALL_EVEN = "even"
    ALL_ODD = "odd"
    MIXED = "mixed"


def graph_parity(g: Graph) -> GraphParity:
    ds = degree_stats(g)
    if ds.all_even:
        return GraphParity.ALL_EVEN
    if ds.all_odd:
        return GraphParity.ALL_ODD
    return GraphParity.MIXED


class SymmetryKind(str, Enum):
    TIME_REVERSAL = "time_reversal"
    GAMMA_SHIFT_2PI = "gamma_shift_2pi"
    BETA_SHIFT_HALF_PI = "beta_shift_half_pi"
    EVEN_GAMMA_SHIFT_PI = "even_gamma_shift_pi"
    ODD_GAMMA_SHIFT_PI = "odd_gamma_shift_pi"


@dataclass(frozen=True)
class SymmetryOp:
    kind: SymmetryKind
    layer: int = 1  # 1-based
    sign: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SymmetryKind(self.kind))
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")


TIME_REVERSAL = SymmetryOp(SymmetryKind.TIME_REVERSAL)


def apply_symmetry(a: AngleVector, op: SymmetryOp) -> AngleVector:
    if op.kind is SymmetryKind.TIME_REVERSAL:
        return AngleVector(tuple(-x for x in a.gamma), tuple(-x for x in a.beta), a.unit)
    if not 1 <= op.layer <= a.p:
        raise ValueError(f"layer {op.layer} out of range for p={a.p}")
    pi = a.unit.scale
    l = op.layer - 1
    gamma, beta = list(a.gamma), list(a.beta)
    if op.kind is SymmetryKind.GAMMA_SHIFT_2PI:
        gamma[l] += 2 * pi * op.sign
    elif op.kind is SymmetryKind.BETA_SHIFT_HALF_PI:
        beta[l] += pi / 2 * op.sign
    elif op.kind is SymmetryKind.EVEN_GAMMA_SHIFT_PI:
        gamma[l] += pi * op.sign
    elif op.kind is SymmetryKind.ODD_GAMMA_SHIFT_PI:
        gamma[l] += pi * op.sign
        for q in range(l, a.p):
            beta[q] = -beta[q]
    return AngleVector(tuple(gamma), tuple(beta), a.unit)


def parity_generators(parity: GraphParity, p: int) -> list[SymmetryOp]:
    """Generators beyond the box periods; those are absorbed by reduce_to_box."""
    gens = [TIME_REVERSAL]
    if parity is GraphParity.ALL_EVEN:
        gens += [SymmetryOp(SymmetryKind.EVEN_GAMMA_SHIFT_PI, l) for l in range(1, p + 1)]
    elif parity is GraphParity.ALL_ODD:
        gens += [SymmetryOp(SymmetryKind.ODD_GAMMA_SHIFT_PI, l) for l in range(1, p + 1)]
    return gens


def _wrap(x: float, period: float) -> float:
    # IEEE remainder is exact and lands in [-period/2, period/2]
    r = math.remainder(x, period)
    if r <= -period / 2:
        r += period
    return r


def reduce_to_box(a: AngleVector) -> AngleVector:
    pi = a.unit.scale
    return AngleVector(
        tuple(_wrap(x, 2 * pi) for x in a.gamma),
        tuple(_wrap(x, pi / 2) for x in a.beta),
        a.unit,
    )


def _key(a: AngleVector) -> tuple[float, ...]:
    return tuple(round(x, 11) for x in a.pi_units().interleaved())


def degenerate_set(a: AngleVector, parity: GraphParity, p: int | None = None) -> list[AngleVector]:
    """Closure of ``{a}`` under the parity's generators, reduced into the box,
    distinct elements sorted by ``(gamma_1, beta_1, gamma_2, ...)``."""
    if p is not None and p != a.p:
        raise ValueError(f"depth mismatch: p={p} but angles have {a.p} layers")
    gens = parity_generators(parity, a.p)
    start = reduce_to_box(a)
    members = {_key(start): start}
    frontier = [start]
    while frontier:
        nxt = []
        for x in frontier:
            for op in gens:
                y = reduce_to_box(apply_symmetry(x, op))
                k = _key(y)
                if k not in members:
                    members[k] = y
                    nxt.append(y)
        frontier = nxt
    return [members[k] for k in sorted(members)]


def _magnitude_key(a: AngleVector) -> tuple:
    x = a.pi_units().interleaved()
    return (round(sum(abs(v) for v in x), 11), _key(a))


def _positive_magnitude_key(a: AngleVector) -> tuple:
    x = a.pi_units().interleaved()
    return (0 if all(v >= 0 for v in x) else 1,) + _magnitude_key(a)


def normalize_to_sector(a: AngleVector, parity: GraphParity, mode: str = "lex") -> AngleVector:
    """Canonical representative of ``a``'s degeneracy class inside the box.

    ``mode="lex"`` picks the lexicographically smallest member, ``"magnitude"``
    the smallest total |angle| (ties lexicographic) and ``"positive"`` prefers
    members with all angles >= 0, then smallest magnitude.
    """
    key = {"lex": _key, "magnitude": _magnitude_key, "positive": _positive_magnitude_key}[mode]
    return min(degenerate_set(a, parity), key=key)


def periodic_distance(a: AngleVector, b: AngleVector) -> float:
    """Max-norm distance in radians modulo the box periods."""
    if a.p != b.p:
        raise ValueError("depth mismatch")
    ra, rb = a.radians(), b.radians()
    d = 0.0
    for x, y in zip(ra.gamma, rb.gamma):
        d = max(d, abs(_wrap(x - y, 2 * math.pi)))
    for x, y in zip(ra.beta, rb.beta):
        d = max(d, abs(_wrap(x - y, math.pi / 2)))
    return d


def angles_equivalent(a: AngleVector, b: AngleVector, parity: GraphParity, tol: float = 1e-6) -> bool:
    if a.p != b.p:
        raise ValueError(f"depth mismatch: {a.p} vs {b.p}")
    target = reduce_to_box(b)
    return any(periodic_distance(x, target) <= tol for x in degenerate_set(a, parity))
