"""Exact statevector simulation of depth-p QAOA for unweighted MaxCut.

Convention::

    |psi(gamma, beta)> = prod_l exp(-i beta_l B) exp(-i gamma_l C) |+>^n
    C = sum_{(u,v) in E} (1 - Z_u Z_v) / 2,   B = sum_i X_i

Vertex i is bit i of the basis-state index.  Every QAOA state is invariant
under the global bit flip, so only the half of the amplitudes with the top
bit clear is stored; X on the top qubit then acts as a reversal of that
half-vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angles import AngleVector, Unit, UnitError
from .graphs import Graph

MAX_QUBITS = 24


class SimulationError(ValueError):
    pass


def cut_values(g: Graph, half: bool = False) -> np.ndarray:
    """Cut size C(x) for every bitstring x (only x < 2^(n-1) when ``half``)."""
    size = 1 << (g.n - 1 if half else g.n)
    x = np.arange(size, dtype=np.int64)
    out = np.zeros(size, dtype=np.int64)
    for u, v in g.edges:
        out += ((x >> u) ^ (x >> v)) & 1
    return out


class MaxCutSimulator:
    """Batched simulator for one graph.

    Batched methods take ``gammas`` and ``betas`` of shape ``(R, p)`` in
    radians and work on ``R`` parameter sets at once.
    """

    def __init__(self, g: Graph):
        if g.n > MAX_QUBITS:
            raise SimulationError(f"n={g.n} exceeds the {MAX_QUBITS}-qubit limit")
        self.graph = g
        self.n = g.n
        self.dim = 1 << (g.n - 1)
        self.cuts = cut_values(g, half=True).astype(float)

    # -- primitive layers (in place on a (R, dim) complex array) --

    def _phase(self, psi: np.ndarray, gamma: np.ndarray) -> None:
        psi *= np.exp(-1j * gamma[:, None] * self.cuts[None, :])

    def _mixer(self, psi: np.ndarray, beta: np.ndarray) -> np.ndarray:
        R = psi.shape[0]
        c = np.cos(beta)
        s = -1j * np.sin(beta)
        c3 = c[:, None, None, None]
        s3 = s[:, None, None, None]
        for q in range(self.n - 1):
            v = psi.reshape(R, -1, 2, 1 << q)
            psi = (c3 * v + s3 * v[:, :, ::-1, :]).reshape(R, self.dim)
        psi = c[:, None] * psi + s[:, None] * psi[:, ::-1]
        return psi

    def _apply_b(self, psi: np.ndarray) -> np.ndarray:
        R = psi.shape[0]
        out = psi[:, ::-1].copy()
        for q in range(self.n - 1):
            v = psi.reshape(R, -1, 2, 1 << q)
            out += v[:, :, ::-1, :].reshape(R, self.dim)
        return out

    def _initial(self, R: int) -> np.ndarray:
        return np.full((R, self.dim), 1.0 / np.sqrt(2.0 * self.dim), dtype=complex)

    # -- batched API --

    def half_states(self, gammas: np.ndarray, betas: np.ndarray) -> np.ndarray:
        gammas = np.atleast_2d(np.asarray(gammas, dtype=float))
        betas = np.atleast_2d(np.asarray(betas, dtype=float))
        psi = self._initial(gammas.shape[0])
        for layer in range(gammas.shape[1]):
            self._phase(psi, gammas[:, layer])
            psi = self._mixer(psi, betas[:, layer])
        return psi

    def expectations(self, gammas: np.ndarray, betas: np.ndarray) -> np.ndarray:
        psi = self.half_states(gammas, betas)
        return 2.0 * (np.abs(psi) ** 2) @ self.cuts

    def values_and_gradients(self, gammas: np.ndarray, betas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Expectations ``(R,)`` and gradients ``(R, 2p)`` ordered
        ``[dF/dgamma_1..dF/dgamma_p, dF/dbeta_1..dF/dbeta_p]``, by adjoint
        back-propagation through the layers."""
        gammas = np.atleast_2d(np.asarray(gammas, dtype=float))
        betas = np.atleast_2d(np.asarray(betas, dtype=float))
        R, p = gammas.shape
        psi = self.half_states(gammas, betas)
        lam = psi * self.cuts[None, :]
        values = 2.0 * np.real(np.einsum("rj,rj->r", psi.conj(), lam))
        grad = np.zeros((R, 2 * p))
        for layer in range(p - 1, -1, -1):
            bpsi = self._apply_b(psi)
            grad[:, p + layer] = 4.0 * np.imag(np.einsum("rj,rj->r", lam.conj(), bpsi))
            psi = self._mixer(psi, -betas[:, layer])
            lam = self._mixer(lam, -betas[:, layer])
            grad[:, layer] = 4.0 * np.imag(np.einsum("rj,rj->r", lam.conj(), psi * self.cuts[None, :]))
            if layer:
                self._phase(psi, -gammas[:, layer])
                self._phase(lam, -gammas[:, layer])
        return values, grad

    # -- single-point helpers --

    def state(self, angles: AngleVector) -> np.ndarray:
        _require_radians(angles)
        half = self.half_states(np.array([angles.gamma]), np.array([angles.beta]))[0]
        return np.concatenate([half, half[::-1]])

    def probabilities(self, angles: AngleVector) -> np.ndarray:
        return np.abs(self.state(angles)) ** 2


def _require_radians(angles: AngleVector) -> None:
    if angles.unit is not Unit.RAD:
        raise UnitError(f"simulator expects radians, got {angles.unit.value}-unit angles")


def _batch(angles: AngleVector) -> tuple[np.ndarray, np.ndarray]:
    _require_radians(angles)
    return np.array([angles.gamma]).reshape(1, -1), np.array([angles.beta]).reshape(1, -1)


def qaoa_state(g: Graph, angles: AngleVector) -> np.ndarray:
    """Full 2^n amplitude vector."""
    return MaxCutSimulator(g).state(angles)


def expected_cut(g: Graph, angles: AngleVector) -> float:
    gm, bt = _batch(angles)
    return float(MaxCutSimulator(g).expectations(gm, bt)[0])


def gradient(g: Graph, angles: AngleVector) -> np.ndarray:
    if angles.p < 1:
        raise SimulationError("gradient needs p >= 1")
    gm, bt = _batch(angles)
    return MaxCutSimulator(g).values_and_gradients(gm, bt)[1][0]


def success_probability(g: Graph, angles: AngleVector, c_max: int) -> float:
    if c_max > g.m or c_max < 0:
        raise SimulationError(f"c_max={c_max} inconsistent with a graph of {g.m} edges")
    sim = MaxCutSimulator(g)
    gm, bt = _batch(angles)
    probs = 2.0 * np.abs(sim.half_states(gm, bt)[0]) ** 2
    return min(float(probs[sim.cuts == c_max].sum()), 1.0)


def approximation_ratio(g: Graph, angles: AngleVector, c_max: int) -> float:
    if c_max < 1:
        raise SimulationError("approximation ratio undefined for c_max = 0")
    return expected_cut(g, angles) / c_max


def cut_fraction(g: Graph, angles: AngleVector) -> float:
    if g.m == 0:
        raise SimulationError("cut fraction undefined for an edgeless graph")
    return expected_cut(g, angles) / g.m


@dataclass(frozen=True)
class SimResult:
    expectation: float
    success_probability: float
    cut_histogram: dict[int, float]
    optimal_cut: int

    @property
    def approximation_ratio(self) -> float:
        return self.expectation / self.optimal_cut


def simulate(g: Graph, angles: AngleVector, c_max: int | None = None) -> SimResult:
    """Expectation, cut distribution and success probability in one pass."""
    sim = MaxCutSimulator(g)
    gm, bt = _batch(angles)
    probs = 2.0 * np.abs(sim.half_states(gm, bt)[0]) ** 2
    cuts = sim.cuts.astype(np.int64)
    if c_max is None:
        c_max = int(cuts.max())
    elif c_max > g.m or c_max < 0:
        raise SimulationError(f"c_max={c_max} inconsistent with a graph of {g.m} edges")
    hist_arr = np.bincount(cuts, weights=probs, minlength=g.m + 1)
    hist = {k: float(hist_arr[k]) for k in range(g.m + 1) if np.any(cuts == k)}
    return SimResult(
        expectation=float(probs @ sim.cuts),
        success_probability=min(float(hist_arr[c_max]), 1.0) if c_max < len(hist_arr) else 0.0,
        cut_histogram=hist,
        optimal_cut=int(c_max),
    )
