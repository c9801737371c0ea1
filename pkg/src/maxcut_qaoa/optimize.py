"""Angle optimization: multistart quasi-Newton ascent and grid-seeded
enumeration of degenerate maxima.

All ascents of one call run in lockstep on a batch of parameter vectors so
the simulator works on ``(R, 2^(n-1))`` arrays; each row still follows its
own BFGS trajectory and line search.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .angles import AngleVector, Unit
from .graphs import Graph, canonical_certificate
from .simulator import MaxCutSimulator
from .symmetry import graph_parity, normalize_to_sector, periodic_distance, reduce_to_box

log = logging.getLogger(__name__)

DEFAULT_RESTARTS = {1: 50, 2: 100, 3: 1000}

ARMIJO_C = 1e-4
BACKTRACK = 0.5
MAX_BACKTRACKS = 50
# statevector entries per simulator batch
BATCH_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class OptConfig:
    restarts: dict[int, int] = field(default_factory=lambda: dict(DEFAULT_RESTARTS))
    seed: int = 0
    max_iterations: int = 500
    gradient_tolerance: float = 1e-8
    gamma_range: tuple[float, float] = (-math.pi, math.pi)
    beta_range: tuple[float, float] = (-math.pi / 4, math.pi / 4)

    def __post_init__(self) -> None:
        if any(r < 1 for r in self.restarts.values()):
            raise ValueError("restarts must be >= 1")
        if self.gradient_tolerance <= 0 or self.max_iterations < 1:
            raise ValueError("tolerances must be positive")

    def restarts_for(self, p: int) -> int:
        try:
            return self.restarts[p]
        except KeyError:
            raise ValueError(f"no restart count configured for p={p}; pass restarts explicitly") from None

    def with_restarts(self, **per_p: int) -> "OptConfig":
        r = dict(self.restarts)
        r.update({int(k.lstrip("p")): v for k, v in per_p.items()})
        return OptConfig(r, self.seed, self.max_iterations, self.gradient_tolerance, self.gamma_range, self.beta_range)

    def as_dict(self) -> dict:
        return {
            "restarts": {str(k): v for k, v in sorted(self.restarts.items())},
            "seed": self.seed,
            "max_iterations": self.max_iterations,
            "gradient_tolerance": self.gradient_tolerance,
            "gamma_range": list(self.gamma_range),
            "beta_range": list(self.beta_range),
        }


class AscentResult(NamedTuple):
    angles: AngleVector
    value: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class OptResult:
    best_angles: AngleVector  # pi units, canonical sector
    best_value: float
    n_restarts_used: int
    best_restart: int
    converged: bool
    all_local_optima: tuple[tuple[AngleVector, float], ...] | None = None


# -- batched BFGS ---------------------------------------------------------------


def _chunk_size(sim: MaxCutSimulator) -> int:
    return max(1, BATCH_ELEMENTS // sim.dim)


def _eval(sim: MaxCutSimulator, x: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Objective -F and its gradient for rows of x = [gammas | betas]."""
    vals = np.empty(x.shape[0])
    grads = np.empty_like(x)
    step = _chunk_size(sim)
    for i in range(0, x.shape[0], step):
        v, g = sim.values_and_gradients(x[i:i + step, :p], x[i:i + step, p:])
        vals[i:i + step] = -v
        grads[i:i + step] = -g
    return vals, grads


def bfgs_ascent(
    sim: MaxCutSimulator,
    x0: np.ndarray,
    max_iterations: int = 500,
    gradient_tolerance: float = 1e-8,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Maximize F from each row of ``x0`` (radians, ``[gammas | betas]``).

    Inverse-Hessian BFGS with Armijo backtracking.  Returns final points,
    values F, convergence flags and iteration counts per row.
    """
    x = np.array(x0, dtype=float, ndmin=2)
    R, d = x.shape
    p = d // 2
    f, g = _eval(sim, x, p)
    eye = np.eye(d)
    gnorm = np.linalg.norm(g, axis=1)
    H = np.repeat(eye[None], R, axis=0) * np.minimum(1.0, 0.25 / np.maximum(gnorm, 1e-300))[:, None, None]
    converged = gnorm <= gradient_tolerance
    done = converged.copy()
    fresh = np.ones(R, dtype=bool)
    iters = np.zeros(R, dtype=int)
    for _ in range(max_iterations):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        iters[act] += 1
        Ha, ga, xa, fa = H[act], g[act], x[act], f[act]
        dirn = -np.einsum("rij,rj->ri", Ha, ga)
        slope = np.einsum("ri,ri->r", ga, dirn)
        bad = slope >= 0
        if bad.any():
            Ha[bad] = eye
            dirn[bad] = -ga[bad]
            slope[bad] = -np.einsum("ri,ri->r", ga[bad], ga[bad])
        t = np.ones(act.size)
        x_new = np.empty_like(xa)
        f_new = np.empty(act.size)
        g_new = np.empty_like(ga)
        pending = np.arange(act.size)
        failed = np.zeros(act.size, dtype=bool)
        noise = 1e-12 * (1.0 + np.abs(fa))
        gn_old = np.linalg.norm(ga, axis=1)
        for _bt in range(MAX_BACKTRACKS):
            trial = xa[pending] + t[pending, None] * dirn[pending]
            ft, gt = _eval(sim, trial, p)
            armijo = ft <= fa[pending] + ARMIJO_C * t[pending] * slope[pending]
            # at round-off level the sufficient-decrease test is meaningless;
            # accept a non-increasing step that still shrinks the gradient
            flat = (ft <= fa[pending] + noise[pending]) & (np.linalg.norm(gt, axis=1) < gn_old[pending])
            ok = armijo | flat
            idx = pending[ok]
            x_new[idx], f_new[idx], g_new[idx] = trial[ok], ft[ok], gt[ok]
            pending = pending[~ok]
            if pending.size == 0:
                break
            t[pending] *= BACKTRACK
        failed[pending] = True
        x_new[pending], f_new[pending], g_new[pending] = xa[pending], fa[pending], ga[pending]

        s = x_new - xa
        y = g_new - ga
        sy = np.einsum("ri,ri->r", s, y)
        upd = (sy > 1e-14 * np.linalg.norm(s, axis=1) * np.linalg.norm(y, axis=1)) & ~failed
        first = fresh[act] & upd
        if first.any():
            scale = sy[first] / np.einsum("ri,ri->r", y[first], y[first])
            Ha[first] = eye[None] * scale[:, None, None]
        if upd.any():
            rho = 1.0 / sy[upd]
            Hu = Ha[upd]
            su, yu = s[upd], y[upd]
            Hy = np.einsum("rij,rj->ri", Hu, yu)
            yHy = np.einsum("ri,ri->r", yu, Hy)
            Hu = (
                Hu
                - rho[:, None, None] * (np.einsum("ri,rj->rij", Hy, su) + np.einsum("ri,rj->rij", su, Hy))
                + (rho * (1.0 + rho * yHy))[:, None, None] * np.einsum("ri,rj->rij", su, su)
            )
            Ha[upd] = Hu
        fresh[act[upd]] = False
        H[act], x[act], f[act], g[act] = Ha, x_new, f_new, g_new
        gnorm_new = np.linalg.norm(g_new, axis=1)
        conv = gnorm_new <= gradient_tolerance
        converged[act[conv]] = True
        done[act[conv | failed]] = True
    return x, -f, converged, iters


# -- public API -------------------------------------------------------------------


def local_ascent(
    g: Graph,
    p: int,
    start: AngleVector,
    max_iterations: int = 500,
    gradient_tolerance: float = 1e-8,
) -> AscentResult:
    """Single quasi-Newton ascent from ``start``; result is in start's unit."""
    if p < 1 or start.p != p:
        raise ValueError(f"start has {start.p} layers, expected p={p} >= 1")
    sim = MaxCutSimulator(g)
    x, v, conv, it = bfgs_ascent(sim, start.radians().flat()[None, :], max_iterations, gradient_tolerance)
    if not conv[0]:
        log.warning("ascent on %s did not converge after %d iterations", g, it[0])
    return AscentResult(AngleVector.from_flat(x[0], Unit.RAD).to(start.unit), float(v[0]), bool(conv[0]), int(it[0]))


def _seed_key(seed: int, g: Graph) -> int:
    digest = hashlib.blake2b(canonical_certificate(g), digest_size=8).digest()
    return int.from_bytes(digest, "little") ^ (seed & 0xFFFFFFFFFFFFFFFF)


def random_starts(g: Graph, p: int, count: int, cfg: OptConfig, offset: int = 0) -> np.ndarray:
    """Starts uniform in the seeding box, each drawn from a Philox stream
    keyed by (seed, graph certificate, p, restart index)."""
    key = _seed_key(cfg.seed, g)
    out = np.empty((count, 2 * p))
    for i in range(count):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([key, p, offset + i])))
        out[i, :p] = rng.uniform(*cfg.gamma_range, size=p)
        out[i, p:] = rng.uniform(*cfg.beta_range, size=p)
    return out


def multistart_optimize(
    g: Graph,
    p: int,
    cfg: OptConfig | None = None,
    warm_starts: Sequence[AngleVector] = (),
    keep_optima: bool = False,
    previous: AngleVector | None = None,
) -> OptResult:
    """Best of ``cfg.restarts[p]`` ascents.

    For p >= 2 the depth-(p-1) optimum padded with (gamma_p, beta_p) = (0, 0)
    always takes restart slot 0, so the optimum cannot get worse with depth.
    It is computed recursively unless passed as ``previous``.  Extra
    ``warm_starts`` (depth p) take the next slots; the rest are random.
    """
    cfg = cfg or OptConfig()
    if p < 1:
        raise ValueError("p must be >= 1")
    total = cfg.restarts_for(p)
    seeds = [w.radians() for w in warm_starts]
    if any(w.p != p for w in seeds):
        raise ValueError("warm starts must have depth p")
    if p >= 2:
        if previous is None:
            previous = multistart_optimize(g, p - 1, cfg).best_angles
        if previous.p != p - 1:
            raise ValueError("previous optimum must have depth p - 1")
        seeds.insert(0, previous.padded().radians())
    seeds = seeds[:total]
    x0 = np.empty((total, 2 * p))
    for i, w in enumerate(seeds):
        x0[i] = w.flat()
    x0[len(seeds):] = random_starts(g, p, total - len(seeds), cfg, offset=len(seeds))
    sim = MaxCutSimulator(g)
    x, vals, conv, _ = bfgs_ascent(sim, x0, cfg.max_iterations, cfg.gradient_tolerance)
    best = int(np.argmax(vals))
    raw = AngleVector.from_flat(x[best], Unit.RAD)
    parity = graph_parity(g)
    best_angles = normalize_to_sector(raw.pi_units(), parity)
    optima = None
    if keep_optima:
        optima = tuple((reduce_to_box(AngleVector.from_flat(x[i], Unit.RAD)).pi_units(), float(vals[i])) for i in range(total))
    return OptResult(best_angles, float(vals[best]), total, best, bool(conv[best]), optima)


def optimize_depths(g: Graph, p_values: Sequence[int], cfg: OptConfig | None = None) -> dict[int, OptResult]:
    """Optimize at each depth in ``1..max(p_values)``, chaining warm starts."""
    cfg = cfg or OptConfig()
    out: dict[int, OptResult] = {}
    prev = None
    for p in range(1, max(p_values) + 1):
        prev = multistart_optimize(g, p, cfg, previous=prev.best_angles if prev is not None else None)
        out[p] = prev
    return {p: out[p] for p in p_values}


def grid_starts(p: int, grid_per_gamma: int, grid_per_beta: int) -> np.ndarray:
    """Cell-centred product grid over gamma in [-pi, pi), beta in [-pi/4, pi/4)."""
    gam = -math.pi + (np.arange(grid_per_gamma) + 0.5) * (2 * math.pi / grid_per_gamma)
    bet = -math.pi / 4 + (np.arange(grid_per_beta) + 0.5) * (math.pi / 2 / grid_per_beta)
    axes = [gam] * p + [bet] * p
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def enumerate_degenerate_optima(
    g: Graph,
    p: int,
    grid_per_gamma: int = 24,
    grid_per_beta: int = 12,
    value_tol: float = 1e-6,
    merge_tol: float = 1e-3,
    max_iterations: int = 500,
    gradient_tolerance: float = 1e-8,
) -> list[AngleVector]:
    """All distinct global maxima found by ascending from every grid point.

    Optima are reduced into the box, kept if within ``value_tol`` of the best
    value, merged when closer than ``merge_tol`` (max-norm radians, periodic)
    and returned in pi units sorted by ``(gamma_1, beta_1, gamma_2, ...)``.
    """
    if p not in (1, 2):
        raise ValueError("degenerate enumeration supports p in {1, 2}")
    sim = MaxCutSimulator(g)
    x0 = grid_starts(p, grid_per_gamma, grid_per_beta)
    x, vals, _, _ = bfgs_ascent(sim, x0, max_iterations, gradient_tolerance)
    best = vals.max()
    keep = np.flatnonzero(vals >= best - value_tol)
    keep = keep[np.argsort(-vals[keep], kind="stable")]
    reps: list[AngleVector] = []
    for i in keep:
        a = reduce_to_box(AngleVector.from_flat(x[i], Unit.RAD))
        if all(periodic_distance(a, r) >= merge_tol for r in reps):
            reps.append(a)
    out = [r.pi_units() for r in reps]
    return sorted(out, key=lambda a: a.interleaved())
