"""QAOA angle vectors with an explicit unit tag."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np


class Unit(str, Enum):
    PI = "pi"
    RAD = "rad"

    @property
    def scale(self) -> float:
        """Size of pi in this unit."""
        return 1.0 if self is Unit.PI else math.pi


class UnitError(ValueError):
    pass


@dataclass(frozen=True)
class AngleVector:
    gamma: tuple[float, ...]
    beta: tuple[float, ...]
    unit: Unit = Unit.RAD

    def __post_init__(self) -> None:
        gamma = tuple(float(x) for x in self.gamma)
        beta = tuple(float(x) for x in self.beta)
        if len(gamma) != len(beta):
            raise ValueError(f"gamma has {len(gamma)} entries but beta has {len(beta)}")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "unit", Unit(self.unit))

    @property
    def p(self) -> int:
        return len(self.gamma)

    @classmethod
    def from_flat(cls, x: Sequence[float], unit: Unit | str = Unit.RAD) -> "AngleVector":
        """From ``[gamma_1..gamma_p, beta_1..beta_p]``."""
        x = list(x)
        p = len(x) // 2
        if 2 * p != len(x):
            raise ValueError("flat angle vector must have even length")
        return cls(tuple(x[:p]), tuple(x[p:]), Unit(unit))

    def flat(self) -> np.ndarray:
        return np.array(self.gamma + self.beta, dtype=float)

    def interleaved(self) -> tuple[float, ...]:
        """``(gamma_1, beta_1, gamma_2, beta_2, ...)``, the ordering used for sorting."""
        out = []
        for g, b in zip(self.gamma, self.beta):
            out += [g, b]
        return tuple(out)

    def to(self, unit: Unit | str) -> "AngleVector":
        return convert_units(self, unit)

    def radians(self) -> "AngleVector":
        return convert_units(self, Unit.RAD)

    def pi_units(self) -> "AngleVector":
        return convert_units(self, Unit.PI)

    def padded(self) -> "AngleVector":
        """One more layer with (gamma, beta) = (0, 0) appended, an identity layer."""
        return AngleVector(self.gamma + (0.0,), self.beta + (0.0,), self.unit)


def convert_units(a: AngleVector, to: Unit | str) -> AngleVector:
    to = Unit(to)
    if to is a.unit:
        return a
    if to is Unit.RAD:
        return AngleVector(tuple(x * math.pi for x in a.gamma), tuple(x * math.pi for x in a.beta), to)
    return AngleVector(tuple(x / math.pi for x in a.gamma), tuple(x / math.pi for x in a.beta), to)
