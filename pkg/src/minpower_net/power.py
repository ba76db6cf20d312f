"""Radio cost arithmetic: transmit power ``t * d**n`` plus a per-hop reception cost."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

REL_EPS = 1e-9
ABS_EPS = 1e-12


class Location(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class PowerModel:
    """Path-loss model.

    ``t`` scales power per meter**n, ``n`` is the path-loss exponent, ``c`` the
    reception cost paid once per hop and ``p_max`` the largest transmit power.
    """

    t: float = 1.0
    n: float = 4.0
    c: float = 0.0
    p_max: float = 500.0**4

    def __post_init__(self) -> None:
        for name in ("t", "n", "c", "p_max"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.n < 2:
            raise ValueError(f"path-loss exponent must be >= 2, got {self.n}")
        if self.t <= 0:
            raise ValueError(f"t must be positive, got {self.t}")
        if self.p_max <= 0:
            raise ValueError(f"p_max must be positive, got {self.p_max}")
        if self.c < 0:
            raise ValueError(f"reception cost must be >= 0, got {self.c}")

    @classmethod
    def from_range(cls, max_range: float, *, t: float = 1.0, n: float = 4.0, c: float = 0.0) -> "PowerModel":
        """Model whose maximum power reaches exactly ``max_range`` meters."""
        return cls(t=t, n=n, c=c, p_max=t * max_range**n)

    @property
    def max_range(self) -> float:
        return max_range(self)

    def radius(self, power: float) -> float:
        """Radius of the disc reachable with ``power``."""
        if power <= 0:
            return 0.0
        if power >= self.p_max:
            return self.max_range
        return (power / self.t) ** (1.0 / self.n)

    def power_for(self, d2: float) -> float:
        """Transmit power for a squared distance ``d2``."""
        return self.t * d2 ** (0.5 * self.n)


def _d2(a: Sequence[float], b: Sequence[float]) -> float:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return dx * dx + dy * dy


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.sqrt(_d2(a, b))


def transmit_power(model: PowerModel, a: Sequence[float], b: Sequence[float]) -> float:
    return model.power_for(_d2(a, b))


def link_cost(model: PowerModel, a: Sequence[float], b: Sequence[float]) -> float:
    return model.power_for(_d2(a, b)) + model.c


def path_cost(model: PowerModel, path: Sequence[Sequence[float]]) -> float:
    """Total cost of a multihop path; every consecutive pair pays ``p + c``."""
    if len(path) == 0:
        raise ValueError("path must contain at least one location")
    total = 0.0
    for a, b in zip(path, path[1:]):
        total += link_cost(model, a, b)
    return total


def relay_beats_direct(
    model: PowerModel, u: Sequence[float], v: Sequence[float], target: Sequence[float]
) -> bool:
    """True iff ``target`` lies in the relay region of the pair ``(u, v)``.

    The comparison is non-strict, so ties count as relayed.
    """
    c = model.c
    via = (model.power_for(_d2(u, v)) + c) + (model.power_for(_d2(v, target)) + c)
    return via <= model.power_for(_d2(u, target)) + c


def max_range(model: PowerModel) -> float:
    return (model.p_max / model.t) ** (1.0 / model.n)


def close(a: float, b: float, rel: float = REL_EPS, abs_: float = ABS_EPS) -> bool:
    """Cost equality used by the verifiers (relative with an absolute floor)."""
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), abs_)
