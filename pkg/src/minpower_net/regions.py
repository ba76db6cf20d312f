"""Search regions and the residual region left after subtracting relay regions.

The residual region of a node ``u`` is the max-power disc minus the relay
regions of a set of obstructing nodes. It is never built explicitly: point
membership is exact, and containment in a broadcast disc is decided on a polar
sampling grid. Relay regions meet every ray from ``u`` in a half-line, so the
residual region is star-shaped around ``u`` and one index per ray describes
its sampled extent.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .power import Location, PowerModel, relay_beats_direct, transmit_power

SAMPLING_ENV = "MINPOWER_NET_SAMPLING"
COVER_SLACK = 1e-12


@dataclass(frozen=True)
class SamplingSpec:
    rays: int = 1024
    radial_samples: int = 128

    def __post_init__(self) -> None:
        if self.rays < 64:
            raise ValueError(f"need at least 64 rays, got {self.rays}")
        if self.radial_samples < 32:
            raise ValueError(f"need at least 32 radial samples, got {self.radial_samples}")

    def refined(self, factor: int = 4) -> "SamplingSpec":
        return SamplingSpec(self.rays * factor, self.radial_samples * factor)

    @classmethod
    def parse(cls, text: str) -> "SamplingSpec":
        """Parse ``"RAYSxRADII"``, e.g. ``"1024x128"``."""
        try:
            rays, radii = text.lower().split("x")
            return cls(int(rays), int(radii))
        except ValueError as exc:
            raise ValueError(f"bad sampling spec {text!r}: expected RAYSxRADII") from exc

    @classmethod
    def from_env(cls) -> "SamplingSpec":
        text = os.environ.get(SAMPLING_ENV)
        return cls.parse(text) if text else cls()


@lru_cache(maxsize=16)
def _angles(rays: int) -> tuple[np.ndarray, np.ndarray]:
    theta = 2.0 * np.pi * np.arange(rays) / rays
    cos_t = np.ascontiguousarray(np.cos(theta))
    sin_t = np.ascontiguousarray(np.sin(theta))
    cos_t.flags.writeable = False
    sin_t.flags.writeable = False
    return cos_t, sin_t


@lru_cache(maxsize=64)
def _radii(radial_samples: int, rmax: float) -> np.ndarray:
    # index 0 is the center; the last index is exactly rmax
    radii = rmax * (np.arange(radial_samples + 1) / radial_samples)
    radii.flags.writeable = False
    return radii


@dataclass(frozen=True)
class BroadcastRegion:
    """Disc reached by ``center`` transmitting at ``power``."""

    center: Location
    power: float
    model: PowerModel

    def __post_init__(self) -> None:
        if self.power > self.model.p_max * (1 + COVER_SLACK):
            raise ValueError("broadcast power exceeds p_max")

    @property
    def radius(self) -> float:
        return self.model.radius(self.power)

    def contains(self, pt: Sequence[float]) -> bool:
        return transmit_power(self.model, self.center, pt) <= self.power


@dataclass(frozen=True)
class EtaRegion:
    """Max-power disc around ``center`` minus the relay regions of ``obstructors``."""

    center: Location
    obstructors: tuple[Location, ...]
    model: PowerModel

    def with_obstructors(self, extra: Iterable[Sequence[float]]) -> "EtaRegion":
        return EtaRegion(self.center, self.obstructors + tuple(Location(*w) for w in extra), self.model)


def eta_contains(eta: EtaRegion, pt: Sequence[float]) -> bool:
    """Exact membership test."""
    model = eta.model
    if transmit_power(model, eta.center, pt) > model.p_max:
        return False
    for w in eta.obstructors:
        if relay_beats_direct(model, eta.center, w, pt):
            return False
    return True


@dataclass
class EtaSampler:
    """Sampled residual region, narrowed one obstructor at a time.

    ``first_excl[k]`` is the first radial index on ray ``k`` outside the
    region; everything before it (down to the center) is inside.
    """

    center: Location
    model: PowerModel
    spec: SamplingSpec = field(default_factory=SamplingSpec)

    def __post_init__(self) -> None:
        self.center = Location(*self.center)
        self._cos, self._sin = _angles(self.spec.rays)
        self._radii = _radii(self.spec.radial_samples, self.model.max_range)
        self.first_excl = np.full(self.spec.rays, self.spec.radial_samples + 1, dtype=np.int32)
        self.obstructors: list[Location] = []

    def add(self, w: Sequence[float]) -> int:
        m = self.model
        self.obstructors.append(Location(*w))
        return kernels.apply_obstructor(
            self.first_excl, self.center.x, self.center.y, float(w[0]), float(w[1]),
            self._cos, self._sin, self._radii, m.t, m.n, m.c,
        )

    def extend(self, ws: Iterable[Sequence[float]]) -> None:
        for w in ws:
            self.add(w)

    @property
    def sup_index(self) -> int:
        return int(self.first_excl.max()) - 1

    @property
    def sup_radius(self) -> float:
        """Largest distance from the center over sampled in-region points."""
        return float(self._radii[self.sup_index])

    def covering_power(self) -> float:
        idx = self.sup_index
        if idx >= self.spec.radial_samples:
            return self.model.p_max
        if idx <= 0:
            return 0.0
        return min(self.model.power_for(float(self._radii[idx]) ** 2), self.model.p_max)

    def covered_by(self, power: float) -> bool:
        if power >= self.model.p_max:
            return True
        return self.sup_radius <= self.model.radius(power) * (1 + COVER_SLACK)

    def eta(self) -> EtaRegion:
        return EtaRegion(self.center, tuple(self.obstructors), self.model)


def sampler_for(eta: EtaRegion, spec: SamplingSpec | None = None) -> EtaSampler:
    s = EtaSampler(eta.center, eta.model, spec or SamplingSpec())
    s.extend(eta.obstructors)
    return s


def region_covers_eta(F: BroadcastRegion, eta: EtaRegion, spec: SamplingSpec | None = None) -> bool:
    """Sampled test of ``F ⊇ eta``; obstructor locations are checked exactly."""
    if tuple(F.center) != tuple(eta.center):
        raise ValueError("broadcast region and residual region must share a center")
    if F.power >= eta.model.p_max:
        return True
    for w in eta.obstructors:
        if eta_contains(eta, w) and not F.contains(w):
            return False
    return sampler_for(eta, spec).covered_by(F.power)


def min_covering_power(
    u: Sequence[float], eta: EtaRegion, model: PowerModel, spec: SamplingSpec | None = None
) -> float:
    """Smallest power whose disc covers every sampled point of ``eta``."""
    if tuple(u) != tuple(eta.center) or model != eta.model:
        raise ValueError("eta must be centered at u under the same model")
    return sampler_for(eta, spec).covering_power()


def dense_sup_radius(eta: EtaRegion, spec: SamplingSpec) -> float:
    """Brute-force sup radius: evaluate every grid point, no monotonicity shortcut."""
    m = eta.model
    cos_t, sin_t = _angles(spec.rays)
    radii = _radii(spec.radial_samples, m.max_range)
    first = kernels.dense_first_excl(
        eta.center.x, eta.center.y, eta.obstructors, cos_t, sin_t, radii, m.t, m.n, m.c
    )
    return float(radii[int(first.max()) - 1])


def exact_sup_radius_n2c0(eta: EtaRegion) -> float:
    """Exact sup of distance over the residual region when ``n == 2`` and ``c == 0``.

    In that case the relay region of ``w`` is the half-plane
    ``{pt : (pt - u)·(w - u) >= |w - u|**2}``, so the residual region is a
    disc clipped by half-planes and its farthest point is a vertex or lies on
    a free arc of the disc.
    """
    m = eta.model
    if m.n != 2 or m.c != 0:
        raise ValueError("exact path only applies to n == 2, c == 0")
    rmax = m.max_range
    ux, uy = eta.center
    lines = []  # (unit normal, offset): excluded iff pt·normal >= offset
    for w in eta.obstructors:
        wx, wy = w[0] - ux, w[1] - uy
        d = math.hypot(wx, wy)
        if d == 0:
            continue
        lines.append((wx / d, wy / d, d))

    def inside(px: float, py: float, slack: float) -> bool:
        return all(px * a + py * b < off + slack for a, b, off in lines)

    # free arc of the boundary circle?
    cuts = [0.0]
    for a, b, off in lines:
        if off < rmax:
            phi = math.atan2(b, a)
            half = math.acos(off / rmax)
            cuts += [(phi - half) % (2 * math.pi), (phi + half) % (2 * math.pi)]
    cuts.sort()
    cuts.append(cuts[0] + 2 * math.pi)
    for lo, hi in zip(cuts, cuts[1:]):
        if hi - lo < 1e-15:
            continue
        mid = 0.5 * (lo + hi)
        if inside(rmax * math.cos(mid), rmax * math.sin(mid), 0.0):
            return rmax

    slack = 1e-9 * rmax
    best = 0.0
    candidates = []
    for i, (a1, b1, o1) in enumerate(lines):
        if o1 < rmax:
            phi = math.atan2(b1, a1)
            half = math.acos(o1 / rmax)
            for ang in (phi - half, phi + half):
                candidates.append((rmax * math.cos(ang), rmax * math.sin(ang)))
        for a2, b2, o2 in lines[i + 1:]:
            det = a1 * b2 - a2 * b1
            if abs(det) < 1e-15:
                continue
            px = (o1 * b2 - o2 * b1) / det
            py = (a1 * o2 - a2 * o1) / det
            if px * px + py * py <= rmax * rmax * (1 + 1e-12):
                candidates.append((px, py))
    for px, py in candidates:
        if inside(px, py, slack):
            best = max(best, math.hypot(px, py))
    return min(best, rmax)
