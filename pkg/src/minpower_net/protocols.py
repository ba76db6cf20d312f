"""Per-node neighbor search (SMECN and MECN) and whole-network runs.

Both searches broadcast with escalating power, collect the nodes that answer
and stop once the current broadcast disc covers the residual region. Node
discovery reads positions straight from the world (no message loss).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .graph import NetworkGraph, NodeId, NodeRecord, check_nodes
from .power import Location, PowerModel
from .regions import EtaRegion, EtaSampler, SamplingSpec


class Protocol(str, Enum):
    SMECN = "smecn"
    MECN = "mecn"


ORDER_POLICIES = ("by-id", "by-distance", "reverse-by-distance")
OrderPolicy = Union[str, Sequence[NodeId]]


class FlipDivergence(RuntimeError):
    """Flip toggled more often than the per-iteration guard allows."""


@dataclass(frozen=True)
class EscalationSchedule:
    """Initial power ``p0`` and the power-increase rule (doubling by default).

    The rule's output is clamped to ``p_max``.
    """

    p0: float
    rule: Callable[[float], float] = field(default=lambda p: 2.0 * p)
    max_steps: int = 10_000

    @classmethod
    def doubling(cls, model: PowerModel, halvings: int = 10) -> "EscalationSchedule":
        return cls(p0=model.p_max / 2.0**halvings)

    def validate(self, model: PowerModel) -> None:
        if not (0 < self.p0 < model.p_max):
            raise ValueError(f"p0 must lie in (0, p_max), got {self.p0}")
        p = self.p0
        for _ in range(self.max_steps):
            q = self.rule(p)
            if not q > p:
                raise ValueError(f"increase rule is not strictly increasing at p={p}")
            if q >= model.p_max:
                return
            p = q
        raise ValueError("increase rule does not reach p_max")

    def increase(self, p: float, model: PowerModel) -> float:
        return min(self.rule(p), model.p_max)


@dataclass(frozen=True)
class SearchState:
    """Snapshot of a node's search after one loop iteration."""

    node: NodeId
    p: float
    discovered: tuple[NodeId, ...]
    non_neighbors: frozenset[NodeId]
    eta: EtaRegion
    iteration: int


@dataclass(frozen=True)
class NodeResult:
    node: NodeId
    neighbors: frozenset[NodeId]
    power: float
    iterations: int
    discovered: frozenset[NodeId]


@dataclass
class ProtocolResult:
    protocol: Protocol
    nodes: dict[NodeId, NodeResult]
    graph: NetworkGraph

    def neighbors(self, u: NodeId) -> frozenset[NodeId]:
        return self.nodes[u].neighbors

    def power(self, u: NodeId) -> float:
        return self.nodes[u].power

    def mean_out_degree(self) -> float:
        return self.graph.mean_out_degree()

    def mean_power(self) -> float:
        return float(np.mean([r.power for r in self.nodes.values()])) if self.nodes else 0.0


class World:
    """Immutable node set with coordinate arrays for vectorized geometry."""

    def __init__(self, nodes: Iterable[NodeRecord]):
        self.records = check_nodes(nodes)
        self.ids = np.array([r.id for r in self.records], dtype=np.int64)
        self.xy = np.array([tuple(r.loc) for r in self.records], dtype=float).reshape(-1, 2)
        self.index = {r.id: k for k, r in enumerate(self.records)}

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.index

    def loc(self, node_id: NodeId) -> Location:
        return self.records[self.index[node_id]].loc

    def without(self, drop: Iterable[NodeId]) -> "World":
        drop = set(drop)
        return World(r for r in self.records if r.id not in drop)


def _as_world(world: World | Iterable[NodeRecord]) -> World:
    return world if isinstance(world, World) else World(world)


class _Neighborhood:
    """Geometry of one node's potential neighbors, sorted by transmit power."""

    def __init__(self, u: NodeId, world: World, model: PowerModel):
        self.u = u
        self.model = model
        k = world.index[u]
        self.center = world.records[k].loc
        d = world.xy - world.xy[k]
        d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]
        power = model.t * d2 ** (0.5 * model.n)
        mask = power <= model.p_max
        mask[k] = False
        cand = np.flatnonzero(mask)
        order = np.lexsort((world.ids[cand], power[cand]))
        cand = cand[order]
        self.ids = world.ids[cand]
        self.xy = world.xy[cand]
        self.d2 = d2[cand]
        self.power = power[cand]
        # relay[i, j]: candidate j lies in the relay region of (u, candidate i)
        c = model.c
        h = 0.5 * model.n
        dd = self.xy[:, None, :] - self.xy[None, :, :]
        d2ij = dd[..., 0] * dd[..., 0] + dd[..., 1] * dd[..., 1]
        via = (model.t * self.d2 ** h + c)[:, None] + (model.t * d2ij ** h + c)
        self.relay = via <= (model.t * self.d2 ** h + c)[None, :]
        np.fill_diagonal(self.relay, False)

    def discovered_upto(self, p: float) -> int:
        return int(np.searchsorted(self.power, p, side="right"))


def _order(idx: Iterable[int], hood: _Neighborhood, policy: OrderPolicy) -> list[int]:
    idx = list(idx)
    if isinstance(policy, str):
        if policy == "by-id":
            return sorted(idx, key=lambda i: hood.ids[i])
        if policy == "by-distance":
            return sorted(idx, key=lambda i: (hood.d2[i], hood.ids[i]))
        if policy == "reverse-by-distance":
            return sorted(idx, key=lambda i: (-hood.d2[i], hood.ids[i]))
        raise ValueError(f"unknown ordering policy {policy!r}; expected one of {ORDER_POLICIES}")
    rank = {int(node): r for r, node in enumerate(policy)}
    return sorted(idx, key=lambda i: (rank.get(int(hood.ids[i]), len(rank)), hood.ids[i]))


def _snapshot(hood: _Neighborhood, p: float, a_end: int, nonnbr: np.ndarray,
              obstructors: Iterable[int], iteration: int) -> SearchState:
    eta = EtaRegion(hood.center, tuple(Location(*hood.xy[i]) for i in obstructors), hood.model)
    return SearchState(
        node=hood.u,
        p=p,
        discovered=tuple(int(i) for i in hood.ids[:a_end]),
        non_neighbors=frozenset(int(hood.ids[i]) for i in np.flatnonzero(nonnbr[:a_end])),
        eta=eta,
        iteration=iteration,
    )


def _result(hood: _Neighborhood, a_end: int, nonnbr: np.ndarray, sampler: EtaSampler,
            iterations: int) -> NodeResult:
    keep = np.flatnonzero(~nonnbr[:a_end])
    return NodeResult(
        node=hood.u,
        neighbors=frozenset(int(i) for i in hood.ids[keep]),
        power=sampler.covering_power(),
        iterations=iterations,
        discovered=frozenset(int(i) for i in hood.ids[:a_end]),
    )


def smecn_node(
    u: NodeId,
    world: World | Iterable[NodeRecord],
    model: PowerModel,
    schedule: EscalationSchedule | None = None,
    spec: SamplingSpec | None = None,
    observer: Callable[[SearchState], None] | None = None,
) -> NodeResult:
    """Run the SMECN search at node ``u``."""
    world = _as_world(world)
    schedule = schedule or EscalationSchedule.doubling(model)
    schedule.validate(model)
    hood = _Neighborhood(u, world, model)
    sampler = EtaSampler(hood.center, model, spec or SamplingSpec())
    nonnbr = np.zeros(len(hood.ids), dtype=bool)
    a_end = 0
    p = schedule.p0
    iterations = 0
    while not sampler.covered_by(p):
        p = schedule.increase(p, model)
        iterations += 1
        m_end = hood.discovered_upto(p)
        if m_end > a_end:
            new = slice(a_end, m_end)
            # v in M is relayed by some w in A, or relays some w in A
            nonnbr[new] |= hood.relay[:m_end, new].any(axis=0)
            nonnbr[:m_end] |= hood.relay[new, :m_end].any(axis=0)
            for i in range(a_end, m_end):
                sampler.add(hood.xy[i])
            a_end = m_end
        if observer is not None:
            observer(_snapshot(hood, p, a_end, nonnbr, range(a_end), iterations))
    return _result(hood, a_end, nonnbr, sampler, iterations)


def _flip(start: int, a_end: int, nonnbr: np.ndarray, hood: _Neighborhood,
          policy: OrderPolicy, budget: list[int]) -> None:
    # explicit stack; children are pushed reversed so they run in recursive order
    stack = [start]
    relay = hood.relay
    while stack:
        x = stack.pop()
        budget[0] -= 1
        if budget[0] < 0:
            raise FlipDivergence(f"Flip exceeded its toggle budget at node {hood.u}")
        if not nonnbr[x]:
            nonnbr[x] = True
        else:
            nbrs = np.flatnonzero(~nonnbr[:a_end])
            if relay[nbrs, x].any():
                continue
            nonnbr[x] = False
        children = _order(np.flatnonzero(relay[x, :a_end]), hood, policy)
        stack.extend(reversed(children))


def mecn_node(
    u: NodeId,
    world: World | Iterable[NodeRecord],
    model: PowerModel,
    schedule: EscalationSchedule | None = None,
    spec: SamplingSpec | None = None,
    order: OrderPolicy = "by-id",
    observer: Callable[[SearchState], None] | None = None,
) -> NodeResult:
    """Run the MECN search at node ``u``.

    Every newly discovered node starts as a non-neighbor and is then passed to
    Flip in the order given by ``order``. The residual region is rebuilt each
    iteration from the current neighbors only.
    """
    world = _as_world(world)
    spec = spec or SamplingSpec()
    schedule = schedule or EscalationSchedule.doubling(model)
    schedule.validate(model)
    if isinstance(order, str) and order not in ORDER_POLICIES:
        raise ValueError(f"unknown ordering policy {order!r}; expected one of {ORDER_POLICIES}")
    hood = _Neighborhood(u, world, model)
    sampler = EtaSampler(hood.center, model, spec)
    nonnbr = np.zeros(len(hood.ids), dtype=bool)
    a_end = 0
    p = schedule.p0
    iterations = 0
    while not sampler.covered_by(p):
        p = schedule.increase(p, model)
        iterations += 1
        m_end = hood.discovered_upto(p)
        if m_end > a_end:
            fresh = range(a_end, m_end)
            a_end = m_end
            nonnbr[fresh.start:fresh.stop] = True
            budget = [2 * a_end * a_end]
            for v in _order(fresh, hood, order):
                _flip(v, a_end, nonnbr, hood, order, budget)
            sampler = EtaSampler(hood.center, model, spec)
            for i in np.flatnonzero(~nonnbr[:a_end]):
                sampler.add(hood.xy[i])
        if observer is not None:
            obstructors = np.flatnonzero(~nonnbr[:a_end])
            observer(_snapshot(hood, p, a_end, nonnbr, obstructors, iterations))
    return _result(hood, a_end, nonnbr, sampler, iterations)


def run_protocol(
    world: World | Iterable[NodeRecord],
    model: PowerModel,
    schedule: EscalationSchedule | None = None,
    spec: SamplingSpec | None = None,
    which: Protocol | str = Protocol.SMECN,
    order: OrderPolicy = "by-id",
) -> ProtocolResult:
    """Run the per-node search everywhere and union the neighbor relations."""
    world = _as_world(world)
    which = Protocol(which)
    schedule = schedule or EscalationSchedule.doubling(model)
    spec = spec or SamplingSpec()
    results = {}
    for rec in world.records:
        if which is Protocol.SMECN:
            results[rec.id] = smecn_node(rec.id, world, model, schedule, spec)
        else:
            results[rec.id] = mecn_node(rec.id, world, model, schedule, spec, order)
    edges = [(u, v) for u, r in results.items() for v in sorted(r.neighbors)]
    return ProtocolResult(which, results, NetworkGraph(world.records, edges, model))


def iteration_bound(model: PowerModel, schedule: EscalationSchedule) -> int:
    """Loop iterations needed under doubling to reach ``p_max`` from ``p0``, plus one."""
    return math.ceil(math.log2(model.p_max / schedule.p0)) + 1
