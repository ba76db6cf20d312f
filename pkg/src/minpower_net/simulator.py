"""Lifetime simulation: periodic traffic to a sink over the protocol graph.

Every node sends constant-bit-rate packets to a boundary sink and beacons at
its operating power. Packets follow the cheapest path over the current
protocol graph. Nodes die when their energy runs out, and each node whose
search had discovered the dead node reruns its search on the surviving nodes.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence, Union

import numpy as np

from .graph import (
    NetworkGraph,
    NodeId,
    NodeRecord,
    build_reference_graph,
    has_min_energy_property,
    is_connected,
    next_hop_table,
)
from .power import Location, PowerModel, transmit_power
from .protocols import (
    EscalationSchedule,
    NodeResult,
    OrderPolicy,
    Protocol,
    World,
    mecn_node,
    smecn_node,
)
from .regions import SamplingSpec

SinkRule = Union[str, tuple[float, float]]
SINK_RULES = ("boundary-midpoint", "corner")

CSV_COLUMNS = (
    "time",
    "alive",
    "sink_connected",
    "mean_degree",
    "mean_power",
    "packets_delivered",
    "energy_consumed_mean",
    "mean_hops",
)

# power-unit seconds per node; sized for the t=1, n=4, 500 m calibration
DEFAULT_INITIAL_ENERGY = 1.0e10

_PACKET, _BEACON, _SAMPLE = 0, 1, 2


class ScenarioInfeasible(Exception):
    """No connected placement was found within the retry budget."""


@dataclass(frozen=True)
class ScenarioConfig:
    node_count: int = 200
    width: float = 1500.0
    height: float = 1500.0
    seed: int = 0
    model: PowerModel = field(default_factory=lambda: PowerModel.from_range(500.0, n=4, c=0.0))
    p0: float | None = None  # default p_max / 2**10
    protocol: Protocol = Protocol.SMECN
    order: OrderPolicy = "by-id"
    sampling: SamplingSpec = field(default_factory=SamplingSpec.from_env)
    traffic_rate: float = 0.5
    packet_bytes: int = 512
    bandwidth_bps: float = 2.0e6
    duration: float = 1200.0
    initial_energy: float = DEFAULT_INITIAL_ENERGY
    beacon_interval: float = 1.0
    beacon_bytes: int = 64
    sample_interval: float = 10.0
    processing_delay: float = 1e-3
    sink: SinkRule = "boundary-midpoint"
    max_resamples: int = 50
    nodes: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        positive = ("width", "height", "traffic_rate", "packet_bytes", "bandwidth_bps",
                    "initial_energy", "beacon_interval", "beacon_bytes", "sample_interval")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")
        if self.node_count < 1 and self.nodes is None:
            raise ValueError("need at least one node")
        if isinstance(self.sink, str):
            if self.sink not in SINK_RULES:
                raise ValueError(f"sink rule must be one of {SINK_RULES} or an (x, y) location")
        else:
            object.__setattr__(self, "sink", (float(self.sink[0]), float(self.sink[1])))
        if self.nodes is not None:
            object.__setattr__(self, "nodes", tuple((float(x), float(y)) for x, y in self.nodes))
            object.__setattr__(self, "node_count", len(self.nodes))

    @property
    def schedule(self) -> EscalationSchedule:
        if self.p0 is None:
            return EscalationSchedule.doubling(self.model)
        return EscalationSchedule(self.p0)

    @property
    def packet_time(self) -> float:
        return self.packet_bytes * 8 / self.bandwidth_bps

    @property
    def beacon_time(self) -> float:
        return self.beacon_bytes * 8 / self.bandwidth_bps

    def sink_location(self) -> Location:
        if self.sink == "boundary-midpoint":
            return Location(self.width / 2.0, 0.0)
        if self.sink == "corner":
            return Location(0.0, 0.0)
        return Location(*self.sink)


def place_nodes(cfg: ScenarioConfig, with_sink: bool = True) -> tuple[list[NodeRecord], int]:
    """Uniform placement, resampled until the max-power graph is connected.

    Returns the records (the sink last, id ``node_count``) and the number of
    resamples that were needed.
    """
    sink = [NodeRecord(cfg.node_count, cfg.sink_location())] if with_sink else []
    if cfg.nodes is not None:
        recs = [NodeRecord(i, xy) for i, xy in enumerate(cfg.nodes)] + sink
        if not is_connected(build_reference_graph(recs, cfg.model)):
            raise ScenarioInfeasible("explicit node set is not connected at maximum power")
        return recs, 0
    for attempt in range(cfg.max_resamples + 1):
        rng = np.random.default_rng([cfg.seed, attempt])
        xy = rng.uniform((0.0, 0.0), (cfg.width, cfg.height), size=(cfg.node_count, 2))
        recs = [NodeRecord(i, (float(x), float(y))) for i, (x, y) in enumerate(xy)] + sink
        try:
            ok = is_connected(build_reference_graph(recs, cfg.model))
        except ValueError:  # coincident points
            ok = False
        if ok:
            return recs, attempt
    raise ScenarioInfeasible(
        f"no connected placement after {cfg.max_resamples + 1} attempts (seed {cfg.seed})"
    )


@dataclass
class MetricsSeries:
    rows: list[tuple[float, ...]] = field(default_factory=list)

    def append(self, row: Sequence[float]) -> None:
        self.rows.append(tuple(row))

    def column(self, name: str) -> list[float]:
        k = CSV_COLUMNS.index(name)
        return [r[k] for r in self.rows]

    @property
    def final(self) -> dict[str, float]:
        return dict(zip(CSV_COLUMNS, self.rows[-1]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
        return buf.getvalue()


class Simulation:
    """Mutable simulation state plus the event loop."""

    def __init__(self, cfg: ScenarioConfig, seed: int | None = None, check_invariants: bool = False,
                 trace: bool = False):
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else seed
        self.check_invariants = check_invariants
        self.records, self.resamples = place_nodes(cfg)
        self.model = cfg.model
        self.schedule = cfg.schedule
        self.schedule.validate(self.model)
        self.sink: NodeId = cfg.node_count
        self.regular = [r.id for r in self.records if r.id != self.sink]
        self.locs = {r.id: r.loc for r in self.records}
        self.alive = {r.id: True for r in self.records}
        self.energy = {i: float(cfg.initial_energy) for i in self.regular}
        self.consumed = {i: 0.0 for i in self.regular}
        self.total_debited = 0.0
        self.clock = 0.0
        self.packets_delivered = 0
        self.packets_undeliverable = 0
        self.packets_dropped = 0
        self.hops_delivered = 0
        self.trace: list[dict[str, Any]] | None = [] if trace else None
        self._queue: list[tuple[float, int, int, NodeId]] = []
        self._seq = 0
        world = World(self.records)
        self.results: dict[NodeId, NodeResult] = {
            r.id: self._search(r.id, world) for r in self.records
        }
        self._refresh_graph()
        self.initial_results = dict(self.results)
        self._schedule_traffic()

    # -- topology ---------------------------------------------------------

    def _search(self, u: NodeId, world: World) -> NodeResult:
        cfg = self.cfg
        if cfg.protocol is Protocol.SMECN:
            return smecn_node(u, world, self.model, self.schedule, cfg.sampling)
        return mecn_node(u, world, self.model, self.schedule, cfg.sampling, cfg.order)

    def _alive_records(self) -> list[NodeRecord]:
        return [r for r in self.records if self.alive[r.id]]

    def _refresh_graph(self) -> None:
        edges = [
            (u, v)
            for u, res in self.results.items()
            if self.alive[u]
            for v in sorted(res.neighbors)
            if self.alive[v]
        ]
        self.graph = NetworkGraph(self.records, edges, self.model)
        self._next_hop, self._dist = next_hop_table(self.graph, self.sink)

    def alive_reference_graph(self) -> NetworkGraph:
        return build_reference_graph(self._alive_records(), self.model)

    def alive_protocol_graph(self) -> NetworkGraph:
        recs = self._alive_records()
        ids = {r.id for r in recs}
        return NetworkGraph(recs, (e for e in self.graph.edges() if e[0] in ids and e[1] in ids), self.model)

    def route(self, src: NodeId, dst: NodeId | None = None) -> list[NodeId] | None:
        """Cheapest path to the sink over the live protocol graph, or ``None``."""
        if dst is not None and dst != self.sink:
            raise ValueError("routing is only maintained towards the sink")
        if not self.alive[src]:
            raise ValueError(f"node {src} is dead")
        if src == self.sink:
            return [src]
        if src not in self._dist:
            return None
        path = [src]
        while path[-1] != self.sink:
            path.append(self._next_hop[path[-1]])
        return path

    # -- energy -----------------------------------------------------------

    def _debit(self, u: NodeId, amount: float) -> bool:
        """Charge ``u``; returns False when it could not pay in full (it dies)."""
        if u == self.sink or amount <= 0.0:
            return True
        have = self.energy[u]
        paid = amount if amount < have else have
        self.energy[u] = have - paid
        self.consumed[u] += paid
        self.total_debited += paid
        if paid >= have:
            self._pending_deaths.append(u)
        return paid == amount

    def deliver_packet(self, path: Sequence[NodeId]) -> list[tuple[NodeId, float]]:
        """Charge each hop of ``path``; returns ``(node, debit)`` pairs in charge order."""
        for u in path:
            if not self.alive[u]:
                raise ValueError(f"path uses dead node {u}")
        debits = []
        t_pkt = self.cfg.packet_time
        rx = self.model.c * t_pkt
        self._pending_deaths: list[NodeId] = []
        delivered = True
        for a, b in zip(path, path[1:]):
            before = self.consumed.get(a, 0.0)
            ok = self._debit(a, transmit_power(self.model, self.locs[a], self.locs[b]) * t_pkt)
            debits.append((a, self.consumed.get(a, 0.0) - before))
            if not ok:
                delivered = False
                break
            if rx > 0.0:
                before = self.consumed.get(b, 0.0)
                ok = self._debit(b, rx)
                debits.append((b, self.consumed.get(b, 0.0) - before))
                if not ok:
                    delivered = False
                    break
        if delivered:
            self.packets_delivered += 1
            self.hops_delivered += len(path) - 1
        else:
            self.packets_dropped += 1
        self._process_deaths()
        return debits

    def beacon_tick(self, u: NodeId) -> float:
        """Charge one beacon at the node's operating power; returns the debit."""
        self._pending_deaths = []
        before = self.consumed.get(u, 0.0)
        self._debit(u, self.results[u].power * self.cfg.beacon_time)
        self._process_deaths()
        return self.consumed.get(u, 0.0) - before

    def _process_deaths(self) -> None:
        for u in self._pending_deaths:
            if self.alive[u]:
                self.on_node_death(u)
        self._pending_deaths = []

    def on_node_death(self, u: NodeId) -> list[NodeId]:
        """Remove ``u`` and rerun the search wherever ``u`` had been discovered.

        Returns the reconfigured nodes.
        """
        self.alive[u] = False
        self._log("death", [u])
        world = World(self._alive_records())
        affected = [
            w for w, res in self.results.items()
            if self.alive[w] and u in res.discovered
        ]
        for w in affected:
            self.results[w] = self._search(w, world)
        self.results[u] = NodeResult(u, frozenset(), 0.0, 0, frozenset())
        self._refresh_graph()
        if affected:
            self._log("reconfigure", affected)
        if self.check_invariants:
            assert has_min_energy_property(self.alive_reference_graph(), self.alive_protocol_graph()), (
                f"minimum-energy property lost after death of {u}"
            )
        return affected

    # -- event loop -------------------------------------------------------

    def _push(self, time: float, kind: int, node: NodeId) -> None:
        heapq.heappush(self._queue, (time, self._seq, kind, node))
        self._seq += 1

    def _schedule_traffic(self) -> None:
        rng = np.random.default_rng([self.seed, 1])
        period = 1.0 / self.cfg.traffic_rate
        pkt_phase = rng.uniform(0.0, period, size=len(self.regular))
        beacon_phase = rng.uniform(0.0, self.cfg.beacon_interval, size=len(self.regular))
        for k, u in enumerate(self.regular):
            self._push(float(pkt_phase[k]), _PACKET, u)
            self._push(float(beacon_phase[k]), _BEACON, u)

    def _log(self, kind: str, nodes: Sequence[NodeId]) -> None:
        if self.trace is not None:
            self.trace.append({"time": self.clock, "kind": kind, "nodes": list(nodes)})

    def snapshot(self) -> tuple[float, ...]:
        alive = [u for u in self.regular if self.alive[u]]
        n_alive = len(alive)
        connected = sum(1 for u in alive if u in self._dist)
        degree = sum(len(self.graph.adj[u]) for u in alive) / n_alive if n_alive else 0.0
        power = sum(self.results[u].power for u in alive) / n_alive if n_alive else 0.0
        consumed = sum(self.consumed.values()) / len(self.regular) if self.regular else 0.0
        hops = self.hops_delivered / self.packets_delivered if self.packets_delivered else 0.0
        return (self.clock, n_alive, connected, degree, power, self.packets_delivered, consumed, hops)

    def run(self, duration: float | None = None) -> MetricsSeries:
        """Process events up to ``duration`` seconds, sampling metrics on a fixed cadence."""
        duration = self.cfg.duration if duration is None else duration
        series = MetricsSeries()
        interval = self.cfg.sample_interval
        n_samples = int(math.floor(duration / interval + 1e-9))
        ticks = [k * interval for k in range(n_samples + 1)]
        if ticks[-1] < duration:
            ticks.append(duration)
        for t in ticks:
            self._push(t, _SAMPLE, -1)
        period = 1.0 / self.cfg.traffic_rate
        while self._queue and self._queue[0][0] <= duration:
            time, _, kind, u = heapq.heappop(self._queue)
            self.clock = time
            if kind == _SAMPLE:
                series.append(self.snapshot())
            elif not self.alive[u]:
                continue
            elif kind == _PACKET:
                path = self.route(u)
                if path is None:
                    self.packets_undeliverable += 1
                    self._log("undeliverable", [u])
                else:
                    self.deliver_packet(path)
                self._push(time + period, _PACKET, u)
            else:
                self.beacon_tick(u)
                self._push(time + self.cfg.beacon_interval, _BEACON, u)
        return series

    # -- diagnostics ------------------------------------------------------

    @property
    def mean_delay(self) -> float:
        """Mean end-to-end delay of delivered packets (no MAC contention modeled)."""
        if not self.packets_delivered:
            return 0.0
        hops = self.hops_delivered / self.packets_delivered
        return hops * (self.cfg.packet_time + self.cfg.processing_delay)

    def conservation_error(self) -> float:
        """Relative gap between energy drawn from batteries and energy debited."""
        if math.isinf(self.cfg.initial_energy):
            drawn = sum(self.consumed.values())
        else:
            drawn = sum(self.cfg.initial_energy - e for e in self.energy.values())
        scale = max(abs(self.total_debited), 1e-300)
        return abs(drawn - self.total_debited) / scale if self.total_debited else abs(drawn)

    def trace_jsonl(self) -> str:
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.trace or [])


def init_sim(cfg: ScenarioConfig, seed: int | None = None, **kwargs: Any) -> Simulation:
    return Simulation(cfg, seed=seed, **kwargs)


def run(sim: Simulation, duration: float | None = None) -> MetricsSeries:
    return sim.run(duration)


def with_protocol(cfg: ScenarioConfig, protocol: Protocol | str) -> ScenarioConfig:
    return replace(cfg, protocol=Protocol(protocol))
