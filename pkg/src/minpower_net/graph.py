"""Directed link graphs, minimum-energy paths and the redundancy oracles."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .power import Location, PowerModel, close, link_cost, transmit_power

NodeId = int
Edge = tuple[NodeId, NodeId]

# relative slack for treating two path costs as tied when routing
TIE_EPS = 1e-12


class Unreachable(Exception):
    """No path exists between the requested nodes."""


@dataclass(frozen=True)
class NodeRecord:
    id: NodeId
    loc: Location

    def __post_init__(self) -> None:
        object.__setattr__(self, "loc", Location(float(self.loc[0]), float(self.loc[1])))
        if not (math.isfinite(self.loc.x) and math.isfinite(self.loc.y)):
            raise ValueError(f"node {self.id} has a non-finite location")


def check_nodes(nodes: Iterable[NodeRecord]) -> list[NodeRecord]:
    out = sorted(nodes, key=lambda r: r.id)
    ids = set()
    locs = set()
    for r in out:
        if r.id in ids:
            raise ValueError(f"duplicate node id {r.id}")
        if r.loc in locs:
            raise ValueError(f"duplicate location {tuple(r.loc)} (node {r.id})")
        ids.add(r.id)
        locs.add(r.loc)
    return out


class NetworkGraph:
    """Directed graph over located nodes with cached link costs.

    Treated as immutable once built; derive new graphs with
    :meth:`with_edges` or :meth:`without_edges`.
    """

    def __init__(self, nodes: Iterable[NodeRecord], edges: Iterable[Edge], model: PowerModel):
        self.model = model
        self.nodes: dict[NodeId, Location] = {r.id: r.loc for r in check_nodes(nodes)}
        adj: dict[NodeId, dict[NodeId, float]] = {i: {} for i in self.nodes}
        for u, v in edges:
            if u not in self.nodes or v not in self.nodes:
                raise KeyError(f"edge ({u}, {v}) references an unknown node")
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            adj[u][v] = link_cost(model, self.nodes[u], self.nodes[v])
        self.adj = {u: dict(sorted(nbrs.items())) for u, nbrs in adj.items()}

    def records(self) -> list[NodeRecord]:
        return [NodeRecord(i, loc) for i, loc in self.nodes.items()]

    def edges(self) -> Iterator[Edge]:
        for u, nbrs in self.adj.items():
            for v in nbrs:
                yield (u, v)

    def edge_set(self) -> frozenset[Edge]:
        return frozenset(self.edges())

    def cost(self, u: NodeId, v: NodeId) -> float:
        return self.adj[u][v]

    def has_edge(self, u: NodeId, v: NodeId) -> bool:
        return v in self.adj.get(u, ())

    def out_neighbors(self, u: NodeId) -> list[NodeId]:
        return list(self.adj[u])

    @property
    def num_edges(self) -> int:
        return sum(len(n) for n in self.adj.values())

    def mean_out_degree(self) -> float:
        return self.num_edges / len(self.nodes) if self.nodes else 0.0

    def is_symmetric(self) -> bool:
        return all(self.has_edge(v, u) for u, v in self.edges())

    def with_edges(self, edges: Iterable[Edge]) -> "NetworkGraph":
        return NetworkGraph(self.records(), edges, self.model)

    def without_edges(self, drop: Iterable[Edge]) -> "NetworkGraph":
        drop = set(drop)
        return self.with_edges(e for e in self.edges() if e not in drop)

    def reverse_adj(self) -> dict[NodeId, dict[NodeId, float]]:
        radj: dict[NodeId, dict[NodeId, float]] = {i: {} for i in self.nodes}
        for u, nbrs in self.adj.items():
            for v, w in nbrs.items():
                radj[v][u] = w
        return radj

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NetworkGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edge_set() == other.edge_set() and self.model == other.model

    def __repr__(self) -> str:
        return f"NetworkGraph({len(self.nodes)} nodes, {self.num_edges} edges)"


def build_reference_graph(nodes: Iterable[NodeRecord], model: PowerModel) -> NetworkGraph:
    """All links usable at maximum power (disc rule, no obstacles)."""
    recs = check_nodes(nodes)
    if not recs:
        return NetworkGraph([], [], model)
    ids = np.array([r.id for r in recs])
    xy = np.array([r.loc for r in recs], dtype=float)
    dx = xy[:, 0, None] - xy[None, :, 0]
    dy = xy[:, 1, None] - xy[None, :, 1]
    power = model.t * (dx * dx + dy * dy) ** (0.5 * model.n)
    ok = power <= model.p_max
    np.fill_diagonal(ok, False)
    iu, iv = np.nonzero(ok)
    return NetworkGraph(recs, zip(ids[iu].tolist(), ids[iv].tolist()), model)


def is_connected(g: NetworkGraph) -> bool:
    """Strong connectivity (graph search from one node both ways)."""
    if len(g.nodes) <= 1:
        return True
    start = next(iter(g.nodes))
    for adj in (g.adj, g.reverse_adj()):
        seen = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        if len(seen) != len(g.nodes):
            return False
    return True


def distances_to(adj_rev: Mapping[NodeId, Mapping[NodeId, float]], dst: NodeId) -> dict[NodeId, float]:
    """Dijkstra on reversed edges: cost from every node to ``dst``."""
    dist = {dst: 0.0}
    heap = [(0.0, dst)]
    done = set()
    while heap:
        d, x = heapq.heappop(heap)
        if x in done:
            continue
        done.add(x)
        for y, w in adj_rev[x].items():
            nd = w + d
            if nd < dist.get(y, math.inf):
                dist[y] = nd
                heapq.heappush(heap, (nd, y))
    return dist


def next_hop_table(g: NetworkGraph, dst: NodeId) -> tuple[dict[NodeId, NodeId], dict[NodeId, float]]:
    """Per-node next hop on the lexicographically smallest cheapest path to ``dst``."""
    dist = distances_to(g.reverse_adj(), dst)
    nxt: dict[NodeId, NodeId] = {}
    for x, dx in dist.items():
        if x == dst:
            continue
        for y, w in g.adj[x].items():  # ascending id
            dy = dist.get(y)
            if dy is not None and dy < dx and close(w + dy, dx, rel=TIE_EPS):
                nxt[x] = y
                break
    return nxt, dist


def min_energy_path(g: NetworkGraph, src: NodeId, dst: NodeId) -> tuple[list[NodeId], float]:
    """Cheapest path from ``src`` to ``dst``.

    Among equal-cost paths the smallest node-id sequence wins, which the
    greedy walk over the tight-edge DAG produces. Raises :class:`Unreachable`.
    """
    if src not in g.nodes or dst not in g.nodes:
        raise KeyError("src and dst must be nodes of the graph")
    if src == dst:
        return [src], 0.0
    nxt, dist = next_hop_table(g, dst)
    if src not in dist:
        raise Unreachable(f"no path from {src} to {dst}")
    path = [src]
    while path[-1] != dst:
        path.append(nxt[path[-1]])
        if len(path) > len(g.nodes):
            raise RuntimeError("next-hop table has a cycle")
    return path, dist[src]


def all_pairs_costs(g: NetworkGraph) -> tuple[list[NodeId], np.ndarray]:
    """Dense matrix of minimum path costs (``inf`` when unreachable)."""
    ids = list(g.nodes)
    if not ids:
        return ids, np.zeros((0, 0))
    index = {i: k for k, i in enumerate(ids)}
    rows, cols, data = [], [], []
    for u, v in g.edges():
        rows.append(index[u])
        cols.append(index[v])
        data.append(g.adj[u][v])
    mat = csr_matrix((data, (rows, cols)), shape=(len(ids), len(ids)))
    return ids, _csgraph_dijkstra(mat, directed=True)


def compute_E2(g_ref: NetworkGraph) -> NetworkGraph:
    """Drop every edge beaten (``<=``) by some two-hop path through a third node."""
    ids = list(g_ref.nodes)
    n = len(ids)
    index = {i: k for k, i in enumerate(ids)}
    cost = np.full((n, n), np.inf)
    for u, v in g_ref.edges():
        cost[index[u], index[v]] = g_ref.adj[u][v]
    keep = []
    for u, v in g_ref.edges():
        iu, iv = index[u], index[v]
        via = cost[iu, :] + cost[:, iv]
        via[[iu, iv]] = np.inf
        if not (via <= cost[iu, iv]).any():
            keep.append((u, v))
    return g_ref.with_edges(keep)


def compute_Emin(g_ref: NetworkGraph) -> NetworkGraph:
    """Drop every edge matched or beaten by any multihop path.

    An alternative route leaves ``u`` through some first hop ``w != v`` and
    then follows a cheapest ``w -> v`` path, so comparing
    ``cost(u, w) + dist(w, v)`` with the direct cost covers all paths. Routes
    that revisit ``u`` are never cheaper than their loop-free suffix.
    """
    ids, dist = all_pairs_costs(g_ref)
    index = {i: k for k, i in enumerate(ids)}
    keep = []
    for u, v in g_ref.edges():
        direct = g_ref.adj[u][v]
        iv = index[v]
        beaten = any(
            w != v and c_uw + dist[index[w], iv] <= direct
            for w, c_uw in g_ref.adj[u].items()
        )
        if not beaten:
            keep.append((u, v))
    return g_ref.with_edges(keep)


def has_min_energy_property(g_ref: NetworkGraph, g_sub: NetworkGraph) -> bool:
    """Every pair connected in ``g_ref`` keeps its optimal cost in ``g_sub``."""
    if set(g_sub.nodes) != set(g_ref.nodes):
        raise ValueError("subgraph must span the same nodes")
    if not g_sub.edge_set() <= g_ref.edge_set():
        raise ValueError("subgraph edges must be reference edges")
    ids_r, d_ref = all_pairs_costs(g_ref)
    ids_s, d_sub = all_pairs_costs(g_sub)
    assert ids_r == ids_s
    finite = np.isfinite(d_ref)
    if not np.isfinite(d_sub[finite]).all():
        return False
    a, b = d_ref[finite], d_sub[finite]
    tol = np.maximum(1e-9 * np.maximum(np.abs(a), np.abs(b)), 1e-12)
    return bool((np.abs(a - b) <= tol).all())


def _k_hop_min_costs(g: NetworkGraph, src: NodeId, dst: NodeId, k: int) -> float:
    """Cheapest walk of exactly ``k`` hops from ``src`` to ``dst``, by enumeration or DP."""
    if k <= 4:
        best = math.inf

        def walk(x: NodeId, hops: int, acc: float, seen: tuple[NodeId, ...]) -> None:
            nonlocal best
            if hops == k:
                if x == dst:
                    best = min(best, acc)
                return
            for y, w in g.adj[x].items():
                if y in seen and y != dst:
                    continue
                if y == dst and hops + 1 != k:
                    continue
                walk(y, hops + 1, acc + w, seen + (y,))

        walk(src, 0, 0.0, (src,))
        return best
    # layered DP over walks; revisits only raise the cost when c >= 0
    cur = {src: 0.0}
    for _ in range(k):
        nxt: dict[NodeId, float] = {}
        for x, acc in cur.items():
            for y, w in g.adj[x].items():
                if acc + w < nxt.get(y, math.inf):
                    nxt[y] = acc + w
        cur = nxt
    return cur.get(dst, math.inf)


def is_k_redundant(g_ref: NetworkGraph, edge: Edge, k: int) -> bool:
    """Is ``edge`` matched or beaten by some path of exactly ``k`` hops?"""
    if k < 2:
        raise ValueError("k must be at least 2")
    u, v = edge
    if not g_ref.has_edge(u, v):
        raise KeyError(f"{edge} is not a reference edge")
    return _k_hop_min_costs(g_ref, u, v, k) <= g_ref.adj[u][v]


def enumerate_simple_paths(g: NetworkGraph, src: NodeId, dst: NodeId) -> Iterator[tuple[list[NodeId], float]]:
    """All simple paths with their costs; exponential, for small oracle checks only."""
    stack = [(src, [src], 0.0)]
    while stack:
        x, path, acc = stack.pop()
        if x == dst:
            yield path, acc
            continue
        for y, w in g.adj[x].items():
            if y not in path:
                stack.append((y, path + [y], acc + w))


def path_cost_in(g: NetworkGraph, path: Sequence[NodeId]) -> float:
    return sum(g.adj[a][b] for a, b in zip(path, path[1:]))


def edge_transmit_power(g: NetworkGraph, u: NodeId, v: NodeId) -> float:
    return transmit_power(g.model, g.nodes[u], g.nodes[v])
