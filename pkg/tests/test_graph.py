import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import instance_model, random_nodes
from minpower_net.documents import graph_from_dict, graph_to_dict, DocumentError
from minpower_net.graph import (
    NetworkGraph,
    NodeRecord,
    Unreachable,
    all_pairs_costs,
    build_reference_graph,
    compute_E2,
    compute_Emin,
    enumerate_simple_paths,
    has_min_energy_property,
    is_connected,
    is_k_redundant,
    min_energy_path,
    path_cost_in,
)
from minpower_net.power import PowerModel


def test_reference_graph_range_boundary():
    model = PowerModel.from_range(100.0, n=2.0)
    near = [NodeRecord(0, (0, 0)), NodeRecord(1, (99.0, 0))]
    far = [NodeRecord(0, (0, 0)), NodeRecord(1, (101.0, 0))]
    assert build_reference_graph(near, model).edge_set() == {(0, 1), (1, 0)}
    assert build_reference_graph(far, model).num_edges == 0
    assert not is_connected(build_reference_graph(far, model))


def test_duplicate_nodes_rejected():
    model = PowerModel.from_range(10.0)
    with pytest.raises(ValueError):
        build_reference_graph([NodeRecord(0, (1, 1)), NodeRecord(1, (1, 1))], model)
    with pytest.raises(ValueError):
        build_reference_graph([NodeRecord(0, (1, 1)), NodeRecord(0, (2, 1))], model)
    with pytest.raises(ValueError):
        NodeRecord(0, (math.nan, 0))


def test_min_energy_path_examples(collinear):
    nodes, model = collinear
    g = build_reference_graph(nodes, model)
    assert min_energy_path(g, 1, 1) == ([1], 0.0)
    assert min_energy_path(g, 0, 2) == ([0, 1, 2], 2.0)
    assert min_energy_path(g, 2, 0) == ([2, 1, 0], 2.0)
    cut = g.without_edges([(1, 2), (0, 2)])
    with pytest.raises(Unreachable):
        min_energy_path(cut, 0, 2)


def test_e2_differs_from_emin(e2_ne_emin):
    nodes, model = e2_ne_emin
    g = build_reference_graph(nodes, model)
    path, cost = min_energy_path(g, 0, 1)
    assert path == [0, 2, 3, 1]
    assert cost == pytest.approx(15.5, rel=1e-12)
    e2, emin = compute_E2(g), compute_Emin(g)
    assert (0, 1) in e2.edge_set() and (0, 1) not in emin.edge_set()
    assert (1, 0) in e2.edge_set() and (1, 0) not in emin.edge_set()
    assert e2.num_edges - emin.num_edges == 2
    assert not is_k_redundant(g, (0, 1), 2)
    assert is_k_redundant(g, (0, 1), 3)
    assert has_min_energy_property(g, e2)
    assert has_min_energy_property(g, emin)


def test_walk_dp_for_long_paths():
    # five unit hops beat one long hop when n=2
    model = PowerModel(t=1.0, n=2.0, c=0.0, p_max=100.0)
    g = build_reference_graph([NodeRecord(i, (float(i), 0.0)) for i in range(7)], model)
    assert is_k_redundant(g, (0, 5), 5)
    assert is_k_redundant(g, (0, 6), 6)
    assert not is_k_redundant(g, (0, 1), 5)
    with pytest.raises(ValueError):
        is_k_redundant(g, (0, 1), 1)


@pytest.mark.parametrize("seed", range(12))
def test_edge_set_chain(seed):
    model = instance_model(seed)
    g = build_reference_graph(random_nodes(seed, count=16), model)
    e2, emin = compute_E2(g), compute_Emin(g)
    assert emin.edge_set() <= e2.edge_set() <= g.edge_set()
    assert has_min_energy_property(g, emin)
    assert has_min_energy_property(g, e2)


@pytest.mark.parametrize("seed", range(12))
def test_emin_is_minimal(seed):
    model = instance_model(seed, rng_range=450.0)
    g = build_reference_graph(random_nodes(seed, count=4 + seed % 9), model)
    emin = compute_Emin(g)
    for e in emin.edges():
        assert not has_min_energy_property(g, emin.without_edges([e]))


@pytest.mark.parametrize("seed", range(8))
def test_costs_match_simple_path_enumeration(seed):
    model = instance_model(seed, rng_range=500.0)
    g = build_reference_graph(random_nodes(seed, count=6 + seed % 3), model)
    ids, dist = all_pairs_costs(g)
    emin = compute_Emin(g)
    for a, b in itertools.permutations(ids, 2):
        costs = [c for _, c in enumerate_simple_paths(g, a, b)]
        best = min(costs, default=math.inf)
        assert dist[ids.index(a), ids.index(b)] == pytest.approx(best, rel=1e-12)
        if g.has_edge(a, b):
            others = [c for p, c in enumerate_simple_paths(g, a, b) if len(p) > 2]
            kept = (a, b) in emin.edge_set()
            assert kept == all(c > g.cost(a, b) for c in others)


@pytest.mark.parametrize("seed", range(6))
def test_scaling_t_preserves_topologies(seed):
    nodes = random_nodes(seed, count=15)
    base = instance_model(seed)
    scaled = PowerModel(t=7.5 * base.t, n=base.n, c=7.5 * base.c, p_max=7.5 * base.p_max)
    g1, g2 = build_reference_graph(nodes, base), build_reference_graph(nodes, scaled)
    assert g1.edge_set() == g2.edge_set()
    assert compute_E2(g1).edge_set() == compute_E2(g2).edge_set()
    assert compute_Emin(g1).edge_set() == compute_Emin(g2).edge_set()


def test_tie_break_prefers_smallest_sequence():
    # a square: 0->1->3 and 0->2->3 cost the same
    model = PowerModel(t=1.0, n=2.0, c=0.0, p_max=1.5)
    nodes = [NodeRecord(0, (0, 0)), NodeRecord(2, (1, 0)), NodeRecord(1, (0, 1)), NodeRecord(3, (1, 1))]
    g = build_reference_graph(nodes, model)
    assert min_energy_path(g, 0, 3) == ([0, 1, 3], 2.0)
    assert min_energy_path(g, 3, 0) == ([3, 1, 0], 2.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_tie_break_matches_brute_force(seed):
    # integer grid positions create plenty of exact ties
    rng = np.random.default_rng(seed)
    pts = {tuple(p) for p in rng.integers(0, 4, size=(7, 2)).tolist()}
    nodes = [NodeRecord(i, p) for i, p in enumerate(sorted(pts))]
    model = PowerModel(t=1.0, n=2.0, c=0.0, p_max=5.0)
    g = build_reference_graph(nodes, model)
    for a, b in itertools.permutations(g.nodes, 2):
        paths = list(enumerate_simple_paths(g, a, b))
        if not paths:
            with pytest.raises(Unreachable):
                min_energy_path(g, a, b)
            continue
        best = min(c for _, c in paths)
        tight = sorted(p for p, c in paths if c <= best * (1 + 1e-12))
        path, cost = min_energy_path(g, a, b)
        assert cost == pytest.approx(best, rel=1e-12)
        assert path == tight[0]
        assert path_cost_in(g, path) == pytest.approx(cost, rel=1e-12)


def test_graph_document_round_trip(e2_ne_emin):
    nodes, model = e2_ne_emin
    g = compute_E2(build_reference_graph(nodes, model))
    back = graph_from_dict(graph_to_dict(g))
    assert back == g
    assert back.adj == g.adj
    doc = graph_to_dict(g)
    doc["edges"][0]["cost"] += 1.0
    with pytest.raises(DocumentError):
        graph_from_dict(doc)


def test_subgraph_checks():
    model = PowerModel.from_range(10.0, n=2.0)
    g = build_reference_graph([NodeRecord(0, (0, 0)), NodeRecord(1, (3, 0))], model)
    other = NetworkGraph([NodeRecord(0, (0, 0))], [], model)
    with pytest.raises(ValueError):
        has_min_energy_property(g, other)
    assert not has_min_energy_property(g, g.without_edges([(0, 1)]))
