import math

import pytest

from minpower_net.graph import build_reference_graph, compute_E2, is_connected
from minpower_net.power import PowerModel
from minpower_net.protocols import run_protocol
from minpower_net.simulator import (
    CSV_COLUMNS,
    ScenarioConfig,
    ScenarioInfeasible,
    Simulation,
    place_nodes,
    with_protocol,
)

COLLINEAR = PowerModel(t=1.0, n=2.0, c=0.01, p_max=16.0)


def small_cfg(seed=0, **kw):
    base = dict(node_count=20, width=300.0, height=300.0, seed=seed,
                model=PowerModel.from_range(150.0, n=4.0), initial_energy=2e7,
                duration=60.0, sample_interval=5.0)
    base.update(kw)
    return ScenarioConfig(**base)


def test_two_node_scenario():
    cfg = ScenarioConfig(nodes=[(1.0, 1.0)], width=10, height=10, sink=(9.0, 9.0),
                         model=PowerModel.from_range(1e3, n=2.0), duration=5.0)
    sim = Simulation(cfg)
    assert sim.results[0].neighbors == {1}
    assert sim.results[1].neighbors == {0}
    assert sim.route(0) == [0, 1]
    assert sim.route(1) == [1]
    rows = sim.run().rows
    assert rows[-1][1] == 1 and rows[-1][2] == 1


def test_paper_defaults():
    cfg = ScenarioConfig()
    assert cfg.packet_time == pytest.approx(2.048e-3)
    assert cfg.beacon_time == pytest.approx(0.256e-3)
    assert cfg.sink_location() == (750.0, 0.0)
    assert cfg.model.max_range == pytest.approx(500.0)
    assert cfg.schedule.p0 == cfg.model.p_max / 1024


def test_placement_is_connected_and_reproducible():
    cfg = small_cfg(3)
    recs, resamples = place_nodes(cfg)
    assert len(recs) == 21 and recs[-1].loc == cfg.sink_location()
    assert is_connected(build_reference_graph(recs, cfg.model))
    assert place_nodes(cfg) == (recs, resamples)
    bare, _ = place_nodes(cfg, with_sink=False)
    assert len(bare) == 20


def test_unconnectable_scenario_fails():
    cfg = small_cfg(0, width=1e6, height=1e6, max_resamples=3)
    with pytest.raises(ScenarioInfeasible):
        place_nodes(cfg)
    with pytest.raises(ScenarioInfeasible):
        Simulation(ScenarioConfig(nodes=[(0, 0)], sink=(1e6, 0), model=COLLINEAR))


def test_collinear_route_and_middle_death():
    cfg = ScenarioConfig(nodes=[(0, 0), (1, 0)], sink=(2.0, 0.0), model=COLLINEAR)
    sim = Simulation(cfg)
    assert sim.route(0) == [0, 1, 2]
    assert sim.results[0].neighbors == {1}
    affected = sim.on_node_death(1)
    assert affected == [0, 2]
    assert sim.results[0].neighbors == {2}
    assert sim.route(0) == [0, 2]
    with pytest.raises(ValueError):
        sim.route(1)


def test_leaf_death_changes_nothing_else():
    cfg = ScenarioConfig(nodes=[(0, 0), (1, 0)], sink=(2.0, 0.0),
                         model=PowerModel(t=1.0, n=2.0, c=0.0, p_max=1.5))
    sim = Simulation(cfg)
    before = {u: r.neighbors for u, r in sim.results.items()}
    sim.on_node_death(0)
    assert sim.results[1].neighbors == before[1] - {0}
    assert sim.results[2].neighbors == before[2]
    assert sim.route(1) == [1, 2]


def test_cut_vertex_death_disconnects_component():
    cfg = ScenarioConfig(nodes=[(0, 0), (1, 0), (2, 0)], sink=(3.0, 0.0),
                         model=PowerModel(t=1.0, n=2.0, c=0.0, p_max=1.5))
    sim = Simulation(cfg)
    assert sim.snapshot()[2] == 3
    sim.on_node_death(2)
    snap = dict(zip(CSV_COLUMNS, sim.snapshot()))
    assert snap["alive"] == 2 and snap["sink_connected"] == 0
    assert sim.route(0) is None
    assert not any(2 in sim.graph.adj[u] for u in sim.graph.adj)


def test_packet_and_beacon_debits():
    model = PowerModel(t=1000.0, n=2.0, c=0.0, p_max=4000.0)
    sim = Simulation(ScenarioConfig(nodes=[(0, 0), (1, 0)], sink=(2.0, 0.0), model=model))
    debits = sim.deliver_packet([0, 1])
    assert debits == [(0, pytest.approx(2.048))]
    two = sim.deliver_packet([0, 1, 2])
    assert [u for u, _ in two] == [0, 1]
    assert sum(d for _, d in two) == pytest.approx(2 * 2.048)
    assert sim.beacon_tick(0) == pytest.approx(sim.results[0].power * 0.256e-3)
    assert sim.packets_delivered == 2

    withc = PowerModel(t=1000.0, n=2.0, c=50.0, p_max=4000.0)
    sim = Simulation(ScenarioConfig(nodes=[(0, 0), (1, 0)], sink=(2.0, 0.0), model=withc))
    debits = sim.deliver_packet([0, 1, 2])
    assert debits == [(0, pytest.approx(2.048)), (1, pytest.approx(50 * 2.048e-3)),
                      (1, pytest.approx(2.048)), (2, 0.0)]  # the sink is never charged


def test_mid_path_death_drops_packet():
    model = PowerModel(t=1000.0, n=2.0, c=0.0, p_max=4000.0)
    cfg = ScenarioConfig(nodes=[(0, 0), (1, 0)], sink=(2.0, 0.0), model=model, initial_energy=3.0)
    sim = Simulation(cfg)
    sim.energy[1] = 1.0
    debits = sim.deliver_packet([0, 1, 2])
    assert debits == [(0, pytest.approx(2.048)), (1, pytest.approx(1.0))]
    assert sim.packets_dropped == 1 and sim.packets_delivered == 0
    assert not sim.alive[1]
    assert min(sim.energy.values()) >= 0.0


def test_zero_duration_gives_initial_snapshot():
    sim = Simulation(small_cfg(1))
    rows = sim.run(0.0).rows
    assert len(rows) == 1
    assert rows[0][:3] == (0.0, 20, 20)


def test_infinite_energy_keeps_everyone_alive():
    sim = Simulation(small_cfg(2, initial_energy=math.inf))
    series = sim.run(30.0)
    assert set(series.column("alive")) == {20}
    assert series.final["packets_delivered"] > 0
    assert sim.conservation_error() <= 1e-6


def test_determinism():
    a = Simulation(small_cfg(4), trace=True)
    b = Simulation(small_cfg(4), trace=True)
    assert a.run().to_csv() == b.run().to_csv()
    assert a.trace_jsonl() == b.trace_jsonl()
    assert a.energy == b.energy


@pytest.mark.parametrize("protocol", ["smecn", "mecn"])
@pytest.mark.parametrize("seed", range(3))
def test_long_run_invariants(protocol, seed):
    sim = Simulation(small_cfg(seed, protocol=protocol, initial_energy=1e7), check_invariants=True, trace=True)
    series = sim.run()
    alive = series.column("alive")
    assert alive[-1] < alive[0]  # the budget is small enough to kill nodes
    assert all(x >= y for x, y in zip(alive, alive[1:]))
    for name in ("packets_delivered", "energy_consumed_mean"):
        col = series.column(name)
        assert all(x <= y for x, y in zip(col, col[1:]))
    assert sim.conservation_error() <= 1e-6
    assert min(sim.energy.values()) >= 0.0
    dead = {u for u, ok in sim.alive.items() if not ok}
    assert all(not sim.graph.adj[u] for u in dead)
    assert not any(v in dead for u in sim.graph.adj for v in sim.graph.adj[u])
    assert '"kind": "death"' in sim.trace_jsonl()


@pytest.mark.parametrize("seed", range(3))
def test_initial_dominance(seed):
    s = Simulation(small_cfg(seed))
    m = Simulation(with_protocol(small_cfg(seed), "mecn"))
    assert s.graph.edge_set() <= m.graph.edge_set()
    for u in s.results:
        assert s.results[u].power <= m.results[u].power
    ref = build_reference_graph(s.records, s.model)
    assert s.graph.edge_set() == compute_E2(ref).edge_set()
    assert s.graph.edge_set() == run_protocol(s.records, s.model).graph.edge_set()


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(traffic_rate=0)
    with pytest.raises(ValueError):
        ScenarioConfig(sink="middle")
    with pytest.raises(ValueError):
        ScenarioConfig(duration=-1)
    assert ScenarioConfig(sink="corner").sink_location() == (0.0, 0.0)
