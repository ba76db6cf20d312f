"""Minimum-energy topology control for multihop wireless networks.

SMECN and MECN neighbor searches, brute-force redundancy oracles, a
minimum-energy-property verifier and a lifetime simulator.
"""

from .graph import (
    NetworkGraph,
    NodeRecord,
    Unreachable,
    build_reference_graph,
    compute_E2,
    compute_Emin,
    has_min_energy_property,
    is_k_redundant,
    min_energy_path,
)
from .kernels import BACKEND
from .power import (
    Location,
    PowerModel,
    link_cost,
    max_range,
    path_cost,
    relay_beats_direct,
    transmit_power,
)
from .protocols import (
    EscalationSchedule,
    NodeResult,
    Protocol,
    ProtocolResult,
    World,
    mecn_node,
    run_protocol,
    smecn_node,
)
from .regions import (
    BroadcastRegion,
    EtaRegion,
    SamplingSpec,
    eta_contains,
    min_covering_power,
    region_covers_eta,
)
from .simulator import MetricsSeries, ScenarioConfig, ScenarioInfeasible, Simulation, init_sim

__version__ = "0.1.0"
