"""JSON documents: scenarios, graphs, topologies and protocol results."""

from __future__ import annotations

import json
from dataclasses import fields
from pathlib import Path
from typing import Any, Mapping

from .graph import NetworkGraph, NodeRecord
from .power import PowerModel
from .protocols import Protocol, ProtocolResult
from .regions import SamplingSpec
from .simulator import ScenarioConfig

SCHEMA_VERSION = 1


class DocumentError(ValueError):
    pass


def model_to_dict(model: PowerModel) -> dict[str, float]:
    return {"t": model.t, "n": model.n, "c": model.c, "p_max": model.p_max}


def model_from_dict(d: Mapping[str, Any]) -> PowerModel:
    return PowerModel(t=float(d["t"]), n=float(d["n"]), c=float(d["c"]), p_max=float(d["p_max"]))


def nodes_to_list(nodes: Mapping[int, Any] | list[NodeRecord]) -> list[dict[str, float]]:
    items = nodes.items() if isinstance(nodes, Mapping) else ((r.id, r.loc) for r in nodes)
    return [{"id": int(i), "x": float(loc[0]), "y": float(loc[1])} for i, loc in items]


def nodes_from_list(items: list[Mapping[str, Any]]) -> list[NodeRecord]:
    return [NodeRecord(int(d["id"]), (float(d["x"]), float(d["y"]))) for d in items]


def edges_to_list(g: NetworkGraph) -> list[dict[str, Any]]:
    return [{"from": u, "to": v, "cost": g.adj[u][v]} for u, v in g.edges()]


def graph_to_dict(g: NetworkGraph) -> dict[str, Any]:
    return {"model": model_to_dict(g.model), "nodes": nodes_to_list(g.nodes), "edges": edges_to_list(g)}


def graph_from_dict(d: Mapping[str, Any]) -> NetworkGraph:
    """Rebuild a graph; listed costs must agree with the locations."""
    model = model_from_dict(d["model"])
    g = NetworkGraph(nodes_from_list(d["nodes"]), [(int(e["from"]), int(e["to"])) for e in d["edges"]], model)
    for e in d["edges"]:
        if "cost" in e:
            want = g.adj[int(e["from"])][int(e["to"])]
            if abs(float(e["cost"]) - want) > 1e-9 * max(abs(want), 1.0):
                raise DocumentError(f"edge {e['from']}->{e['to']} cost {e['cost']} disagrees with geometry")
    return g


def protocol_result_to_dict(res: ProtocolResult) -> dict[str, Any]:
    return {
        "protocol": res.protocol.value,
        "nodes": [
            {
                "id": u,
                "neighbors": sorted(r.neighbors),
                "power": r.power,
                "iterations": r.iterations,
            }
            for u, r in sorted(res.nodes.items())
        ],
        "edges": edges_to_list(res.graph),
    }


_SCALARS = (
    "node_count", "width", "height", "seed", "p0", "order", "traffic_rate", "packet_bytes",
    "bandwidth_bps", "duration", "initial_energy", "beacon_interval", "beacon_bytes",
    "sample_interval", "processing_delay", "max_resamples",
)


def scenario_to_dict(cfg: ScenarioConfig, resamples: int | None = None) -> dict[str, Any]:
    doc: dict[str, Any] = {"version": SCHEMA_VERSION}
    for name in _SCALARS:
        doc[name] = getattr(cfg, name)
    if not isinstance(cfg.order, str):
        doc["order"] = [int(i) for i in cfg.order]
    doc["protocol"] = cfg.protocol.value
    doc["model"] = model_to_dict(cfg.model)
    doc["sampling"] = {"rays": cfg.sampling.rays, "radial_samples": cfg.sampling.radial_samples}
    doc["sink"] = cfg.sink if isinstance(cfg.sink, str) else {"x": cfg.sink[0], "y": cfg.sink[1]}
    if resamples is not None:
        doc["resamples"] = resamples
    doc["nodes"] = (
        None if cfg.nodes is None
        else [{"id": i, "x": x, "y": y} for i, (x, y) in enumerate(cfg.nodes)]
    )
    return doc


def scenario_from_dict(doc: Mapping[str, Any]) -> ScenarioConfig:
    version = doc.get("version")
    if version != SCHEMA_VERSION:
        raise DocumentError(f"unsupported scenario version {version!r} (expected {SCHEMA_VERSION})")
    known = {f.name for f in fields(ScenarioConfig)}
    kwargs: dict[str, Any] = {k: doc[k] for k in _SCALARS if k in doc and k in known}
    if isinstance(kwargs.get("order"), list):
        kwargs["order"] = tuple(int(i) for i in kwargs["order"])
    if "protocol" in doc:
        kwargs["protocol"] = Protocol(doc["protocol"])
    if "model" in doc:
        kwargs["model"] = model_from_dict(doc["model"])
    if "sampling" in doc:
        s = doc["sampling"]
        kwargs["sampling"] = SamplingSpec(int(s["rays"]), int(s["radial_samples"]))
    else:
        kwargs["sampling"] = SamplingSpec.from_env()
    sink = doc.get("sink")
    if isinstance(sink, Mapping):
        kwargs["sink"] = (float(sink["x"]), float(sink["y"]))
    elif sink is not None:
        kwargs["sink"] = sink
    nodes = doc.get("nodes")
    if nodes is not None:
        recs = sorted(nodes_from_list(nodes), key=lambda r: r.id)
        if [r.id for r in recs] != list(range(len(recs))):
            raise DocumentError("explicit node ids must be 0..N-1")
        kwargs["nodes"] = tuple(tuple(r.loc) for r in recs)
    try:
        return ScenarioConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise DocumentError(str(exc)) from exc


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def write(path: str | Path, doc: Any) -> None:
    Path(path).write_text(dumps(doc))


def read(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: {exc}") from exc


def load_scenario(path: str | Path) -> ScenarioConfig:
    return scenario_from_dict(read(path))
