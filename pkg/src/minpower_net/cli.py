"""``minpower-net`` command-line tool.

Exit codes: 0 success, 1 property failure, 2 usage error, 3 infeasible scenario.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

from . import documents
from .graph import (
    NetworkGraph,
    build_reference_graph,
    compute_E2,
    compute_Emin,
    has_min_energy_property,
)
from .power import PowerModel
from .protocols import ORDER_POLICIES, Protocol, run_protocol
from .regions import SamplingSpec
from .simulator import ScenarioConfig, ScenarioInfeasible, Simulation, place_nodes

EXIT_OK, EXIT_PROPERTY, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3
METHODS = ("reference", "smecn", "mecn", "e2", "emin")


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _sampling(args: argparse.Namespace, spec: SamplingSpec) -> SamplingSpec:
    rays = args.rays if args.rays is not None else spec.rays
    radii = args.radii if args.radii is not None else spec.radial_samples
    return SamplingSpec(rays, radii)


def _load(path: str) -> ScenarioConfig:
    try:
        return documents.load_scenario(path)
    except OSError as exc:
        raise UsageError(f"cannot read scenario: {exc}") from exc
    except documents.DocumentError as exc:
        raise UsageError(f"bad scenario: {exc}") from exc


def _scenario_nodes(cfg: ScenarioConfig):
    recs, _ = place_nodes(cfg)
    return [r for r in recs if r.id != cfg.node_count]


def _order(value: str) -> Any:
    if value in ORDER_POLICIES:
        return value
    try:
        return tuple(int(x) for x in value.split(","))
    except ValueError:
        raise UsageError(f"order must be one of {ORDER_POLICIES} or a comma-separated id list") from None


# -- generate -----------------------------------------------------------------

def cmd_generate(args: argparse.Namespace) -> int:
    if args.p_max is not None and args.range is not None:
        raise UsageError("give either --range or --p-max, not both")
    try:
        if args.p_max is not None:
            model = PowerModel(t=args.t, n=args.n, c=args.c, p_max=args.p_max)
        else:
            model = PowerModel.from_range(args.range if args.range is not None else 500.0, t=args.t, n=args.n, c=args.c)
        sink: Any = args.sink
        if "," in sink:
            x, y = sink.split(",")
            sink = (float(x), float(y))
        cfg = ScenarioConfig(node_count=args.count, width=args.width, height=args.height,
                             seed=args.seed, model=model, sink=sink)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    recs, resamples = place_nodes(cfg)
    nodes = tuple(tuple(r.loc) for r in recs if r.id != cfg.node_count)
    cfg = replace(cfg, nodes=nodes)
    _emit(documents.dumps(documents.scenario_to_dict(cfg, resamples)), args.out)
    return EXIT_OK


# -- topo -----------------------------------------------------------------------

def compute_topologies(cfg: ScenarioConfig, methods: Sequence[str], order: Any = None,
                       spec: SamplingSpec | None = None) -> dict[str, Any]:
    """Edge sets per method plus the protocol per-node records, as a topology document."""
    nodes = _scenario_nodes(cfg)
    model = cfg.model
    spec = spec or cfg.sampling
    order = cfg.order if order is None else order
    ref = build_reference_graph(nodes, model)
    graphs: dict[str, NetworkGraph] = {}
    protocols: dict[str, Any] = {}
    power: dict[str, dict[str, float]] = {}
    for m in methods:
        if m == "reference":
            graphs[m] = ref
        elif m == "e2":
            graphs[m] = compute_E2(ref)
        elif m == "emin":
            graphs[m] = compute_Emin(ref)
        else:
            res = run_protocol(nodes, model, cfg.schedule, spec, Protocol(m), order)
            graphs[m] = res.graph
            protocols[m] = documents.protocol_result_to_dict(res)
            power[m] = {str(u): r.power for u, r in sorted(res.nodes.items())}
    summary = {}
    for m, g in graphs.items():
        entry: dict[str, Any] = {"edges": g.num_edges, "mean_out_degree": g.mean_out_degree()}
        if m in power:
            vals = list(power[m].values())
            entry["mean_power"] = sum(vals) / len(vals) if vals else 0.0
        summary[m] = entry
    return {
        "version": documents.SCHEMA_VERSION,
        "model": documents.model_to_dict(model),
        "nodes": documents.nodes_to_list(nodes),
        "edges": {m: documents.edges_to_list(g) for m, g in graphs.items()},
        "power": power,
        "protocols": protocols,
        "summary": summary,
    }


def _methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise UsageError(f"unknown method(s) {bad}; choose from {METHODS}")
    # reference is always emitted so every edge list can be checked against it
    return ["reference"] + [m for m in methods if m != "reference"]


def cmd_topo(args: argparse.Namespace) -> int:
    methods = _methods(args.methods)
    cfg = _load(args.scenario)
    order = _order(args.order) if args.order else None
    doc = compute_topologies(cfg, methods, order, _sampling(args, cfg.sampling))
    _emit(documents.dumps(doc), args.out)
    for m, s in doc["summary"].items():
        line = f"{m:>9}: {s['edges']:6d} edges, mean out-degree {s['mean_out_degree']:.3f}"
        if "mean_power" in s:
            line += f", mean power {s['mean_power']:.6g}"
        print(line, file=sys.stderr)
    return EXIT_OK


# -- verify ---------------------------------------------------------------------

def verify_report(cfg: ScenarioConfig, method: str, spec: SamplingSpec,
                  candidate: NetworkGraph | None = None, order: Any = None) -> list[tuple[str, bool]]:
    nodes = _scenario_nodes(cfg)
    model = cfg.model
    order = cfg.order if order is None else order
    ref = build_reference_graph(nodes, model)
    emin = compute_Emin(ref)
    smecn = run_protocol(nodes, model, cfg.schedule, spec, Protocol.SMECN).graph
    mecn = run_protocol(nodes, model, cfg.schedule, spec, Protocol.MECN, order).graph
    if candidate is None:
        candidate = {"reference": ref, "smecn": smecn, "mecn": mecn,
                     "e2": compute_E2(ref), "emin": emin}[method]
    edges = candidate.edge_set()
    in_ref = edges <= ref.edge_set()
    checks = [
        (f"{method} edges within reference graph", in_ref),
        (f"{method} has the minimum-energy property", in_ref and has_min_energy_property(ref, candidate)),
        (f"emin within {method}", emin.edge_set() <= edges),
        ("smecn within mecn", smecn.edge_set() <= mecn.edge_set()),
    ]
    return checks


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = _load(args.scenario)
    candidate = None
    method = args.method
    if args.edges:
        try:
            doc = documents.read(args.edges)
            candidate = documents.graph_from_dict(doc)
        except (OSError, documents.DocumentError, KeyError) as exc:
            raise UsageError(f"bad edge document: {exc}") from exc
        method = Path(args.edges).stem
    elif method not in METHODS:
        raise UsageError(f"unknown method {method!r}; choose from {METHODS}")
    order = _order(args.order) if args.order else None
    checks = verify_report(cfg, method, _sampling(args, cfg.sampling), candidate, order)
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK if all(ok for _, ok in checks) else EXIT_PROPERTY


# -- simulate -------------------------------------------------------------------

GNUPLOT_TEMPLATE = """\
set datafile separator ","
set key autotitle columnhead
set xlabel "time (s)"
set ylabel "nodes"
plot "{csv}" using 1:2 with lines title "alive", \\
     "{csv}" using 1:3 with lines title "connected to sink"
"""


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load(args.scenario)
    try:
        overrides: dict[str, Any] = {}
        if args.protocol:
            overrides["protocol"] = Protocol(args.protocol)
        if args.duration is not None:
            overrides["duration"] = args.duration
        if args.energy is not None:
            overrides["initial_energy"] = args.energy
        if args.order:
            overrides["order"] = _order(args.order)
        if args.rays is not None or args.radii is not None:
            overrides["sampling"] = _sampling(args, cfg.sampling)
        cfg = replace(cfg, **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    sim = Simulation(cfg, seed=args.seed, trace=bool(args.trace))
    series = sim.run()
    _emit(series.to_csv(), args.out)
    if args.trace:
        Path(args.trace).write_text(sim.trace_jsonl())
    if args.plot_script:
        target = args.out if args.out not in (None, "-") else "metrics.csv"
        Path(args.plot_script).write_text(GNUPLOT_TEMPLATE.format(csv=target))
    return EXIT_OK


# -- compare --------------------------------------------------------------------

COMPARE_COLUMNS = (
    "seed", "degree_smecn", "degree_mecn", "degree_ratio", "power_smecn", "power_mecn",
    "power_ratio", "energy_smecn", "energy_mecn", "energy_ratio", "alive_frac_smecn",
    "alive_frac_mecn", "sink_connected_smecn", "sink_connected_mecn",
    "delivered_smecn", "delivered_mecn",
)


def _one_run(cfg: ScenarioConfig, seed: int) -> dict[str, float]:
    sim = Simulation(cfg, seed=seed)
    first = sim.snapshot()
    series = sim.run()
    last = series.final
    return {
        "degree": first[3],
        "power": first[4],
        "energy": last["energy_consumed_mean"],
        "alive_frac": last["alive"] / len(sim.regular),
        "sink_connected": last["sink_connected"],
        "delivered": last["packets_delivered"],
        "conservation_error": sim.conservation_error(),
    }


def compare(cfg: ScenarioConfig, seeds: Sequence[int], keep_nodes: bool = False,
            jobs: int = 1) -> list[dict[str, float]]:
    """Run both protocols per seed; placement follows the seed unless ``keep_nodes``."""
    jobs_list = []
    for s in seeds:
        base = cfg if keep_nodes else replace(cfg, nodes=None, seed=s)
        for proto in (Protocol.SMECN, Protocol.MECN):
            jobs_list.append(((s, proto.value), replace(base, protocol=proto), s))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_one_run, [j[1] for j in jobs_list], [j[2] for j in jobs_list]))
    else:
        outs = [_one_run(c, s) for _, c, s in jobs_list]
    results = {key: out for (key, _, _), out in zip(jobs_list, outs)}
    rows = []
    for s in seeds:
        a, b = results[(s, "smecn")], results[(s, "mecn")]
        rows.append({
            "seed": s,
            "degree_smecn": a["degree"], "degree_mecn": b["degree"],
            "degree_ratio": b["degree"] / a["degree"] if a["degree"] else float("nan"),
            "power_smecn": a["power"], "power_mecn": b["power"],
            "power_ratio": b["power"] / a["power"] if a["power"] else float("nan"),
            "energy_smecn": a["energy"], "energy_mecn": b["energy"],
            "energy_ratio": b["energy"] / a["energy"] if a["energy"] else float("nan"),
            "alive_frac_smecn": a["alive_frac"], "alive_frac_mecn": b["alive_frac"],
            "sink_connected_smecn": a["sink_connected"], "sink_connected_mecn": b["sink_connected"],
            "delivered_smecn": a["delivered"], "delivered_mecn": b["delivered"],
        })
    return rows


def compare_table(rows: list[dict[str, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARE_COLUMNS)
    for r in rows:
        w.writerow([r[c] if c == "seed" else repr(float(r[c])) for c in COMPARE_COLUMNS])
    for label, fn, need in (("mean", statistics.fmean, 1), ("std", statistics.stdev, 2)):
        cells: list[Any] = [label]
        for c in COMPARE_COLUMNS[1:]:
            vals = [float(r[c]) for r in rows if math.isfinite(float(r[c]))]
            cells.append(repr(fn(vals)) if len(vals) >= need else "nan")
        w.writerow(cells)
    return buf.getvalue()


def _seeds(text: str) -> list[int]:
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise UsageError("need at least one seed")
    return seeds


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = _load(args.scenario)
    try:
        seeds = _seeds(args.seeds)
    except ValueError:
        raise UsageError(f"bad seed list {args.seeds!r}") from None
    if args.duration is not None:
        cfg = replace(cfg, duration=args.duration)
    if args.energy is not None:
        cfg = replace(cfg, initial_energy=args.energy)
    rows = compare(cfg, seeds, keep_nodes=args.keep_nodes, jobs=args.jobs)
    table = compare_table(rows)
    _emit(table, args.out)
    if args.out not in (None, "-"):
        mean = dict(zip(COMPARE_COLUMNS, next(csv.reader([table.splitlines()[-2]]))))
        print(f"seeds={len(rows)} degree_ratio={float(mean['degree_ratio']):.3f} "
              f"power_ratio={float(mean['power_ratio']):.3f} energy_ratio={float(mean['energy_ratio']):.3f}")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

def _add_sampling(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rays", type=int, help="angular samples for region containment")
    p.add_argument("--radii", type=int, help="radial samples per ray")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minpower-net", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="place nodes uniformly and write a scenario")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--width", type=float, default=1500.0)
    p.add_argument("--height", type=float, default=1500.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--range", type=float, help="max transmission range in meters (default 500)")
    p.add_argument("--p-max", type=float, dest="p_max", help="maximum power (instead of --range)")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--n", type=float, default=4.0)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--sink", default="boundary-midpoint", help="boundary-midpoint, corner or X,Y")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("topo", help="compute reference, protocol and oracle edge sets")
    p.add_argument("scenario")
    p.add_argument("--methods", default="smecn,mecn")
    p.add_argument("--order", help=f"MECN Flip order: {', '.join(ORDER_POLICIES)} or id list")
    _add_sampling(p)
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_topo)

    p = sub.add_parser("verify", help="check the minimum-energy and subgraph properties")
    p.add_argument("scenario")
    p.add_argument("--method", default="smecn")
    p.add_argument("--edges", help="graph document to verify instead of a method")
    p.add_argument("--order")
    _add_sampling(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="run the lifetime simulation and write metrics CSV")
    p.add_argument("scenario")
    p.add_argument("--protocol", choices=[x.value for x in Protocol])
    p.add_argument("--duration", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--energy", type=float, help="initial energy per node")
    p.add_argument("--order")
    _add_sampling(p)
    p.add_argument("--out", "-o")
    p.add_argument("--trace", help="write the event trace (JSON lines) here")
    p.add_argument("--plot-script", dest="plot_script", help="write a gnuplot script here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="SMECN vs MECN over several seeds")
    p.add_argument("scenario")
    p.add_argument("--seeds", default="0")
    p.add_argument("--duration", type=float)
    p.add_argument("--energy", type=float)
    p.add_argument("--keep-nodes", action="store_true", dest="keep_nodes",
                   help="reuse the scenario's nodes; seeds then only vary traffic phases")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"minpower-net: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioInfeasible as exc:
        print(f"minpower-net: infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
