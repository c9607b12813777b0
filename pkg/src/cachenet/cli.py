"""Command line front end: generate, place, simulate, sweep, report."""
from __future__ import annotations

import argparse
import concurrent.futures
import itertools
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import (
    ScenarioSpec,
    _assign,
    build_scenario,
    parse_scenario_spec,
    scenario_hash,
)
from .engine import (
    SimConfig,
    entry_videos,
    run_simulation,
    run_static_round,
)
from .metrics import savings_report
from .model import Scenario, validate_scenario
from .placement import (
    PlacementInfeasibleError,
    alpha_mhp,
    hit_ratio,
    irs,
    lp_upper_bound,
    srs,
)
from .workload import generate_requests

log = logging.getLogger("cachenet")

LP_BOUND_VARIABLE_LIMIT = 20_000


@dataclass
class ExperimentSpec:
    command: str
    scenario_path: str
    out_dir: str
    overrides: dict[str, str] = field(default_factory=dict)
    options: dict[str, object] = field(default_factory=dict)


def _load_spec(path: str, overrides: dict[str, str]) -> ScenarioSpec:
    text = Path(path).read_text()
    spec = parse_scenario_spec(text)
    for dotted, value in overrides.items():
        section, _, key = dotted.partition(".")
        _assign(spec, section, key, value)
    return spec


def _build(spec: ScenarioSpec) -> Scenario:
    scenario = build_scenario(spec)
    problems = validate_scenario(scenario)
    if problems:
        raise ValueError("scenario validation failed: " + "; ".join(problems[:10]))
    return scenario


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def _json_text(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2,
                      default=float) + "\n"


def _compute_placement(scenario: Scenario):
    cfg = scenario.placement_config
    demand = scenario.demand
    sizes = scenario.sizes()
    caps = scenario.topology.node_capacities()
    if cfg.strategy == "srs":
        return srs(demand, sizes, caps, cfg.precision, cfg.ocmhp_rule)
    if cfg.strategy == "irs":
        return irs(demand, sizes, caps, max(cfg.precision, 1e-3), cfg.ocmhp_rule)
    raise ValueError(f"unknown placement strategy {cfg.strategy!r}")


def cmd_generate(spec: ScenarioSpec, out: Path, options: dict) -> int:
    scenario = _build(spec)
    sha = scenario_hash(spec)
    demand_lines = [f"# scenario {sha}"]
    demand_lines.append(",".join(str(k) for k in range(scenario.demand.shape[1])))
    for row in scenario.demand:
        demand_lines.append(",".join(f"{x:.10g}" for x in row))
    _write(out / "demand.csv", "\n".join(demand_lines) + "\n")

    stream = generate_requests(
        scenario.demand, scenario.sim.total_slots, scenario.sim.intensity,
        scenario.sim.seed, scenario.sim.slot_duration_s,
        eligible_videos=entry_videos(scenario.catalog))
    _write(out / "stream.txt", f"# scenario {sha}\n" + stream.to_text())
    return 0


def cmd_place(spec: ScenarioSpec, out: Path, options: dict) -> int:
    scenario = _build(spec)
    sha = scenario_hash(spec)
    result = _compute_placement(scenario)
    _write(out / "placement.txt", f"# scenario {sha}\n"
           + result.placement.to_text())

    demand, sizes = scenario.demand, scenario.sizes()
    caps = scenario.topology.node_capacities()
    bound = None
    bound_note = ""
    if demand.size <= LP_BOUND_VARIABLE_LIMIT:
        try:
            bound = lp_upper_bound(demand, sizes, caps)
        except PlacementInfeasibleError:
            bound_note = "fractional covering infeasible"
    else:
        bound_note = f"instance above the {LP_BOUND_VARIABLE_LIMIT}-variable limit"

    summary = {
        "kind": "place",
        "scenario": sha,
        "strategy": scenario.placement_config.strategy,
        "feasible": result.feasible,
        "objective": result.objective,
        "alpha": result.alpha_used,
        "hit_ratio": hit_ratio(result.placement, demand, sizes)
        if result.feasible else None,
        "capacity_ratio": scenario.capacity_ratio(),
        "population_min": spec.demand.population_min,
        "population_max": spec.demand.population_max,
        "bound": bound,
        "bound_ratio": (result.objective / bound) if bound else None,
        "bound_note": bound_note,
    }
    _write(out / "place_summary.json", _json_text(summary))

    step = options.get("alpha_scan")
    if step:
        lines = [f"# scenario {sha}", "alpha,objective,feasible"]
        for a in np.arange(0.0, 1.0 + step / 2, step):
            r = alpha_mhp(demand, sizes, caps, float(min(a, 1.0)),
                          scenario.placement_config.ocmhp_rule)
            lines.append(f"{a:.10g},{r.objective:.10g},{int(r.feasible)}")
        _write(out / "alpha_scan.csv", "\n".join(lines) + "\n")
    return 0 if result.feasible else 1


def _simulate_once(spec: ScenarioSpec, out: Path, tag: str,
                   static: bool) -> dict:
    scenario = _build(spec)
    sha = scenario_hash(spec)
    placement_result = _compute_placement(scenario)
    if not placement_result.feasible:
        raise ValueError("placement infeasible; cannot simulate")
    placement = placement_result.placement
    sel = scenario.selection_config
    sim = scenario.sim

    summary = {
        "scenario": sha,
        "strategy": sel.strategy,
        "delta": sel.delta,
        "intensity": sim.intensity,
        "seed": sim.seed,
    }
    if static:
        cost, assignment, _ = run_static_round(
            scenario, sim.intensity, sel.strategy, placement,
            seed=sim.seed, delta=sel.delta, gamma=sel.gamma)
        summary.update({
            "kind": "static",
            "aggregate_cost": cost,
            "blocked": len(assignment.blocked),
        })
    else:
        config = SimConfig(
            total_slots=sim.total_slots, intensity=sim.intensity,
            seed=sim.seed, slot_duration_s=sim.slot_duration_s,
            round_len_slots=sel.round_len_slots,
            report_period_slots=sel.report_period_slots,
            reschedule_period_slots=sel.reschedule_period_slots,
            strategy=sel.strategy, delta=sel.delta, gamma=sel.gamma,
            all_requests=sim.all_requests)
        stream = generate_requests(
            scenario.demand, config.total_slots, config.intensity,
            config.seed, config.slot_duration_s,
            placement=None if config.all_requests else placement,
            eligible_videos=entry_videos(scenario.catalog))
        series = run_simulation(scenario, config, placement, stream=stream)
        _write(out / f"metrics_{tag}.csv", series.to_csv(sha))
        _write(out / f"assignments_{tag}.txt",
               f"# scenario {sha}\n" + "\n".join(series.assignment_lines)
               + ("\n" if series.assignment_lines else ""))
        hit_saving, merge_saving = savings_report(
            stream, placement, scenario.sizes(), series.merged_by_video)
        summary.update({
            "kind": "dynamic",
            "slots": sim.total_slots,
            "mean_aggregate_cost": series.mean("aggregate_cost"),
            "mean_max_utilization": series.mean("max_utilization"),
            "mean_throughput_bps": series.mean("throughput_bps"),
            "total_blocked": series.total("blocked_count"),
            "total_merged": series.total("merged_count"),
            "total_hits": series.total("hit_count"),
            "total_collaborative": series.total("collaborative_count"),
            "hit_saving": hit_saving,
            "merge_saving": merge_saving,
        })
    _write(out / f"summary_{tag}.json", _json_text(summary))
    return summary


def cmd_simulate(spec: ScenarioSpec, out: Path, options: dict) -> int:
    tag = options.get("tag") or "run"
    _simulate_once(spec, out, tag, bool(options.get("static")))
    return 0


_PARAM_TARGETS = {
    "delta": "selection.delta",
    "intensity": "simulation.intensity",
    "seed": "simulation.seed",
    "strategy": "selection.strategy",
}


def _sweep_point(args) -> str:
    scenario_path, overrides, point, out_dir, static = args
    merged = dict(overrides)
    for key, value in point:
        merged[_PARAM_TARGETS[key]] = value
    spec = _load_spec(scenario_path, merged)
    tag = "_".join(f"{k}{v}" for k, v in point)
    _simulate_once(spec, Path(out_dir), tag, static)
    return tag


def cmd_sweep(exp: ExperimentSpec, spec: ScenarioSpec, out: Path,
              options: dict) -> int:
    grids: list[list[tuple[str, str]]] = []
    for key, values in options.get("params", []):
        if key not in _PARAM_TARGETS:
            raise ValueError(f"sweep parameter {key!r} not supported "
                             f"(use {sorted(_PARAM_TARGETS)})")
        grids.append([(key, v) for v in values])
    if not grids:
        raise ValueError("sweep needs at least one --param key=v1,v2,...")
    points = [tuple(combo) for combo in itertools.product(*grids)]
    workers = int(options.get("workers") or 1)
    static = bool(options.get("static"))
    jobs = [(exp.scenario_path, exp.overrides, point, str(out), static)
            for point in points]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            tags = list(pool.map(_sweep_point, jobs))
    else:
        tags = [_sweep_point(job) for job in jobs]
    _write(out / "sweep_index.json", _json_text({"points": sorted(tags)}))
    return 0


def cmd_report(results_dir: Path, out: Path) -> int:
    summaries = []
    for path in sorted(results_dir.rglob("summary_*.json")):
        summaries.append(json.loads(path.read_text()))
    statics = [s for s in summaries if s.get("kind") == "static"]
    dynamics = [s for s in summaries if s.get("kind") == "dynamic"]

    def group_mean(rows, keys, value):
        grouped: dict[tuple, list[float]] = {}
        for r in rows:
            if r.get(value) is None:
                continue
            grouped.setdefault(tuple(r[k] for k in keys), []).append(r[value])
        return {k: float(np.mean(v)) for k, v in sorted(grouped.items())}

    made = []
    if statics:
        lines = ["intensity,strategy,mean_aggregate_cost,runs"]
        grouped: dict[tuple, list[float]] = {}
        for s in statics:
            grouped.setdefault((s["intensity"], s["strategy"]), []) \
                .append(s["aggregate_cost"])
        for (intensity, strategy), vals in sorted(grouped.items()):
            lines.append(f"{intensity:.10g},{strategy},"
                         f"{float(np.mean(vals)):.10g},{len(vals)}")
        _write(out / "table_static_cost.csv", "\n".join(lines) + "\n")
        made.append("table_static_cost.csv")
    if dynamics:
        util = group_mean(dynamics, ["delta"], "mean_max_utilization")
        thr = group_mean(dynamics, ["delta"], "mean_throughput_bps")
        if util:
            lines = ["delta,mean_max_utilization,mean_throughput_bps"]
            for (delta,), u in util.items():
                lines.append(f"{delta:.10g},{u:.10g},{thr[(delta,)]:.10g}")
            _write(out / "table_delta_sweep.csv", "\n".join(lines) + "\n")
            made.append("table_delta_sweep.csv")
        lines = ["strategy,mean_aggregate_cost,mean_max_utilization,runs"]
        grouped2: dict[str, list] = {}
        for s in dynamics:
            grouped2.setdefault(s["strategy"], []).append(
                (s["mean_aggregate_cost"], s["mean_max_utilization"]))
        for strategy, vals in sorted(grouped2.items()):
            costs = [v[0] for v in vals]
            utils = [v[1] for v in vals]
            lines.append(f"{strategy},{float(np.mean(costs)):.10g},"
                         f"{float(np.mean(utils)):.10g},{len(vals)}")
        _write(out / "table_dynamic.csv", "\n".join(lines) + "\n")
        made.append("table_dynamic.csv")
        savings = [s for s in dynamics if s.get("hit_saving") is not None]
        if savings:
            lines = ["total_requests,hit_saving,merge_saving"]
            for s in sorted(savings, key=lambda r: r["total_hits"]
                            + r["total_collaborative"]):
                total = s["total_hits"] + s["total_collaborative"]
                lines.append(f"{total:.10g},{s['hit_saving']:.10g},"
                             f"{s['merge_saving']:.10g}")
            _write(out / "table_savings.csv", "\n".join(lines) + "\n")
            made.append("table_savings.csv")

    places = []
    for path in sorted(results_dir.rglob("place_summary.json")):
        places.append(json.loads(path.read_text()))
    if places:
        lines = ["capacity_ratio,strategy,hit_ratio,bound_ratio"]
        for p in sorted(places, key=lambda r: (r["capacity_ratio"],
                                               r["strategy"])):
            hr = p.get("hit_ratio")
            br = p.get("bound_ratio")
            lines.append(f"{p['capacity_ratio']:.10g},{p['strategy']},"
                         f"{'' if hr is None else format(hr, '.10g')},"
                         f"{'' if br is None else format(br, '.10g')}")
        _write(out / "table_hit_ratio.csv", "\n".join(lines) + "\n")
        made.append("table_hit_ratio.csv")

    for path in sorted(results_dir.rglob("alpha_scan.csv")):
        _write(out / "table_alpha_scan.csv", path.read_text())
        made.append("table_alpha_scan.csv")
        break
    log.info("report tables: %s", ", ".join(made) or "none")
    return 0


def run_experiment(exp: ExperimentSpec) -> int:
    out = Path(exp.out_dir)
    if exp.command == "report":
        return cmd_report(Path(exp.scenario_path), out)
    spec = _load_spec(exp.scenario_path, exp.overrides)
    if exp.command == "generate":
        return cmd_generate(spec, out, exp.options)
    if exp.command == "place":
        return cmd_place(spec, out, exp.options)
    if exp.command == "simulate":
        return cmd_simulate(spec, out, exp.options)
    if exp.command == "sweep":
        return cmd_sweep(exp, spec, out, exp.options)
    raise ValueError(f"unknown command {exp.command!r}")


def _add_common(parser: argparse.ArgumentParser, scenario_help: str) -> None:
    parser.add_argument("--scenario", required=True, help=scenario_help)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--set", action="append", default=[],
                        metavar="SECTION.KEY=VALUE",
                        help="override any scenario field")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--strategy")
    parser.add_argument("--delta", type=float)
    parser.add_argument("--intensity", type=float)
    parser.add_argument("--slots", type=int)
    parser.add_argument("--precision", type=float)


def _overrides_from(args: argparse.Namespace, command: str) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for item in args.set:
        dotted, _, value = item.partition("=")
        if not value:
            raise SystemExit(f"--set wants SECTION.KEY=VALUE, got {item!r}")
        overrides[dotted] = value
    if args.seed is not None:
        overrides["simulation.seed"] = str(args.seed)
    if args.strategy is not None:
        target = "placement.strategy" if command == "place" \
            else "selection.strategy"
        overrides[target] = args.strategy
    if args.delta is not None:
        overrides["selection.delta"] = str(args.delta)
    if args.intensity is not None:
        overrides["simulation.intensity"] = str(args.intensity)
    if args.slots is not None:
        overrides["simulation.slots"] = str(args.slots)
    if args.precision is not None:
        overrides["placement.precision"] = str(args.precision)
    return overrides


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("CACHENET_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(
        prog="cachenet",
        description="collaborative caching placement and simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write demand matrix and stream")
    _add_common(p, "scenario file")

    p = sub.add_parser("place", help="solve placement, report the bound")
    _add_common(p, "scenario file")
    p.add_argument("--alpha-scan", type=float, metavar="STEP",
                   help="also scan the reservation fraction at this step")

    p = sub.add_parser("simulate", help="run the discrete-slot simulator")
    _add_common(p, "scenario file")
    p.add_argument("--static", action="store_true",
                   help="one-slot scenario on quarter-full links")
    p.add_argument("--tag", help="output file tag (default: run)")

    p = sub.add_parser("sweep", help="simulate over a parameter grid")
    _add_common(p, "scenario file")
    p.add_argument("--param", action="append", default=[],
                   metavar="KEY=V1,V2,...",
                   help="grid dimension (delta, intensity, seed, strategy)")
    p.add_argument("--static", action="store_true")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("report", help="aggregate results into tables")
    p.add_argument("--results", required=True, help="directory of run outputs")
    p.add_argument("--out", required=True, help="table output directory")

    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            exp = ExperimentSpec("report", args.results, args.out)
        else:
            options: dict[str, object] = {}
            if args.command == "place":
                options["alpha_scan"] = args.alpha_scan
            if args.command == "simulate":
                options["static"] = args.static
                options["tag"] = args.tag
            if args.command == "sweep":
                params = []
                for item in args.param:
                    key, _, values = item.partition("=")
                    params.append((key, values.split(",")))
                options["params"] = params
                options["static"] = args.static
                options["workers"] = args.workers
            exp = ExperimentSpec(args.command, args.scenario, args.out,
                                 _overrides_from(args, args.command), options)
        return run_experiment(exp)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
