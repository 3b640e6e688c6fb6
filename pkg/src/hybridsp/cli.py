"""Command-line front end: run scenarios, run attractivity sweeps, list.

Exit codes: 0 success, 2 configuration error (bad scenario, malformed TOML,
unknown override keys, bad flags), 3 numeric failure during integration.
``run`` writes trajectory.csv, jumps.csv, report.json, phase.svg, and
timeseries.svg into the output directory; ``sweep`` writes
attractivity.json and attractivity.csv.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (LyapunovSpec, SGPASProbe, check_flow_decrease,
                       check_jump_decrease, combined_lyapunov,
                       estimate_attractivity, lyapunov_along_arc)
from .config import (SCENARIOS, ConfigError, build_scenario, default_config,
                     load_toml, merge_config, parse_overrides,
                     solver_from_config)
from .core import NumericFailure, solve, write_arc_csv
from .perturbation import RegularityVariant, classify_jumps
from .scenarios import initial_sampler
from .svgplot import Marker, Series, write_svg

_SCENARIO_NOTES = {
    "example1": "compact halving benchmark; keys: params.*, solver.*, sweep.*",
    "example2": "unbounded halving benchmark; keys: params.*, solver.*, sweep.*",
    "unicycle_nes": ("unicycle fleet + equilibrium-seeking controller; keys: "
                     "game.*, controller.*, unicycle.N.*, composition.*, "
                     "solver.*, sweep.*"),
}


def _load_merged(scenario: str, config_path: str | None,
                 overrides: str | None, seed: int | None) -> dict:
    cfg = default_config(scenario)
    if config_path:
        cfg = merge_config(cfg, load_toml(config_path))
    if overrides:
        cfg = merge_config(cfg, parse_overrides(overrides))
    if seed is not None:
        cfg["seed"] = int(seed)
    return cfg


def _arc_series(arc):
    t = np.array([s for seg in arc.segments for s in seg.t])
    x = np.vstack([seg.x for seg in arc.segments])
    return t, x


def _plot_benchmark(arc, scenario_name: str, out: Path) -> None:
    t, x = _arc_series(arc)
    write_svg(out / "phase.svg",
              [Series("fast state vs slow state", x[:, 0], x[:, 2])],
              title=f"{scenario_name}: fast-slow phase plane",
              xlabel="u", ylabel="x")
    labels = ("u", "v", "x")
    write_svg(out / "timeseries.svg",
              [Series(labels[i], t, x[:, i]) for i in range(3)],
              title=f"{scenario_name}: state trajectories",
              xlabel="t [s]", ylabel="state")


def _plot_unicycle(arc, scenario, out: Path) -> None:
    lay = scenario.extras["layout"]
    nash = scenario.extras["nash"]
    game = scenario.extras["game"]
    t, x = _arc_series(arc)
    n = lay.n_agents
    base = 9 * n
    series = []
    for i in range(n):
        series.append(Series(f"vehicle {i + 1}",
                             x[:, base + 7 * i], x[:, base + 7 * i + 1]))
    markers = [Marker(s[0], s[1], "circle", f"source {i + 1}")
               for i, s in enumerate(game.sources)]
    markers += [Marker(p[0], p[1], "cross", "") for p in nash.positions()]
    write_svg(out / "phase.svg", series, markers,
              title="vehicle trajectories, sources (o) and equilibrium (x)",
              xlabel="x [m]", ylabel="y [m]")

    ts_series = []
    star = nash.u_star
    for i in range(n):
        ts_series.append(Series(f"x{i + 1}", t, x[:, base + 7 * i]))
        ts_series.append(Series(f"y{i + 1}", t, x[:, base + 7 * i + 1]))
    for i in range(n):
        ts_series.append(Series(f"x{i + 1}*", [t[0], t[-1]],
                                [star[2 * i], star[2 * i]], dashed=True))
        ts_series.append(Series(f"y{i + 1}*", [t[0], t[-1]],
                                [star[2 * i + 1], star[2 * i + 1]],
                                dashed=True))
    write_svg(out / "timeseries.svg", ts_series,
              title="vehicle coordinates and equilibrium levels",
              xlabel="t [s]", ylabel="position [m]")


def _report(arc, scenario, scenario_name: str, cfg: dict) -> dict:
    dec = scenario.decomposition
    dist_final = float(scenario.attractor.distance(arc.final_state))
    report: dict = {
        "scenario": scenario_name,
        "seed": int(cfg["seed"]),
        "termination": arc.termination.value,
        "n_jumps": arc.n_jumps,
        "final_time": arc.final_time.t,
        "final_distance": dist_final,
    }
    if scenario.v1 is not None and scenario.v2 is not None:
        v_combined = combined_lyapunov(scenario.v1, scenario.v2, dec.epsilon,
                                       dec.n1)
        spec = LyapunovSpec(V=v_combined, attractor=scenario.attractor)
        series = lyapunov_along_arc(arc, spec)
        jump_drops = [dv for _, dv in series.jump_drops()]
        rates = series.flow_rates()
        rates = rates[~np.isnan(rates)]
        report["lyapunov"] = {
            "final_value": series.samples[-1].value,
            "n_jump_increases": int(sum(1 for dv in jump_drops if dv > 1e-9)),
            "n_flow_increase_samples": int((rates > 1e-6).sum()),
            "n_flow_violations": len(check_flow_decrease(arc, spec)),
            "n_jump_violations": len(check_jump_decrease(arc, spec)),
        }
    if scenario_name == "unicycle_nes":
        lay = scenario.extras["layout"]
        nash = scenario.extras["nash"]
        pos = lay.positions(arc.final_state)
        errs = np.linalg.norm(pos - nash.positions(), axis=1)
        report["final_distance_to_nash"] = float(errs.max())
        report["per_agent_distance_to_nash"] = [float(e) for e in errs]
        tau_reg = float(cfg["composition"]["regularity_tau"])
        reg = classify_jumps(arc, tau_reg,
                             RegularityVariant.SLOW_JUMPS_ONLY)
    else:
        tau_reg = float(cfg["params"]["tau"])
        reg = classify_jumps(arc, tau_reg, RegularityVariant.ALL_JUMPS)
    report["regularity"] = reg.to_dict()
    return report


def _cmd_run(args) -> int:
    cfg = _load_merged(args.scenario, args.config, args.overrides, args.seed)
    solver = solver_from_config(cfg)
    scenario, x0 = build_scenario(args.scenario, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        arc = solve(scenario.system, x0, solver)
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    write_arc_csv(arc, out / "trajectory.csv", out / "jumps.csv")
    report = _report(arc, scenario, args.scenario, cfg)
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    if args.scenario == "unicycle_nes":
        _plot_unicycle(arc, scenario, out)
    else:
        _plot_benchmark(arc, args.scenario, out)
    print(f"wrote trajectory.csv, jumps.csv, report.json, phase.svg, "
          f"timeseries.svg to {out}")
    return 0


def _sweep_factory(scenario_name: str, cfg: dict):
    from .config import build_scenario as _build

    def factory(params):
        sub = json.loads(json.dumps(cfg))  # deep copy
        if scenario_name in ("example1", "example2"):
            sub["params"]["gamma"] = params.gamma
            sub["params"]["tau"] = params.tau
            sub["params"]["epsilon"] = params.epsilon
            scenario, _ = _build(scenario_name, sub)
            sampler = initial_sampler(scenario)
            return scenario.system, sampler, scenario.attractor
        # composed scenario: gamma->alpha, tau->tau0, epsilon, beta->beta
        sub["controller"]["alpha"] = params.gamma
        sub["controller"]["tau0"] = params.tau
        sub["composition"]["epsilon"] = params.epsilon
        if params.beta > 0:
            sub["controller"]["beta"] = params.beta
        scenario, x0 = _build(scenario_name, sub)
        nash = scenario.extras["nash"]
        nes = scenario.extras["nes"]
        fleet = scenario.extras["unicycles"]

        def sampler(rng, delta):
            from .scenarios.composed import composed_initial_state
            n = len(fleet)
            offs = rng.normal(size=2 * n)
            offs *= delta / max(np.linalg.norm(offs), 1e-12)
            return composed_initial_state(nes, fleet, nash.u_star + offs,
                                          mu_rng=rng)

        return scenario.system, sampler, scenario.attractor

    return factory


def _cmd_sweep(args) -> int:
    cfg = _load_merged(args.scenario, args.config, args.overrides, args.seed)
    solver = solver_from_config(cfg)
    sw = cfg["sweep"]
    probe = SGPASProbe(
        Delta=float(sw["Delta"]), delta=float(sw["delta"]),
        param_grid=SGPASProbe.normalize_grid(sw["grid"]),
        n_initial=int(sw["n_initial"]), horizon_t=float(sw["horizon_t"]),
        tail_fraction=float(sw["tail_fraction"]))
    factory = _sweep_factory(args.scenario, cfg)
    report = estimate_attractivity(factory, probe, solver,
                                   seed=int(cfg["seed"]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(out / "attractivity.json")
    report.write_csv(out / "attractivity.csv")
    failures = sum(e.n_failures for e in report.entries)
    print(f"swept {len(report.entries)} grid points "
          f"({failures} failed trajectories); "
          f"{len(report.flags)} monotonicity flag(s)")
    for flag in report.flags:
        print(f"  flag: {flag}")
    return 0


def _cmd_list(args) -> int:
    if args.json:
        entries = [{"scenario": name, "notes": _SCENARIO_NOTES[name]}
                   for name in SCENARIOS]
        print(json.dumps(entries, indent=2))
    else:
        for name in SCENARIOS:
            print(f"{name}: {_SCENARIO_NOTES[name]}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridsp",
        description="Simulate singularly perturbed hybrid systems and probe "
                    "their practical stability.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate a scenario and export "
                                       "trajectories, report, and figures")
    run_p.add_argument("scenario", choices=SCENARIOS)
    run_p.add_argument("--config", default=None, help="TOML config path")
    run_p.add_argument("--out", default="out", help="output directory")
    run_p.add_argument("--overrides", default=None,
                       help="comma-separated key=value config overrides")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.set_defaults(func=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="run an attractivity parameter "
                                           "sweep and export estimates")
    sweep_p.add_argument("scenario", choices=SCENARIOS)
    sweep_p.add_argument("--config", default=None)
    sweep_p.add_argument("--out", default="out")
    sweep_p.add_argument("--overrides", default=None)
    sweep_p.add_argument("--seed", type=int, default=None)
    sweep_p.set_defaults(func=_cmd_sweep)

    list_p = sub.add_parser("list", help="list scenarios and their config keys")
    list_p.add_argument("--json", action="store_true")
    list_p.set_defaults(func=_cmd_list)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
