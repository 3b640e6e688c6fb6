"""Scenario configuration: TOML schemas, defaults, overrides, round-trip.

Each scenario has a complete default configuration; a user file or
``key=value`` overrides may only touch declared keys. The emitter writes the
same restricted TOML dialect the loader reads (scalars, homogeneous lists,
nested tables), so parse -> emit -> parse is the identity on these configs.
"""

from __future__ import annotations

import copy
import math
from typing import Any

import numpy as np
import tomli

from .scenarios.benchmarks import (Example1Params, Example2Params,
                                   build_example1, build_example2)
from .scenarios.composed import build_full_system, composed_initial_state
from .scenarios.game import GameParams
from .scenarios.nes import NESControllerParams
from .scenarios.unicycle import UnicycleParams
from .core import Priority, SolverConfig


class ConfigError(ValueError):
    """Malformed configuration file or unknown/ill-typed key."""


SCENARIOS = ("example1", "example2", "unicycle_nes")

# Frozen dither rotation angles for the 4-agent default: drawn once with the
# distinct-naturals-plus-perturbation recipe under the well-mixed margins.
_DEFAULT_FREQUENCIES = [
    [1.1250954158143716, 2.3972138270002995],
    [4.275686401949671, 4.7252074747510105],
    [7.800165657967147, 8.505264738055358],
    [10.321227710871918, 11.297068933704996],
]


def default_config(scenario: str) -> dict[str, Any]:
    if scenario == "example1":
        return {
            "seed": 0,
            "params": {"gamma": 0.1, "tau": 1.0, "epsilon": 1e-3, "R": 10.0,
                       "x0": [5.0, 0.0, 5.0]},
            "solver": {"step": 2e-3, "max_t": 50.0, "max_j": 10000,
                       "guard_tol": 1e-9, "bisection_iters": 60,
                       "record_stride": 5, "priority": "JumpFirst"},
            "sweep": {"Delta": 10.0, "delta": 0.5,
                      "grid": [[0.01, 1.0, 1e-3]],
                      "n_initial": 20, "horizon_t": 100.0,
                      "tail_fraction": 0.2},
        }
    if scenario == "example2":
        return {
            "seed": 0,
            "params": {"gamma": 0.1, "tau": 1.0, "epsilon": 1e-2,
                       "x0": [4.0, 0.0, 4.0]},
            "solver": {"step": 1e-3, "max_t": 40.0, "max_j": 10000,
                       "guard_tol": 1e-9, "bisection_iters": 60,
                       "record_stride": 5, "priority": "JumpFirst"},
            "sweep": {"Delta": 5.0, "delta": 0.1,
                      "grid": [[0.1, 1.0, 1e-2], [0.05, 2.0, 5e-3],
                               [0.025, 4.0, 2.5e-3]],
                      "n_initial": 10, "horizon_t": 40.0,
                      "tail_fraction": 0.2},
        }
    if scenario == "unicycle_nes":
        return {
            "seed": 0,
            "game": {
                "sources": [[-4.0, -8.0], [-12.0, -3.0], [1.0, 7.0],
                            [16.0, 8.0]],
                "coupling": 0.1,
            },
            "controller": {
                "alpha": 0.05,
                "beta": 0.003,
                "amplitudes": [0.1, 0.1, 0.1, 0.1],
                "frequencies": copy.deepcopy(_DEFAULT_FREQUENCIES),
                "tau": [0.01, 0.015, 0.02, 0.01],
                "t0": [0.0, 0.002, 0.004, 0.006],
                "tau0": 0.4,
                "filter_box": 2000.0,
                "dither_in_measurement": True,
                "u0_offset": [0.5, 0.0, -0.5, 0.0, 0.0, 0.5, 0.0, -0.5],
            },
            "unicycle": {
                "1": {"sigma": 0.002},
                "2": {"sigma": 0.003},
                "3": {"sigma": 0.004},
                "4": {"sigma": 0.002},
            },
            "composition": {
                "epsilon": 0.4,
                "omega_r": 2.0 / 9.0,
                "horizon_t": 10.0,
                "plant_timer_phases": [0.5, 0.25, 0.6, 0.11],
                "regularity_tau": 0.001,
            },
            "solver": {"step": 2e-4, "max_t": 10.0, "max_j": 1000000,
                       "guard_tol": 1e-9, "bisection_iters": 60,
                       "record_stride": 50, "priority": "JumpFirst"},
            "sweep": {"Delta": 0.5, "delta": 0.05,
                      "grid": [[0.05, 0.4, 0.4, 0.003]],
                      "n_initial": 3, "horizon_t": 10.0,
                      "tail_fraction": 0.2},
        }
    raise ConfigError(f"unknown scenario '{scenario}'; "
                      f"choose one of {', '.join(SCENARIOS)}")


def load_toml(path) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def merge_config(base: dict, update: dict, path: str = "") -> dict:
    """Deep-merge ``update`` into ``base``; unknown keys are errors.

    A bare top-level key that is not itself top-level in the schema is
    routed into the unique section that declares it (so overrides like
    ``gamma=0.1`` reach ``params.gamma``); ambiguous bare keys are errors.
    """
    out = copy.deepcopy(base)
    if not path:
        update = _route_flat_keys(base, update)
    for key, val in update.items():
        here = f"{path}.{key}" if path else key
        if key not in out:
            raise ConfigError(f"unknown config key '{here}'")
        if isinstance(out[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key '{here}' expects a table")
            out[key] = merge_config(out[key], val, here)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _route_flat_keys(base: dict, update: dict) -> dict:
    routed: dict[str, Any] = {}
    for key, val in update.items():
        if key in base or isinstance(val, dict):
            if isinstance(val, dict) and isinstance(base.get(key), dict):
                routed.setdefault(key, {}).update(val)
            else:
                routed[key] = val
            continue
        owners = [section for section, table in base.items()
                  if isinstance(table, dict) and key in table
                  and not isinstance(table[key], dict)]
        if len(owners) == 1:
            routed.setdefault(owners[0], {})
            if not isinstance(routed[owners[0]], dict):
                raise ConfigError(f"override '{key}' conflicts with a value "
                                  f"for section '{owners[0]}'")
            routed[owners[0]][key] = val
        elif len(owners) > 1:
            raise ConfigError(
                f"override key '{key}' is ambiguous: declared in "
                f"{', '.join(sorted(owners))}; qualify it")
        else:
            routed[key] = val  # unknown: reported by merge_config
    return routed


def _split_override_items(pairs: str) -> list[str]:
    """Split on commas at bracket depth zero, so list values stay intact."""
    items: list[str] = []
    depth = 0
    cur: list[str] = []
    for ch in pairs:
        if ch == "," and depth == 0:
            items.append("".join(cur))
            cur = []
            continue
        if ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
        cur.append(ch)
    items.append("".join(cur))
    return [item for item in items if item.strip()]


def parse_overrides(pairs: str) -> dict[str, Any]:
    """Parse ``a.b=v,c=w`` into a nested dict; values via TOML scalar rules.

    Commas inside bracketed values belong to the value, so lists (and lists
    of lists, e.g. sweep grids) can be passed inline.
    """
    update: dict[str, Any] = {}
    if not pairs:
        return update
    for item in _split_override_items(pairs):
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"override '{item}' has an empty key")
        try:
            val = tomli.loads(f"v = {raw.strip()}")["v"]
        except tomli.TOMLDecodeError:
            val = raw.strip()
        node = update
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path '{key}' conflicts")
        node[parts[-1]] = val
    return update


def _emit_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            raise ConfigError("cannot emit non-finite float")
        return repr(v)
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_emit_value(x) for x in v) + "]"
    raise ConfigError(f"cannot emit config value of type {type(v).__name__}")


def emit_toml(cfg: dict[str, Any]) -> str:
    """Serialize a config dict in the restricted dialect the loader reads."""
    lines: list[str] = []

    def emit_table(table: dict, prefix: str) -> None:
        scalars = {k: v for k, v in table.items() if not isinstance(v, dict)}
        subtables = {k: v for k, v in table.items() if isinstance(v, dict)}
        if prefix and (scalars or not subtables):
            lines.append(f"[{prefix}]")
        for k, v in scalars.items():
            lines.append(f"{k} = {_emit_value(v)}")
        if scalars:
            lines.append("")
        for k, v in subtables.items():
            name = f"{prefix}.{k}" if prefix else k
            emit_table(v, name)

    emit_table(cfg, "")
    return "\n".join(lines).rstrip() + "\n"


def solver_from_config(cfg: dict[str, Any]) -> SolverConfig:
    s = cfg["solver"]
    if s["priority"] not in ("JumpFirst", "FlowFirst"):
        raise ConfigError("solver.priority must be 'JumpFirst' or 'FlowFirst'")
    try:
        return SolverConfig(
            step=float(s["step"]), max_t=float(s["max_t"]),
            max_j=int(s["max_j"]), guard_tol=float(s["guard_tol"]),
            bisection_iters=int(s["bisection_iters"]),
            record_stride=int(s["record_stride"]),
            priority=(Priority.JUMP_FIRST if s["priority"] == "JumpFirst"
                      else Priority.FLOW_FIRST))
    except ValueError as exc:
        raise ConfigError(f"bad solver settings: {exc}") from exc


def build_scenario(name: str, cfg: dict[str, Any]):
    """Instantiate (scenario bundle, x0) from a merged config."""
    from .scenarios.base import ParamError
    try:
        if name == "example1":
            p = cfg["params"]
            sc = build_example1(Example1Params(
                gamma=float(p["gamma"]), tau=float(p["tau"]),
                epsilon=float(p["epsilon"]), R=float(p["R"]),
                x0=tuple(float(v) for v in p["x0"])))
            return sc, sc.x0
        if name == "example2":
            p = cfg["params"]
            sc = build_example2(Example2Params(
                gamma=float(p["gamma"]), tau=float(p["tau"]),
                epsilon=float(p["epsilon"]),
                x0=tuple(float(v) for v in p["x0"])))
            return sc, sc.x0
        if name == "unicycle_nes":
            return _build_unicycle_nes(cfg)
    except ParamError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown scenario '{name}'")


def _build_unicycle_nes(cfg: dict[str, Any]):
    gd = cfg["game"]
    game = GameParams(sources=tuple(tuple(float(v) for v in s)
                                    for s in gd["sources"]),
                      coupling=float(gd["coupling"]))
    cd = cfg["controller"]
    nes = NESControllerParams(
        alpha=float(cd["alpha"]), beta=float(cd["beta"]),
        amplitudes=tuple(float(v) for v in cd["amplitudes"]),
        frequencies=tuple(tuple(float(w) for w in pair)
                          for pair in cd["frequencies"]),
        tau=tuple(float(v) for v in cd["tau"]),
        t0=tuple(float(v) for v in cd["t0"]),
        tau0=float(cd["tau0"]),
        filter_box=float(cd["filter_box"]),
        dither_in_measurement=bool(cd["dither_in_measurement"]))
    comp = cfg["composition"]
    omega_r = float(comp["omega_r"])
    fleet = []
    for i in range(1, game.n_agents + 1):
        entry = cfg["unicycle"].get(str(i))
        if entry is None:
            raise ConfigError(f"missing [unicycle.{i}] table")
        base = UnicycleParams.from_rates(float(entry["sigma"]), omega_r)
        fleet.append(UnicycleParams(
            sigma=float(entry["sigma"]), omega_r=omega_r,
            c1=float(entry.get("c1", base.c1)),
            c2=float(entry.get("c2", base.c2)),
            c3=float(entry.get("c3", base.c3))))
    scenario = build_full_system(game, nes, fleet,
                                 epsilon=float(comp["epsilon"]))
    nash = scenario.extras["nash"]
    offset = np.asarray([float(v) for v in cd["u0_offset"]])
    if offset.size != 2 * game.n_agents:
        raise ConfigError("u0_offset needs two entries per agent")
    u0 = nash.u_star + offset
    mu_rng = np.random.default_rng([int(cfg["seed"]), 1])
    x0 = composed_initial_state(
        nes, fleet, u0, mu_rng=mu_rng,
        plant_timer_phases=[float(v) for v in comp["plant_timer_phases"]])
    return scenario, x0
