"""Scenario runner: named sweeps producing figure-ready CSV tables.

Five registered scenarios cover the standard sweeps: first-order infidelity
versus detuning / magnetic field, photon-number scaling with numeric
cross-check, pulse-duration optimization, spin-echo demonstration, and the
spatial branching-ratio map. Every scenario is deterministic given its
configuration and seed; reruns produce byte-identical output files.

Usage: ``timebinsim <scenario> [--config <path>] [--seed <u64>] [--out <path>]``
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .budget import generation_rate, infidelity_first_order
from .cyclemap import CycleOptions
from .dynamics import LevelSystem, optimize_pulse_duration
from .params import (
    BranchingBetas,
    ParamError,
    gamma_d_for_indistinguishability,
    indistinguishability,
    preset,
    validate_params,
    zeeman_detuning,
)
from .protocol import (
    NoiseConfig,
    TargetKind,
    conditional_fidelity,
    ideal_target,
    overhauser_average,
    run_protocol,
)
from .waveguide import (
    branching_map,
    gamma_of_group_index,
    load_mode_field,
    synthetic_w1_mode,
)


class ConfigError(ValueError):
    """Malformed scenario configuration."""


@dataclass(frozen=True)
class SweepAxis:
    name: str
    lo: float
    hi: float
    points: int
    scale: str = "linear"

    def __post_init__(self):
        if self.lo >= self.hi:
            raise ConfigError(f"sweep bounds must be ordered, got [{self.lo}, {self.hi}]")
        if self.points < 2:
            raise ConfigError(f"sweep needs >= 2 points, got {self.points}")
        if self.scale not in ("linear", "log"):
            raise ConfigError(f"sweep scale must be linear or log, got {self.scale!r}")
        if self.scale == "log" and self.lo <= 0:
            raise ConfigError("log sweep needs positive bounds")

    def values(self):
        if self.scale == "log":
            return np.geomspace(self.lo, self.hi, self.points)
        return np.linspace(self.lo, self.hi, self.points)


@dataclass
class ScenarioConfig:
    scenario: str
    preset_name: str = "reference"
    overrides: dict = field(default_factory=dict)
    sweep: SweepAxis | None = None
    photons: tuple = (1, 2, 3)
    rng_seed: int = 0
    out: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(
                f"unknown scenario {self.scenario!r}; registered: {sorted(SCENARIOS)}"
            )
        if any(int(n) < 1 for n in self.photons):
            raise ConfigError(f"photon numbers must be >= 1, got {self.photons}")

    def params(self):
        p = preset(self.preset_name)
        if self.overrides:
            p = replace(p, **self.overrides)
        return validate_params(p)


@dataclass
class SweepResult:
    columns: list
    rows: list  # list of dicts keyed by column name


def _parse_scalar(text):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _parse_value(text):
    if "," in text:
        return tuple(_parse_scalar(p) for p in text.split(",") if p.strip())
    return _parse_scalar(text)


def parse_config(path, scenario=None):
    """Read a scenario configuration from ``key = value`` lines.

    Recognized keys: ``scenario``, ``preset``, ``seed``, ``out``,
    ``photons`` (comma list), ``sweep_name``/``sweep_min``/``sweep_max``/
    ``sweep_points``/``sweep_scale``, ``param.<field>`` overrides; any other
    key lands in the scenario-specific options.
    """
    raw = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = stripped.partition("=")
            raw[key.strip()] = _parse_value(val)
    return build_config(raw, scenario=scenario)


def build_config(raw, scenario=None):
    """Assemble a ScenarioConfig from a flat key-value mapping."""
    raw = dict(raw)
    name = raw.pop("scenario", scenario)
    if scenario is not None and name != scenario:
        raise ConfigError(
            f"config names scenario {name!r} but {scenario!r} was requested"
        )
    if name is None:
        raise ConfigError("no scenario given")
    sweep = None
    if "sweep_name" in raw:
        sweep = SweepAxis(
            name=str(raw.pop("sweep_name")),
            lo=float(raw.pop("sweep_min")),
            hi=float(raw.pop("sweep_max")),
            points=int(raw.pop("sweep_points")),
            scale=str(raw.pop("sweep_scale", "linear")),
        )
    photons = raw.pop("photons", (1, 2, 3))
    if not isinstance(photons, tuple):
        photons = (photons,)
    overrides = {}
    for key in [k for k in raw if k.startswith("param.")]:
        overrides[key[len("param."):]] = float(raw.pop(key))
    return ScenarioConfig(
        scenario=str(name),
        preset_name=str(raw.pop("preset", "reference")),
        overrides=overrides,
        sweep=sweep,
        photons=tuple(int(n) for n in photons),
        rng_seed=int(raw.pop("seed", 0)),
        out=raw.pop("out", None),
        options=raw,
    )


def _with_indistinguishability(params, gamma):
    """Change gamma while keeping the preset's photon indistinguishability."""
    ind = indistinguishability(params.gamma, params.gamma_d)
    return replace(
        params, gamma=gamma, gamma_d=gamma_d_for_indistinguishability(gamma, ind)
    )


def scenario_detuning_sweep(config):
    """First-order budget versus detuning or magnetic field, per group index.

    The sweep axis is ``delta`` (GHz, converted to rad/ns) or ``b_field``
    (Tesla, converted through the Zeeman splitting). One row per
    (n_g, sweep point, photon number); the asymptote column is the
    infinite-detuning limit e_ph + e_br.
    """
    base = config.params()
    sweep = config.sweep or SweepAxis(name="delta", lo=4.0, hi=64.0, points=16)
    if sweep.name not in ("delta", "b_field"):
        raise ConfigError(f"detuning sweep axis must be delta or b_field, got {sweep.name!r}")
    ng_list = config.options.get("n_g_list", (base.n_g,))
    if not isinstance(ng_list, tuple):
        ng_list = (ng_list,)
    columns = [
        "n_g", sweep.name, "delta_rad_ns", "n_photons",
        "e_ph", "e_exc", "e_br", "total_first_order", "asymptote",
    ]
    rows = []
    for n_g in ng_list:
        gamma = gamma_of_group_index(float(n_g)).value
        p_ng = _with_indistinguishability(replace(base, n_g=float(n_g)), gamma)
        for value in sweep.values():
            if sweep.name == "delta":
                delta = 2.0 * math.pi * float(value)
            else:
                delta = zeeman_detuning(base.g_factor, float(value))
            p = replace(p_ng, delta=delta, b_field=float(value) if sweep.name == "b_field" else base.b_field)
            for n in config.photons:
                b = infidelity_first_order(p, n)
                rows.append({
                    "n_g": float(n_g),
                    sweep.name: float(value),
                    "delta_rad_ns": delta,
                    "n_photons": n,
                    "e_ph": b.e_ph,
                    "e_exc": b.e_exc,
                    "e_br": b.e_br,
                    "total_first_order": b.total,
                    "asymptote": b.e_ph + b.e_br,
                })
    return SweepResult(columns=columns, rows=rows)


def scenario_photon_scaling(config):
    """First-order budget, numeric conditional infidelity and rate versus N."""
    p = config.params()
    kind = TargetKind(config.options.get("kind", "ghz"))
    numeric = bool(config.options.get("numeric", True))
    columns = [
        "n_photons", "e_ph", "e_exc", "e_br", "total_first_order",
        "rate_mhz",
    ]
    if numeric:
        columns += ["numeric_infidelity", "success_probability"]
    rows = []
    for n in config.photons:
        b = infidelity_first_order(p, n)
        row = {
            "n_photons": n,
            "e_ph": b.e_ph,
            "e_exc": b.e_exc,
            "e_br": b.e_br,
            "total_first_order": b.total,
            "rate_mhz": generation_rate(p.eta, p.t_cycle, n) * 1e3,
        }
        if numeric:
            state = run_protocol(p, n, kind=kind)
            fid = conditional_fidelity(state, ideal_target(n, kind))
            row["numeric_infidelity"] = 1.0 - fid
            row["success_probability"] = state.success_probability
        rows.append(row)
    return SweepResult(columns=columns, rows=rows)


def scenario_pulse_optimization(config):
    """Optimized per-pulse excitation error across detuning-to-rate ratios."""
    ratios = config.options.get("delta_over_gamma", (30.0, 100.0, 300.0))
    if not isinstance(ratios, tuple):
        ratios = (ratios,)
    shape = str(config.options.get("shape", "square"))
    betas = BranchingBetas(beta_par=1.0, beta_perp=0.0, beta_par_leak=0.0, beta_perp_leak=0.0)
    columns = ["delta_over_gamma", "duration_opt", "error_min", "coefficient"]
    rows = []
    for ratio in ratios:
        r = float(ratio)
        system = LevelSystem.from_rates(gamma=1.0, betas=betas, delta=r)
        opt = optimize_pulse_duration(system, shape=shape)
        rows.append({
            "delta_over_gamma": r,
            "duration_opt": opt["duration_opt"],
            "error_min": opt["error_min"],
            "coefficient": opt["error_min"] * r,
        })
    return SweepResult(columns=columns, rows=rows)


def scenario_echo_demo(config):
    """Conditional fidelity with and without the built-in spin echo.

    Sweeps the quasi-static Overhauser broadening; the echo column stays at
    the noise-free value while the no-echo column decays.
    """
    p = config.params()
    sigmas = config.options.get("sigma_list", (0.0, 0.25, 0.5, 0.7071067811865476))
    if not isinstance(sigmas, tuple):
        sigmas = (sigmas,)
    n = int(config.options.get("n_photons", config.photons[0]))
    samples = int(config.options.get("sample_count", 40))
    kind = TargetKind(config.options.get("kind", "ghz"))
    target = ideal_target(n, kind)
    columns = ["sigma_overhauser", "fidelity_echo", "fidelity_no_echo"]
    rows = []
    for i, sigma in enumerate(sigmas):
        s = float(sigma)
        fids = {}
        for echo in (True, False):
            opts = CycleOptions(echo=echo)
            if s == 0.0:
                state = run_protocol(p, n, kind=kind, options=opts)
                fids[echo] = conditional_fidelity(state, target)
            else:
                noise = NoiseConfig(
                    overhauser_sigma=s,
                    sample_count=samples,
                    rng_seed=config.rng_seed + i,
                )
                fids[echo] = overhauser_average(p, n, kind, noise, options=opts)[
                    "mean_fidelity"
                ]
        rows.append({
            "sigma_overhauser": s,
            "fidelity_echo": fids[True],
            "fidelity_no_echo": fids[False],
        })
    return SweepResult(columns=columns, rows=rows)


def scenario_branching_map(config):
    """Spatial branching-ratio map with per-point single-photon infidelity."""
    source = config.options.get("mode_source", "fixture")
    if source == "fixture":
        mode = synthetic_w1_mode(float(config.options.get("n_g", 20.0)))
    else:
        mode = load_mode_field(source)
    resolution = int(config.options.get("resolution", 21))
    leak = float(config.options.get("leak_fraction", 0.1))
    xs, ys, b, bt = branching_map(mode, resolution=resolution, leak_fraction=leak)
    columns = ["x", "y", "B", "beta_total", "branching_infidelity"]
    rows = []
    for i, px in enumerate(xs):
        for j, py in enumerate(ys):
            ratio = b[i, j]
            infid = 0.0 if math.isinf(ratio) else 1.0 / (4.0 * (ratio + 1.0))
            rows.append({
                "x": float(px),
                "y": float(py),
                "B": float(ratio),
                "beta_total": float(bt[i, j]),
                "branching_infidelity": infid,
            })
    return SweepResult(columns=columns, rows=rows)


SCENARIOS = {
    "detuning_sweep": scenario_detuning_sweep,
    "photon_scaling": scenario_photon_scaling,
    "pulse_optimization": scenario_pulse_optimization,
    "echo_demo": scenario_echo_demo,
    "branching_map": scenario_branching_map,
}


def run_scenario(config):
    return SCENARIOS[config.scenario](config)


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _config_echo(config):
    return {
        "scenario": config.scenario,
        "preset": config.preset_name,
        "overrides": dict(config.overrides),
        "sweep": None
        if config.sweep is None
        else {
            "name": config.sweep.name,
            "min": config.sweep.lo,
            "max": config.sweep.hi,
            "points": config.sweep.points,
            "scale": config.sweep.scale,
        },
        "photons": list(config.photons),
        "seed": config.rng_seed,
        "options": {k: list(v) if isinstance(v, tuple) else v for k, v in config.options.items()},
    }


def write_result(result, config, path):
    """Write a sweep table as CSV with a self-describing metadata header.

    A JSON manifest with the same content is written alongside at
    ``<path>.manifest.json``. Output carries no timestamps so reruns are
    byte-identical.
    """
    echo = _config_echo(config)
    meta = json.dumps(echo, sort_keys=True, separators=(",", ":"))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# scenario={config.scenario} seed={config.rng_seed} version={__version__}\n")
        fh.write(f"# config={meta}\n")
        fh.write(",".join(result.columns) + "\n")
        for row in result.rows:
            fh.write(",".join(_fmt(row[c]) for c in result.columns) + "\n")
    manifest = {
        "version": __version__,
        "config": echo,
        "columns": result.columns,
        "n_rows": len(result.rows),
        "csv": str(path),
    }
    with open(f"{path}.manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="timebinsim",
        description="Scenario runner for the time-bin entanglement simulator.",
    )
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name, func in sorted(SCENARIOS.items()):
        sp = sub.add_parser(name, help=(func.__doc__ or "").strip().splitlines()[0])
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--seed", type=int, help="override the rng seed")
        sp.add_argument("--out", help="output CSV path")
    args = parser.parse_args(argv)
    try:
        if args.config:
            config = parse_config(args.config, scenario=args.scenario)
        else:
            config = build_config({}, scenario=args.scenario)
        if args.seed is not None:
            config.rng_seed = args.seed
        if args.out is not None:
            config.out = args.out
        if config.out is None:
            config.out = f"{config.scenario}.csv"
        result = run_scenario(config)
        write_result(result, config, config.out)
    except (ConfigError, ParamError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"{config.scenario}: {len(result.rows)} rows -> {config.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
