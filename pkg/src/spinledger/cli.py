"""Command-line entry point.

Exit codes: 0 success, 1 internal invariant violation, 2 configuration
error, 3 I/O error. Every option can also come from a flat JSON config
file (``--config``); command-line flags override file values.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .errors import ConfigError, InvariantViolation
from .experiments import (
    COMPONENTS,
    Cauchy,
    SearchGrid,
    Uniform,
    born_check,
    canonical_chain,
    enumerate_branches,
    kick_statistics,
    run_anamnesis,
    run_conservation_chain,
    single_measurement,
    special_state_search,
)
from .rng import check_seed, make_rng, spawn_seeds
from .schemes import scheme_from_name
from .spin import axis_eigenstate

log = logging.getLogger("spinledger")

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class IOFailure(Exception):
    pass


DEFAULTS: dict[str, dict[str, Any]] = {
    "conservation": {"scheme": "standard", "seed": 0, "trials": 1, "reservoir": 2, "tolerance": 0.01, "out": "."},
    "anamnesis": {"scheme": "unitary", "seed": 0, "reservoir": 2, "script": "single", "out": "."},
    "special-search": {
        "seed": 0,
        "trials": 1000,
        "reservoir": 2,
        "tolerance": 0.01,
        "distribution": "cauchy",
        "location": 0.0,
        "scale": 0.1,
        "input": "+x",
        "grid": 9,
        "out": ".",
    },
    "born-check": {"seed": 0, "trials": 10000, "polars": 7, "out": "."},
}


def _common(p: argparse.ArgumentParser, *names: str) -> None:
    flags = {
        "scheme": dict(choices=["standard", "unitary", "instrumental"]),
        "seed": dict(type=int),
        "trials": dict(type=int),
        "reservoir": dict(type=int, help="reservoir spins per device (even)"),
        "tolerance": dict(type=float),
        "distribution": dict(choices=["cauchy", "uniform"]),
        "location": dict(type=float),
        "scale": dict(type=float),
        "out": dict(help="existing output directory"),
        "script": dict(choices=["single", "chain"]),
        "input": dict(help="system preparation, e.g. +x, -z"),
        "grid": dict(type=int, help="points per grid dimension"),
        "polars": dict(type=int, help="number of input tilts"),
    }
    p.add_argument("--config", help="flat JSON file of option values")
    for name in names:
        p.add_argument(f"--{name}", default=None, **flags[name])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinledger", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("conservation", help="x, z, x chain with angular momentum ledger"),
            "scheme", "seed", "trials", "reservoir", "tolerance", "out")
    _common(sub.add_parser("anamnesis", help="forward run, backward evolution, record check"),
            "scheme", "seed", "reservoir", "script", "out")
    _common(sub.add_parser("special-search", help="special-state grid scan and kick statistics"),
            "seed", "trials", "reservoir", "tolerance", "distribution", "location", "scale", "input", "grid", "out")
    _common(sub.add_parser("born-check", help="collapse-scheme frequencies against Born weights"),
            "seed", "trials", "polars", "out")
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict[str, Any]:
    """Defaults, then config file, then flags."""
    config = dict(DEFAULTS[command])
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise IOFailure(f"cannot read config {args.config}: {exc}") from exc
        try:
            loaded = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a flat key/value object")
        for key, value in loaded.items():
            key = key.replace("_", "-") if key.replace("_", "-") in config else key
            if key not in config:
                raise ConfigError(f"unknown config key {key!r} for {command}")
            if isinstance(value, (dict, list)):
                raise ConfigError(f"config key {key!r} must hold a scalar")
            config[key] = value
    for key in config:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            config[key] = value
    _validate(command, config)
    return config


def _validate(command: str, config: dict[str, Any]) -> None:
    try:
        if "seed" in config:
            config["seed"] = check_seed(config["seed"])
        for key in ("trials", "reservoir", "grid", "polars"):
            if key in config:
                config[key] = int(config[key])
        for key in ("tolerance", "location", "scale"):
            if key in config:
                config[key] = float(config[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if config.get("trials", 1) < 1:
        raise ConfigError(f"trials must be >= 1, got {config['trials']}")
    m = config.get("reservoir", 2)
    if m % 2 or not 2 <= m <= 8:
        raise ConfigError(f"reservoir must be an even number in [2, 8], got {m}")
    if "tolerance" in config and not 0.0 <= config["tolerance"] < 0.5:
        raise ConfigError(f"tolerance must lie in [0, 1/2), got {config['tolerance']}")
    if config.get("grid", 2) < 1 or config.get("polars", 2) < 1:
        raise ConfigError("grid and polars must be positive")
    if command == "special-search" and config["distribution"] == "cauchy" and not config["scale"] > 0:
        raise ConfigError(f"Cauchy scale must be positive, got {config['scale']}")


def _out_dir(config: dict[str, Any]) -> Path:
    out = Path(config["out"])
    if not out.is_dir():
        raise IOFailure(f"output directory {out} does not exist")
    return out


def _write_json(path: Path, payload: dict) -> None:
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _write_lines(path: Path, records: list[dict]) -> None:
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _envelope(command: str, config: dict[str, Any]) -> dict:
    # the output location is not part of the experiment
    resolved = {k: v for k, v in config.items() if k != "out"}
    return {"tool": "spinledger", "version": __version__, "command": command, "config": resolved}


def cmd_conservation(config: dict[str, Any]) -> int:
    out = _out_dir(config)
    scheme = scheme_from_name(config["scheme"], config["tolerance"])
    trial_rows, records, summaries = [], [], []
    first = None
    worst = 0.0
    for trial, seed in enumerate(spawn_seeds(config["seed"], config["trials"])):
        script = canonical_chain(seed, config["reservoir"])
        ledger, record = run_conservation_chain(script, scheme, make_rng(seed))
        first = first or (ledger, record)
        worst = max(worst, ledger.max_abs_delta)
        for row in ledger.rows[1:]:
            trial_rows.append([seed, row.step, row.device, row.outcome, row.probability, *map(float, row.delta_total)])
            records.append({"device": row.device, "label": row.outcome, "probability": row.probability, "seed": seed, "step": row.step})
        summaries.append({
            "trial": trial,
            "seed": seed,
            "outcomes": list(ledger.outcomes),
            "dJ_total": dict(zip(COMPONENTS, map(float, ledger.final_delta))),
            "max_abs_delta": ledger.max_abs_delta,
        })
    branch_table = None
    if not config["scheme"] == "unitary":
        branch_table = [b.to_dict() for b in enumerate_branches(canonical_chain(config["seed"], config["reservoir"]))]
    report = _envelope("conservation", config) | {
        "scheme": config["scheme"],
        "max_abs_delta": worst,
        "branches": branch_table,
        "trials": summaries,
        "ledger": first[0].to_dict(),
        "record": first[1].to_dict(),
    }
    _write_json(out / "ledger.json", report)
    _write_csv(out / "trials.csv", ["seed", "step", "device", "outcome", "p", "dJx", "dJy", "dJz"], trial_rows)
    _write_lines(out / "outcomes.jsonl", records)
    print(f"conservation: scheme={config['scheme']} trials={config['trials']} max|dJ_total|={worst:.6e}")
    return EXIT_OK


def cmd_anamnesis(config: dict[str, Any]) -> int:
    out = _out_dir(config)
    make_script = single_measurement if config["script"] == "single" else canonical_chain
    script = make_script(config["seed"], config["reservoir"])
    scheme = scheme_from_name(config["scheme"])
    report = run_anamnesis(script, scheme, make_rng(config["seed"]))
    _write_json(out / "anamnesis.json", _envelope("anamnesis", config) | report.to_dict())
    first = report.first_inconsistency()
    where = "none" if first is None else f"t={first.time} fidelity={first.fidelity:.12f}"
    print(
        f"anamnesis: scheme={config['scheme']} records_consistent={report.consistent} "
        f"min_fidelity={report.min_fidelity:.12f} first_inconsistency={where}"
    )
    return EXIT_OK


def _parse_input(text: str):
    text = str(text).strip().lower()
    sign = "down" if text.startswith("-") else "up"
    axis = text.lstrip("+-")
    if axis not in ("x", "y", "z"):
        raise ConfigError(f"input must look like +x, -y or +z, got {text!r}")
    return axis_eigenstate(axis, sign)


def cmd_special_search(config: dict[str, Any]) -> int:
    out = _out_dir(config)
    system = _parse_input(config["input"])
    n = config["grid"]
    grid = SearchGrid.regular(n, n, n)
    hits = special_state_search(system, grid, config["tolerance"], reservoir_size=config["reservoir"])
    if config["distribution"] == "cauchy":
        dist = Cauchy(config["location"], config["scale"])
    else:
        dist = Uniform(config["location"], config["location"] + config["scale"])
    table = kick_statistics(
        system, dist, config["trials"], make_rng(config["seed"]),
        reservoir_size=config["reservoir"], tolerance=config["tolerance"],
    )
    _write_csv(
        out / "special_states.csv",
        ["theta", "polar", "azimuth", "score", "label"],
        [[h.theta, h.polar, h.azimuth, h.score, h.label.value] for h in hits],
    )
    _write_csv(
        out / "kicks.csv",
        ["trial", "raw_theta", "theta", "label", "confidence"],
        [[i, *sample] for i, sample in enumerate(table.samples)],
    )
    _write_json(out / "kick_summary.json", _envelope("special-search", config) | {
        "grid_points": len(grid),
        "special_points": len(hits),
        "kicks": table.to_dict(),
    })
    print(f"special-search: {len(hits)}/{len(grid)} grid points special; kick frequencies {table.to_dict()['frequencies']}")
    return EXIT_OK


def cmd_born_check(config: dict[str, Any]) -> int:
    out = _out_dir(config)
    polars = list(np.linspace(0.0, math.pi, config["polars"]))
    rows = born_check(polars, config["trials"], make_rng(config["seed"]))
    table = []
    worst = 0.0
    for r in rows:
        z = abs(r.frequency_up - r.born_up) / r.sigma if r.sigma > 0 else (0.0 if r.frequency_up == r.born_up else math.inf)
        worst = max(worst, z)
        table.append([r.polar, r.born_up, r.frequency_up, r.sigma, r.trials, z <= 4.0])
    _write_csv(out / "born_check.csv", ["polar", "born_up", "frequency_up", "sigma", "trials", "within_4sigma"], table)
    _write_json(out / "born_check.json", _envelope("born-check", config) | {
        "rows": [dict(zip(["polar", "born_up", "frequency_up", "sigma", "trials", "within_4sigma"], row)) for row in table],
        "max_sigma_deviation": worst,
    })
    print(f"born-check: {len(rows)} inputs, max deviation {worst:.3f} sigma")
    return EXIT_OK


COMMANDS: dict[str, Callable[[dict[str, Any]], int]] = {
    "conservation": cmd_conservation,
    "anamnesis": cmd_anamnesis,
    "special-search": cmd_special_search,
    "born-check": cmd_born_check,
}


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        config = resolve_config(args.command, args)
        return COMMANDS[args.command](config)
    except IOFailure as exc:
        log.error("%s", exc)
        return EXIT_IO
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        log.error("invariant violated: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
