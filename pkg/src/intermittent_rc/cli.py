"""Command-line frontend: ``design``, ``verify``, ``simulate`` and ``sweep``.

Exit codes: 0 when every requested check passes, 1 when the computation ran
but a criterion failed (design exhausted, half-plane test failed, divergence),
2 for invalid input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np

from .design import (
    DesignSpec,
    check_plant,
    design_intermittent,
    evaluate_design,
    write_iterations_csv,
    write_outcome_json,
)
from .errors import DesignFailure, InvalidInput, RcError
from .lti import DEFAULT_GRID_SIZE, TransferFunction, read_frf_csv
from .repetitive import BasisRcConfig, RcConfig, matched_basis_gains
from .sim import (
    Disturbance,
    Harmonic,
    Scenario,
    cumulative_amplitude_spectrum,
    run_closed_loop,
    write_metrics_json,
    write_sim_csv,
    write_spectrum_csv,
)
from .stability import write_report_csv, write_report_json
from .timestamping import KINDS, TimestampGenerator, write_stamps_csv

_NUM_LIST = {"type": "array", "items": {"type": "number"}, "minItems": 1}

_TF = {
    "type": "object",
    "properties": {
        "num": _NUM_LIST,
        "den": _NUM_LIST,
        "preview": {"type": "integer", "minimum": 0},
        "sample_time": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["num"],
    "additionalProperties": False,
}

_DESIGN = {
    "type": "object",
    "properties": {
        "N": {"type": "integer", "minimum": 1},
        "q_cutoff": {"type": "number"},
        "q_half_order": {"type": "integer", "minimum": 0},
        "alpha_factor": {"type": "number"},
        "alpha_max_iter": {"type": "integer", "minimum": 0},
        "alpha_enabled": {"type": "boolean"},
        "notch_enabled": {"type": "boolean"},
        "notch_depth": {"type": "number"},
        "notch_width": {"type": "number"},
        "notch_max_iter": {"type": "integer", "minimum": 0},
        "cutoff_factor": {"type": "number"},
        "cutoff_retries": {"type": "integer", "minimum": 0},
    },
    "required": ["N", "q_cutoff", "q_half_order"],
    "additionalProperties": False,
}

_CONTROLLER = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "type": {"const": "classic"},
                "N": {"type": "integer", "minimum": 1},
                "alpha": {"type": "number", "minimum": 0, "maximum": 1},
                "L": _TF,
                "Q": _TF,
            },
            "required": ["type", "N", "L", "Q"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "type": {"const": "basis"},
                "frequencies": _NUM_LIST,
                "gains": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"},
                              "minItems": 2, "maxItems": 2},
                },
                "gamma": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["type", "frequencies"],
            "additionalProperties": False,
        },
    ]
}

_HARMONIC = {
    "type": "object",
    "properties": {
        "amplitude": {"type": "number"},
        "phase": {"type": "number"},
        "index": {"type": "number"},
        "omega": {"type": "number"},
    },
    "required": ["amplitude"],
    "additionalProperties": False,
}

_TIMESTAMPS = {
    "type": "object",
    "properties": {
        "kind": {"enum": list(KINDS)},
        "p": {"type": "number"},
        "m": {"type": "integer"},
        "offset": {"type": "integer"},
        "loss_len": {"type": "integer"},
        "cycle_len": {"type": "integer"},
        "line_spacing": {"type": "number"},
        "trajectory": {"type": "array", "items": {"type": "number"}},
        "velocity": {"type": "number"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_SCENARIO = {
    "type": "object",
    "properties": {
        "disturbance": {
            "type": "object",
            "properties": {
                "period": {"type": "number", "exclusiveMinimum": 0},
                "harmonics": {"type": "array", "items": _HARMONIC},
            },
            "required": ["period"],
            "additionalProperties": False,
        },
        "timestamps": _TIMESTAMPS,
        "horizon": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "settle_periods": {"type": "integer", "minimum": 0},
    },
    "required": ["disturbance", "horizon"],
    "additionalProperties": False,
}

_SWEEP = {
    "type": "object",
    "properties": {
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "alpha": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "p": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "properties": {
        "plant": _TF,
        "frf": {"type": "string"},
        "design": _DESIGN,
        "controller": _CONTROLLER,
        "scenario": _SCENARIO,
        "sweep": _SWEEP,
        "grid_size": {"type": "integer", "minimum": 16},
        "output_dir": {"type": "string"},
    },
    "required": ["plant"],
    "additionalProperties": False,
}

_SWEEP_AXES = ("seeds", "alpha", "p")


class ConfigError(InvalidInput):
    pass


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc
    doc["_base"] = str(Path(path).resolve().parent)
    return doc


def _require(cfg, *keys):
    for k in keys:
        if k not in cfg:
            raise ConfigError(f"config needs a '{k}' section for this command")


def _plant(cfg) -> TransferFunction:
    plant = TransferFunction.from_dict(cfg["plant"])
    check_plant(plant)
    return plant


def _frf(cfg):
    if "frf" not in cfg:
        return None
    p = Path(cfg["frf"])
    if not p.is_absolute():
        p = Path(cfg["_base"]) / p
    return read_frf_csv(p)


def _grid(cfg, args) -> int:
    if args.grid_size is not None:
        return args.grid_size
    return cfg.get("grid_size", DEFAULT_GRID_SIZE)


def _controller(cfg, plant):
    c = cfg["controller"]
    if c["type"] == "classic":
        return RcConfig(c["N"], TransferFunction.from_dict(c["L"]),
                        TransferFunction.from_dict(c["Q"]), c.get("alpha", 1.0))
    if "gains" in c:
        gains = [complex(a, b) for a, b in c["gains"]]
    else:
        gains = matched_basis_gains(plant, c["frequencies"], c.get("gamma", 0.1))
    return BasisRcConfig(tuple(c["frequencies"]), tuple(gains))


def _design_spec(cfg, args) -> DesignSpec:
    d = dict(cfg["design"])
    return DesignSpec(plant=_plant(cfg), measured_frf=_frf(cfg), grid_size=_grid(cfg, args), **d)


def _out_dir(cfg, args) -> Path:
    out = Path(args.out or cfg.get("output_dir") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve_controller(cfg, args, plant):
    if "controller" in cfg:
        return _controller(cfg, plant)
    _require(cfg, "design")
    return design_intermittent(_design_spec(cfg, args)).cfg


# commands -------------------------------------------------------------


def cmd_design(cfg, args) -> int:
    _require(cfg, "design")
    spec = _design_spec(cfg, args)
    out = _out_dir(cfg, args)
    try:
        outcome = design_intermittent(spec)
    except DesignFailure as exc:
        write_iterations_csv(exc.iterations, out / "iterations.csv")
        with open(out / "design_outcome.json", "w") as fh:
            json.dump({"status": type(exc).__name__, "message": str(exc),
                       "iterations": exc.iterations}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"design failed: {exc}", file=sys.stderr)
        return 1
    write_outcome_json(outcome, out / "design_outcome.json")
    write_iterations_csv(outcome.iterations, out / "iterations.csv")
    t1 = outcome.reports.passivity
    print(f"design ok: alpha={outcome.cfg.alpha:.6g} passivity_margin={t1.s2_margin:.6g}")
    return 0


def cmd_verify(cfg, args) -> int:
    plant = _plant(cfg)
    frf = _frf(cfg)
    ctrl = _resolve_controller(cfg, args, plant)
    target = frf if frf is not None else plant
    rep = evaluate_design(ctrl, target, _grid(cfg, args))
    out = _out_dir(cfg, args)
    for name, r in rep.reports.items():
        write_report_csv(r, out / f"report_{name}.csv")
    write_report_json(rep.reports, out / "stability.json",
                      {"controller": ctrl.to_dict(), "crossover_omega": rep.crossover})
    for name, r in rep.reports.items():
        print(f"{name}: {'pass' if r.passed else 'fail'} margin={r.s2_margin:.6g}")
    return 0 if rep.passivity.passed else 1


def _scenario(cfg, plant, ctrl, seed=None, p=None) -> tuple:
    s = cfg["scenario"]
    d = s["disturbance"]
    dist = Disturbance(d["period"], tuple(Harmonic(**h) for h in d.get("harmonics", [])))
    ts = dict(s.get("timestamps", {"kind": "all"}))
    if p is not None:
        ts["p"] = p
    gen = TimestampGenerator(**ts)
    seed = s.get("seed", 0) if seed is None else seed
    scn = Scenario(plant, dist, ctrl, gen, s["horizon"], seed)
    return scn, s.get("settle_periods", 0)


def _run_one(scn, settle, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    res = run_closed_loop(scn, settle)
    write_sim_csv(res, out / "sim.csv")
    write_stamps_csv(res.psi, out / "timestamps.csv")
    write_metrics_json(res.metrics, out / "metrics.json")
    if not res.diverged:
        window = int(np.ceil(scn.disturbance.period))
        tail = res.e[-max(window, 2):]
        write_spectrum_csv(*cumulative_amplitude_spectrum(tail, scn.plant.sample_time),
                           out / "spectrum.csv")
    return res.metrics


def cmd_simulate(cfg, args) -> int:
    _require(cfg, "scenario")
    plant = _plant(cfg)
    ctrl = _resolve_controller(cfg, args, plant)
    scn, settle = _scenario(cfg, plant, ctrl, seed=args.seed)
    m = _run_one(scn, settle, _out_dir(cfg, args))
    if m["diverged"]:
        print("simulation diverged", file=sys.stderr)
        return 1
    print(f"reduction_factor={m['reduction_factor']:.6g}")
    return 0


def cmd_sweep(cfg, args) -> int:
    _require(cfg, "scenario", "sweep")
    axis = args.axis
    if axis is None:
        present = [a for a in _SWEEP_AXES if a in cfg["sweep"]]
        if len(present) != 1:
            raise ConfigError("choose a sweep axis with --axis")
        axis = present[0]
    if axis not in cfg["sweep"]:
        raise ConfigError(f"sweep section has no '{axis}' values")
    plant = _plant(cfg)
    base = _resolve_controller(cfg, args, plant)
    out = _out_dir(cfg, args)
    rows, failed = [], False
    for i, val in enumerate(cfg["sweep"][axis]):
        ctrl, seed, p = base, args.seed, None
        if axis == "seeds":
            seed = val
        elif axis == "alpha":
            if not isinstance(base, RcConfig):
                raise ConfigError("alpha sweep needs a classic controller")
            ctrl = replace(base, alpha=val)
        else:
            p = val
        scn, settle = _scenario(cfg, plant, ctrl, seed=seed, p=p)
        m = _run_one(scn, settle, out / f"run_{i:03d}")
        failed = failed or m["diverged"]
        rows.append([i, axis, val if isinstance(val, int) else repr(float(val)), scn.seed, int(m["diverged"]),
                     repr(float(m.get("initial_rms", float("nan")))),
                     repr(float(m.get("converged_rms", float("nan")))),
                     repr(float(m.get("reduction_factor", float("nan")))),
                     repr(float(m["max_abs_e"]))])
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "axis", "value", "seed", "diverged", "initial_rms",
                    "converged_rms", "reduction_factor", "max_abs_e"])
        w.writerows(rows)
    print(f"{len(rows)} runs, {'some diverged' if failed else 'all bounded'}")
    return 1 if failed else 0


COMMANDS = {
    "design": cmd_design,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="intermittent-rc",
                                 description="Repetitive control with intermittent sampling.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (overrides output_dir)")
    ap.add_argument("--grid-size", type=int, help="frequency grid size")
    ap.add_argument("--seed", type=int, help="scenario seed (overrides config)")
    ap.add_argument("--axis", choices=_SWEEP_AXES, help="sweep axis")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        if args.grid_size is not None and args.grid_size < 16:
            raise ConfigError("--grid-size must be >= 16")
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except DesignFailure as exc:
        print(f"design failed: {exc}", file=sys.stderr)
        return 1
    except (RcError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
