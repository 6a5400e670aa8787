"""Command-line front end.

    ordered-qcd validate  --config FILE
    ordered-qcd simulate  --config FILE [--seed N] [--runs N] [--out DIR] [--paper-scale]
    ordered-qcd sweep     --config FILE ...
    ordered-qcd calibrate --config FILE ...

Config files are JSON objects with sections ``graph``, ``model``,
``detection``, and optionally ``sweep`` and ``output``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import graph as G
from . import model as Mdl
from .detector import run_centralized, write_trajectory_csv
from .montecarlo import (CalibrationFailed, ExperimentConfig, ScenarioSpec, calibrate,
                         run_rng, savings_experiment, sweep, write_sweep_csv, EVAL_STREAM)
from .ordering import run_ordered

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_NUMERIC = 5
EXIT_CALIBRATION = 6

FULL_SCALE_RUNS = 1000

GRAPH_KEYS = {
    "chain": {"kind", "K"},
    "tree": {"kind", "K"},
    "explicit": {"kind", "M", "edges"},
    "pair": {"kind", "pre", "post"},
}
MODEL_KEYS = {
    "mean_shift": {"kind", "c", "w", "w_post"},
    "cov_change": {"kind", "x"},
    "explicit": {"kind", "mu0", "sigma0", "mu1", "sigma1"},
}
DETECTION_DEFAULTS = {
    "gamma": 1000.0,
    "b": "calibrate",
    "tau": "inf",
    "horizon": 1000,
    "runs": 100,
    "xi": "auto",
    "eta": 1e-3,
    "master_seed": 0,
    "calibration_horizon": None,
    "b_max": 1000.0,
    "workers": 1,
    "mode": "paired",
}
OUTPUT_DEFAULTS = {"dir": "out", "per_slot": False}
SECTIONS = {"graph", "model", "detection", "sweep", "output"}


class ParseError(ValueError):
    pass


class UsageError(ValueError):
    pass


def _reject_unknown(section, given, allowed):
    extra = set(given) - set(allowed)
    if extra:
        raise ParseError(f"unknown keys in {section}: {sorted(extra)}")


def _edge_graph(d, where):
    _reject_unknown(where, d, {"M", "edges"})
    return G.UndirectedGraph.from_edges(int(d["M"]), d["edges"])


def load_config(path) -> dict:
    """Read a config file, reject unknown keys and fill in defaults."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as e:
        raise ParseError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e}") from e
    if not isinstance(raw, dict):
        raise ParseError("config must be a JSON object")
    _reject_unknown("config", raw, SECTIONS)
    if "graph" not in raw:
        raise ParseError("config needs a graph section")
    g = raw["graph"]
    if g.get("kind") not in GRAPH_KEYS:
        raise ParseError(f"graph.kind must be one of {sorted(GRAPH_KEYS)}")
    _reject_unknown("graph", g, GRAPH_KEYS[g["kind"]])
    if g["kind"] == "pair":
        _reject_unknown("graph.pre", g["pre"], {"M", "edges"})
        _reject_unknown("graph.post", g["post"], {"M", "edges"})
    m = raw.get("model")
    if m is not None:
        if m.get("kind") not in MODEL_KEYS:
            raise ParseError(f"model.kind must be one of {sorted(MODEL_KEYS)}")
        _reject_unknown("model", m, MODEL_KEYS[m["kind"]])
    det = raw.get("detection", {})
    _reject_unknown("detection", det, DETECTION_DEFAULTS)
    out = raw.get("output", {})
    _reject_unknown("output", out, OUTPUT_DEFAULTS)
    cfg = {
        "graph": g,
        "detection": {**DETECTION_DEFAULTS, **det},
        "output": {**OUTPUT_DEFAULTS, **out},
    }
    if m is not None:
        cfg["model"] = m
    if "sweep" in raw:
        _reject_unknown("sweep", raw["sweep"], {"variable", "values"})
        cfg["sweep"] = raw["sweep"]
    return cfg


def experiment_config(cfg: dict) -> ExperimentConfig:
    if "model" not in cfg:
        raise ParseError("config needs a model section")
    d = cfg["detection"]
    b = d["b"] if d["b"] == "calibrate" else float(d["b"])
    xi = d["xi"] if d["xi"] == "auto" else float(d["xi"])
    return ExperimentConfig(
        scenario=ScenarioSpec(cfg["graph"], cfg["model"]),
        gamma=float(d["gamma"]),
        b=b,
        tau=d["tau"],
        horizon=int(d["horizon"]),
        runs=int(d["runs"]),
        xi=xi,
        eta=float(d["eta"]),
        master_seed=int(d["master_seed"]),
        calibration_horizon=d["calibration_horizon"],
        b_max=float(d["b_max"]),
        workers=int(d["workers"]),
    )


def _apply_overrides(cfg, args):
    d = cfg["detection"]
    if args.paper_scale:
        d["runs"] = FULL_SCALE_RUNS
    if args.runs is not None:
        d["runs"] = args.runs
    if args.seed is not None:
        d["master_seed"] = args.seed
    if args.out is not None:
        cfg["output"]["dir"] = args.out
    return cfg


def _out_dir(cfg) -> Path:
    p = Path(cfg["output"]["dir"])
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_effective(cfg, out: Path):
    with open(out / "effective_config.cfg", "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- commands -----------------------------------------------------------------


def cmd_validate(cfg, args) -> int:
    g = cfg["graph"]
    if g["kind"] == "pair":
        pre = _edge_graph(g["pre"], "graph.pre")
        post = _edge_graph(g["post"], "graph.post")
        for name, gr in (("pre-change graph", pre), ("post-change graph", post)):
            if G.check_decomposable(gr):
                print(f"# {name}\n{G.perfect_sequence(gr).table()}\n")
            else:
                print(f"# {name}: not decomposable\n")
        u = G.union_graph(pre, post)
        print("# union graph (used for detection)")
        print(G.perfect_sequence(u).table())
        return EXIT_OK
    graph = ScenarioSpec(g, {}).build_graph()
    seq = G.perfect_sequence(graph)
    print(f"M = {graph.M}, K = {seq.K}")
    print(seq.table())
    return EXIT_OK


def cmd_calibrate(cfg, args) -> int:
    config = experiment_config(cfg)
    res = calibrate(config)
    out = _out_dir(cfg)
    _write_effective(cfg, out)
    text = (f"b = {res.b}\nestimated E_inf = {res.arl:.2f} (gamma = {config.gamma})\n"
            f"censored fraction = {res.censored_fraction:.4f} at horizon {res.horizon}\n")
    (out / "calibration.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_simulate(cfg, args) -> int:
    config = experiment_config(cfg)
    mode = cfg["detection"]["mode"]
    if mode not in ("paired", "ordered", "centralized"):
        raise ParseError("detection.mode must be paired, ordered or centralized")
    out = _out_dir(cfg)
    _write_effective(cfg, out)
    scenario = config.scenario.build()
    coeffs = config.coefficients(scenario.K)
    b = calibrate(config, scenario=scenario).b if config.b == "calibrate" else float(config.b)

    rep = savings_experiment(config, scenario=scenario, b=b)
    with open(out / "outcomes.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "declared", "stop_slot", "threshold", "transmissions_saved"])
        for r, (declared, stop, saved) in enumerate(rep.extras["outcomes"]):
            w.writerow([r, int(declared), stop, repr(b), saved])
    if cfg["output"]["per_slot"]:
        rep.write_per_slot_csv(out / "per_slot.csv")

    # detailed traces of the first run
    if mode in ("paired", "centralized"):
        oc, tc = run_centralized(scenario, coeffs, b, config.tau, config.horizon,
                                 run_rng(config.master_seed, 0, EVAL_STREAM, 0))
        write_trajectory_csv(out / "trajectory.csv", oc, tc)
    if mode in ("paired", "ordered"):
        _, to = run_ordered(scenario, coeffs, b, config.tau, config.horizon,
                            run_rng(config.master_seed, 0, EVAL_STREAM, 0))
        to.to_csv(out / "savings_trace.csv")

    summary = rep.summary()
    (out / "summary.txt").write_text(summary + "\n")
    print(summary)
    return EXIT_OK


def cmd_sweep(cfg, args) -> int:
    config = experiment_config(cfg)
    sw = cfg.get("sweep")
    if not sw or not sw.get("values"):
        raise UsageError("sweep needs a nonempty sweep.values list")
    if sw.get("variable") not in ("c", "x", "K"):
        raise UsageError("sweep.variable must be c, x or K")
    out = _out_dir(cfg)
    _write_effective(cfg, out)
    table = sweep(config, sw["variable"], sw["values"])
    write_sweep_csv(out / "sweep.csv", table)
    lines = [f"{sw['variable']}\ttotal_saved\tlower_bound\tlimit\tb"]
    for v, rep in table:
        lines.append(f"{v}\t{rep.total_saved:.1f}\t{rep.lower_bound_empirical:.1f}\t"
                     f"{rep.lower_bound_limit:.1f}\t{rep.calibrated_b}")
    text = "\n".join(lines)
    (out / "summary.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "calibrate": cmd_calibrate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ordered-qcd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="path to a config file")
        s.add_argument("--seed", type=int, help="override detection.master_seed")
        s.add_argument("--runs", type=int, help="override detection.runs")
        s.add_argument("--out", help="output directory")
        s.add_argument("--paper-scale", action="store_true", help=f"use {FULL_SCALE_RUNS} runs")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, KeyError, TypeError) as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except CalibrationFailed as e:
        print(f"calibration failed: {e}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (Mdl.NotPositiveDefinite, Mdl.SingularCovariance, np.linalg.LinAlgError) as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        # NotDecomposable, VertexCountMismatch, XiOutOfRange and bad values
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
