"""Command-line front end: ``cascadeform {design,simulate,compare,robustness}``.

Exit codes: 0 success, 1 invalid input, 2 design failure, 3 divergence (or,
for simulate and robustness, a run that misses its target by t_end).
"""

import argparse
import json
import logging
import os
import statistics
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .cascade import decoupling_experiment
from .exceptions import DivergenceError, DomainError, FormationError, ScenarioError
from .formats import matrix_from_pairs, pair, write_matrix_text
from .pipelines import design_cascade, design_conventional
from .robustness import CASE_NAMES, conventional_link_check, run_case, select_cases
from .scenario import load_scenario, parse_failure_flag
from .simulator import (SUMMARY_VERSION, Scenario, convergence_time, dump_json, formation_error, run,
                        run_summary, write_error_csv, write_series_csv)

__all__ = ["main", "build_parser"]

log = logging.getLogger("cascadeform")

EXIT_OK, EXIT_INVALID, EXIT_DESIGN, EXIT_DIVERGED = 0, 1, 2, 3


def build_parser():
    p = argparse.ArgumentParser(prog="cascadeform", description="Complex-Laplacian formation design and simulation.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", required=True, help="scenario JSON file")
        sp.add_argument("--out", required=True, help="output directory (created if missing)")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--tol", type=float, help="override the convergence tolerance")

    d = sub.add_parser("design", help="synthesize weights, run the GA, write design.json")
    common(d)
    d.add_argument("--mode", choices=("conventional", "cascade"))

    s = sub.add_parser("simulate", help="integrate the closed loop, write CSV series and summary.json")
    common(s)
    s.add_argument("--mode", choices=("conventional", "cascade"))
    s.add_argument("--design", help="design.json from a previous design run")
    s.add_argument("--failure", action="append", default=[], metavar="KIND:ARGS:TIME",
                   help="inject a failure, e.g. link:a3,a4:5.0 or actuator:a7:2.5 (repeatable)")

    c = sub.add_parser("compare", help="conventional vs cascade on the same agents")
    common(c)
    c.add_argument("--repeats", type=int, default=1, help="number of consecutive seeds (default 1)")

    r = sub.add_parser("robustness", help="the four failure cases on the cascade design")
    common(r)
    return p


def _setup_logging():
    level = os.environ.get("CASCADE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _load(args):
    sf = load_scenario(args.scenario)
    if args.seed is not None:
        sf = sf.with_seed(args.seed)
    if args.tol is not None:
        if not args.tol > 0:
            raise ScenarioError("--tol must be positive")
        sf = replace(sf, convergence_tol=float(args.tol))
    return sf


def _mode(args, sf):
    mode = getattr(args, "mode", None) or ("cascade" if sf.cascade is not None else "conventional")
    if mode == "cascade" and sf.cascade is None:
        raise ScenarioError("cascade mode needs a cascade block", path="cascade")
    return mode


def _design(sf, mode):
    if mode == "cascade":
        return design_cascade(sf.topology, sf.basis, sf.cascade, sf.bounds, sf.ga, weight_seed=sf.seed)
    return design_conventional(sf.topology, sf.basis, sf.bounds, sf.ga, weight_seed=sf.seed)


def _labels(events, ids):
    return [{**e, "agents": [ids[i] for i in e["nodes"]]} for e in events]


def _sim(sf, system, failures=()):
    return run(Scenario(system, sf.basis, sf.initial_positions(), sf.dt, sf.t_end, sf.v_min, sf.v_max,
                        sf.integrator, tuple(failures), sf.convergence_tol, sf.seed, sf.topology))


def _write_trajectory(out, traj, prefix="", extra_errors=None):
    write_series_csv(out / f"{prefix}states.csv", traj.times, traj.states, "z")
    write_series_csv(out / f"{prefix}controls.csv", traj.times, traj.controls, "u")
    cols = {"error": traj.formation_errors}
    cols.update(extra_errors or {})
    write_error_csv(out / f"{prefix}error.csv", traj.times, cols)


def cmd_design(args):
    sf = _load(args)
    mode = _mode(args, sf)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    design = _design(sf, mode)
    doc = {"version": SUMMARY_VERSION, "scenario": sf.name, "seed": sf.seed, **design.to_dict(sf.agent_ids)}
    dump_json(doc, out / "design.json")
    write_matrix_text(out / "system.txt", design.system)
    if design.laplacian is not None:
        write_matrix_text(out / "laplacian.txt", design.laplacian.matrix)
    if design.network is not None:
        rep = decoupling_experiment(design.network, 0, 0.1)
        dump_json({"version": SUMMARY_VERSION, **rep.to_dict(),
                   "metrics": design.metrics.to_dict()}, out / "decoupling.json")
    return EXIT_OK if design.ok else EXIT_DESIGN


def _system_from_file(path, sf):
    with open(path) as fh:
        doc = json.load(fh)
    if "system" not in doc:
        raise ScenarioError("design file has no system matrix", path="system")
    system = matrix_from_pairs(doc["system"])
    if system.shape != (sf.n, sf.n):
        raise ScenarioError(f"design is for {system.shape[0]} agents, scenario has {sf.n}", path="system")
    return system


def cmd_simulate(args):
    sf = _load(args)
    sf = sf.with_failures(parse_failure_flag(f, sf) for f in args.failure)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.design:
        system, mode = _system_from_file(args.design, sf), "file"
    else:
        mode = _mode(args, sf)
        system = _design(sf, mode).system
    traj = _sim(sf, system, sf.failures)
    _write_trajectory(out, traj)
    summary = run_summary(traj, sf.convergence_tol)
    summary["events"] = _labels(summary["events"], sf.agent_ids)
    summary.update({"mode": mode, "seed": sf.seed, "scenario": sf.name})
    dump_json(summary, out / "summary.json")
    return EXIT_OK if summary["converged"] and not traj.diverged else EXIT_DIVERGED


def _median(values):
    finite = [v if v is not None else float("inf") for v in values]
    m = statistics.median(finite)
    return None if m == float("inf") else m


def cmd_compare(args):
    base = _load(args)
    if base.cascade is None:
        raise ScenarioError("compare needs a cascade block", path="cascade")
    if args.repeats < 1:
        raise ScenarioError("--repeats must be at least 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runs, bad = [], False
    for k in range(args.repeats):
        sf = base.with_seed(base.seed + k)
        row = {"seed": sf.seed}
        for mode in ("conventional", "cascade"):
            design = _design(sf, mode)
            traj = _sim(sf, design.system)
            ct = convergence_time(traj, sf.convergence_tol)
            bad |= traj.diverged
            row[mode] = {"lambda_a": pair(design.lambda_a), "lambda_max": pair(design.lambda_max),
                         "convergence_time": ct, "converged": ct is not None, "diverged": traj.diverged,
                         "max_control_magnitude": float(np.max(np.abs(traj.controls)))}
            if k == 0:
                _write_trajectory(out, traj, prefix=f"{mode}_")
        runs.append(row)
    first = runs[0]
    doc = {"version": SUMMARY_VERSION, "scenario": base.name, "seeds": [r["seed"] for r in runs],
           "convergence_tol": base.convergence_tol, "runs": runs}
    for mode in ("conventional", "cascade"):
        doc[mode] = {**first[mode], "median_convergence_time": _median([r[mode]["convergence_time"] for r in runs])}
    ca, cc = doc["cascade"], doc["conventional"]
    doc["lambda_a_ratio"] = ca["lambda_a"][0] / cc["lambda_a"][0]
    mc, mk = cc["median_convergence_time"], ca["median_convergence_time"]
    doc["speedup_ratio"] = mc / mk if mc is not None and mk else None
    dump_json(doc, out / "compare.json")
    return EXIT_DIVERGED if bad else EXIT_OK


def cmd_robustness(args):
    sf = _load(args)
    if sf.cascade is None:
        raise ScenarioError("robustness needs a cascade block", path="cascade")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cascade = _design(sf, "cascade")
    conventional = _design(sf, "conventional")
    net = cascade.network
    cases, survey = select_cases(net, cascade.system, sf.robustness.cases, sf.topology)
    z0 = sf.initial_positions()
    doc = {"version": SUMMARY_VERSION, "scenario": sf.name, "seed": sf.seed,
           "failure_time": sf.robustness.failure_time, "survey": survey, "cases": {}}
    all_ok = True
    for name in CASE_NAMES:
        if name not in cases:
            continue
        event, how = cases[name]
        res = run_case(name, event, how, net, cascade.system, sf, z0, sf.robustness.failure_time)
        if event.kind == "link_failure":
            res.conventional = conventional_link_check(conventional.system, sf.basis, event, sf.topology)
            ctraj = _sim(sf, conventional.system, (res.event,))
            res.conventional["simulation"] = run_summary(ctraj, sf.convergence_tol)
        case_dir = out / name
        case_dir.mkdir(exist_ok=True)
        per_cluster = {
            f"cluster_{k + 1}": [formation_error(z[list(cl.member_ids)], sf.basis[list(cl.member_ids)])
                                 for z in res.trajectory.states]
            for k, cl in enumerate(net.clusters)
        }
        _write_trajectory(case_dir, res.trajectory, extra_errors=per_cluster)
        entry = res.to_dict()
        entry["event"]["agents"] = [sf.agent_ids[i] for i in event.nodes]
        entry["summary"]["events"] = _labels(entry["summary"]["events"], sf.agent_ids)
        dump_json(entry, case_dir / "summary.json")
        doc["cases"][name] = entry
        all_ok &= res.passed
    doc["passed"] = bool(all_ok)
    dump_json(doc, out / "robustness.json")
    return EXIT_OK if all_ok else EXIT_DIVERGED


COMMANDS = {"design": cmd_design, "simulate": cmd_simulate, "compare": cmd_compare, "robustness": cmd_robustness}


def _fail(code, exc):
    diag = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("path", "line", "time"):
        if getattr(exc, attr, None) is not None:
            diag[attr] = getattr(exc, attr)
    if getattr(exc, "diagnostics", None):
        diag["diagnostics"] = {k: repr(v) for k, v in exc.diagnostics.items()}
    print(json.dumps(diag, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except DivergenceError as exc:
        return _fail(EXIT_DIVERGED, exc)
    except DomainError as exc:
        return _fail(EXIT_INVALID, exc)
    except FormationError as exc:
        return _fail(EXIT_DESIGN, exc)
    except OSError as exc:
        return _fail(EXIT_INVALID, exc)


if __name__ == "__main__":
    sys.exit(main())
