"""Batch front end: evaluate query files against a model file.

``ictmc eval --model M --queries Q --out DIR [--seed S] [--tol T]`` runs
every query, writes ``report.json`` (deterministic: fixed float formatting,
fixed order, no clocks) plus a ``timings.json`` sidecar with wall times, and
a CSV per convergence/rate query for plotting.  Exit codes: 0 all good,
1 input files rejected, 2 a check failed or a query errored.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .finitary import (DenseCapError, FinitaryGamble, MonotoneFamilyError,
                       check_consistency, downward_probe, evaluate_lower,
                       evaluate_upper, grid_limit, hitting_family,
                       rate_condition_probe)
from .modelio import (REPORT_FORMAT, Model, Query, SchemaError,
                      expression_to_text, parse_model, parse_queries,
                      round_floats)
from .rates import check_upper_rate_axioms
from .semigroup import (ConvergenceError, StepTooLargeError,
                        check_semigroup_law, exponential_apply)
from .spaces import Gamble

__all__ = ["main", "run"]

_QUERY_ERRORS = (ValueError, ConvergenceError, StepTooLargeError,
                 DenseCapError, MonotoneFamilyError)


def _steps_json(step_log) -> dict | None:
    if not step_log:
        return None
    return {
        "stages": len(step_log),
        "total_steps": int(sum(r.n_steps for r in step_log)),
        "worst_estimated_error": float(max(r.estimated_error for r in step_log)),
        "edge_flag": bool(any(r.edge_flag for r in step_log)),
    }


def _random_gambles(model: Model, count: int, seed: int) -> list[Gamble]:
    rng = np.random.default_rng(seed)
    space = model.space
    out = []
    for _ in range(count):
        tail = float(rng.uniform(-1.0, 1.0)) if space.is_truncated else 0.0
        out.append(Gamble(space, rng.uniform(-1.0, 1.0, space.size), tail=tail))
    return out


def _single_time_gamble(model: Model, expr) -> Gamble:
    space = model.space
    values = np.asarray(
        expr.evaluate(space, [np.arange(space.size)]), dtype=np.float64)
    values = np.broadcast_to(values, (space.size,)).astype(np.float64)
    tail = float(np.asarray(expr.evaluate(space, [np.array(space.size)])))
    if not space.is_truncated:
        tail = 0.0
    return Gamble(space, values, tail=tail)


def _run_eval(model: Model, engine, query: Query) -> dict:
    grid = query.params["grid"]
    expr = query.params["expr"]
    lower = query.params["lower"]
    f = FinitaryGamble(model.space, grid, expr=expr)
    step_log: list = []
    if lower:
        value = evaluate_lower(model.initial, engine, f, step_log)
    else:
        value = evaluate_upper(model.initial, engine, f, step_log)
    return {
        "inputs": {"grid": list(grid.points),
                   "gamble": expression_to_text(expr),
                   "lower": lower},
        "value": value,
        "error": engine.tolerance * max(len(grid), 1),
        "steps": _steps_json(step_log),
        "passed": None,
    }


def _run_transition(model: Model, engine, query: Query) -> dict:
    t = query.params["t"]
    expr = query.params["expr"]
    lower = query.params["lower"]
    f = _single_time_gamble(model, expr)
    if lower:
        out, report = exponential_apply(engine, t, -f)
        values = [-v for v in out.values.tolist()]
    else:
        out, report = exponential_apply(engine, t, f)
        values = out.values.tolist()
    return {
        "inputs": {"t": t, "gamble": expression_to_text(expr), "lower": lower},
        "value": values,
        "error": engine.tolerance,
        "steps": _steps_json([report]),
        "passed": None,
    }


def _run_check(model: Model, engine, query: Query, seed: int,
               out_dir: Path) -> dict:
    params = query.params
    check = params["check"]
    if check == "axioms":
        report = check_upper_rate_axioms(model.generator,
                                         sample_count=params["samples"],
                                         seed=seed)
        violations = {
            "constant": report.constant_dev,
            "subadditivity": report.subadditivity_excess,
            "homogeneity": report.homogeneity_dev,
            "positive_maximum": report.pmp_excess,
        }
        worst = max(violations, key=violations.get)
        return {
            "inputs": {"check": check, "samples": params["samples"]},
            "value": violations[worst],
            "error": report.tolerance,
            "steps": None,
            "passed": report.passed,
            "detail": f"worst violation: {worst} = {violations[worst]:.6g} "
                      f"(tolerance {report.tolerance:.6g})",
        }
    if check == "semigroup":
        gambles = _random_gambles(model, params["samples"], seed)
        report = check_semigroup_law(engine, params["s"], params["t"], gambles)
        return {
            "inputs": {"check": check, "s": params["s"], "t": params["t"],
                       "samples": params["samples"]},
            "value": report.worst_deviation,
            "error": report.bound,
            "steps": None,
            "passed": report.passed,
            "detail": f"worst deviation {report.worst_deviation:.6g} vs "
                      f"bound {report.bound:.6g}",
        }
    if check == "consistency":
        tol = params["tol"] if params["tol"] > 0.0 else 10.0 * engine.tolerance
        f = FinitaryGamble(model.space, params["grid"], expr=params["expr"])
        report = check_consistency(model.initial, engine, params["grid"],
                                   params["fine_grid"], f, tol)
        return {
            "inputs": {"check": check, "grid": list(params["grid"].points),
                       "fine_grid": list(params["fine_grid"].points),
                       "gamble": expression_to_text(params["expr"]),
                       "tol": tol},
            "value": report.deviation,
            "error": tol,
            "steps": None,
            "passed": report.passed,
            "detail": f"coarse {report.coarse:.12g} vs fine {report.fine:.12g}",
        }
    if check == "rate_condition":
        report = rate_condition_probe(model.initial, engine, params["t"],
                                      params["deltas"])
        _write_csv(out_dir / f"{query.name}.csv", "delta,estimate",
                   zip(report.deltas, report.ratios))
        return {
            "inputs": {"check": check, "t": params["t"],
                       "deltas": list(params["deltas"])},
            "value": max(report.ratios),
            "error": report.slack,
            "steps": None,
            "passed": report.passed,
            "detail": f"ratios stay below the rate bound {report.bound:.12g}"
                      if report.passed else
                      f"a ratio exceeds the rate bound {report.bound:.12g}",
        }
    # downward
    gambles = [FinitaryGamble(model.space, params["grid"], expr=e)
               for e in params["family"]]
    limit = FinitaryGamble(model.space, params["grid"], expr=params["limit"])
    report = downward_probe(model.initial, engine, gambles, limit,
                            params["tol"], seed=seed)
    return {
        "inputs": {"check": check, "grid": list(params["grid"].points),
                   "family": [expression_to_text(e) for e in params["family"]],
                   "limit": expression_to_text(params["limit"]),
                   "tol": params["tol"]},
        "value": report.limit_estimate,
        "error": params["tol"],
        "steps": None,
        "passed": report.passed,
        "detail": f"family estimates {[f'{v:.6g}' for v in report.estimates]} "
                  f"vs limit {report.limit_estimate:.6g}",
    }


def _run_converge(model: Model, engine, query: Query, seed: int,
                  out_dir: Path) -> dict:
    params = query.params
    build = hitting_family(model.space, params["target"], params["horizon"])
    report = grid_limit(model.initial, engine, build, params["levels"],
                        params["tol"], direction="increasing", seed=seed)
    _write_csv(out_dir / f"{query.name}.csv", "level,estimate",
               zip(report.levels, report.estimates))
    return {
        "inputs": {"family": "hitting", "target": params["target"],
                   "horizon": params["horizon"],
                   "levels": list(params["levels"]), "tol": params["tol"]},
        "value": report.estimates[-1],
        "error": params["tol"],
        "steps": None,
        "passed": report.converged and report.estimates_monotone,
        "detail": f"estimates {[f'{v:.6g}' for v in report.estimates]}",
    }


def _write_csv(path: Path, header: str, rows) -> None:
    lines = [header]
    for a, b in rows:
        lines.append(f"{a:.12g},{b:.12g}" if isinstance(a, float)
                     else f"{a},{b:.12g}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run(model: Model, queries, out_dir, seed: int = 0,
        tolerance: float | None = None) -> int:
    """Execute parsed queries and write report, timings, and CSVs."""
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    engine = model.engine(tolerance)

    records = []
    timings = {}
    any_failed = False
    for query in queries:
        started = time.perf_counter()
        record = {"name": query.name, "kind": query.kind}
        try:
            if query.kind == "eval":
                record.update(_run_eval(model, engine, query))
            elif query.kind == "transition":
                record.update(_run_transition(model, engine, query))
            elif query.kind == "check":
                record.update(_run_check(model, engine, query, seed, out_path))
            else:
                record.update(_run_converge(model, engine, query, seed, out_path))
            record.setdefault("detail", "")
            record["status"] = "ok"
            if record["passed"] is False:
                any_failed = True
        except _QUERY_ERRORS as exc:
            record.update({"inputs": {}, "value": None, "error": None,
                           "steps": None, "passed": False, "status": "error",
                           "detail": f"{type(exc).__name__}: {exc}"})
            any_failed = True
        timings[query.name] = time.perf_counter() - started
        records.append(record)

    report = {
        "format": REPORT_FORMAT,
        "engine": {"tolerance": engine.tolerance,
                   "iteration_cap": engine.iteration_cap,
                   "seed": seed},
        "queries": records,
        "summary": {
            "total": len(records),
            "failed": sum(1 for r in records
                          if r["passed"] is False or r["status"] == "error"),
        },
    }
    report_text = json.dumps(round_floats(report), indent=2, sort_keys=True,
                             allow_nan=False) + "\n"
    (out_path / "report.json").write_text(report_text, encoding="utf-8")
    (out_path / "timings.json").write_text(
        json.dumps({k: round(v, 6) for k, v in timings.items()}, indent=2,
                   sort_keys=True) + "\n", encoding="utf-8")
    return 2 if any_failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ictmc",
        description="Evaluate imprecise continuous-time Markov chain queries.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    ev = sub.add_parser("eval", help="run a query file against a model file")
    ev.add_argument("--model", required=True, help="model JSON file")
    ev.add_argument("--queries", required=True, help="query JSON file")
    ev.add_argument("--out", required=True, help="output directory")
    ev.add_argument("--seed", type=int, default=0,
                    help="seed for sampled checks (default 0)")
    ev.add_argument("--tol", type=float, default=None,
                    help="override the model's engine tolerance")
    args = parser.parse_args(argv)

    try:
        model = parse_model(args.model)
    except SchemaError as exc:
        for issue in exc.issues:
            print(f"model: {issue}", file=sys.stderr)
        return 1
    try:
        queries = parse_queries(args.queries, model.space)
    except SchemaError as exc:
        for issue in exc.issues:
            print(f"queries: {issue}", file=sys.stderr)
        return 1
    if args.tol is not None and args.tol <= 0.0:
        print("--tol must be positive", file=sys.stderr)
        return 1

    code = run(model, queries, args.out, seed=args.seed, tolerance=args.tol)
    report_path = Path(args.out) / "report.json"
    summary = json.loads(report_path.read_text(encoding="utf-8"))["summary"]
    print(f"{summary['total']} queries, {summary['failed']} failed -> "
          f"{report_path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
