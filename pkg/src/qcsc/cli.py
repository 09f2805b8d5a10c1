"""Command-line entry point: run, validate and report on scenarios.

Exit codes: 0 success, 2 parse or validation errors, 3 runtime failures.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from qcsc.errors import GraphInvalid, ParseError, QcscError, ValidationError
from qcsc.scenarios.loader import bundled_scenarios, load_scenario, parse_scenario, read_json, resolve_scenario
from qcsc.scenarios.runner import dumps, report_csv, run_scenario, validate_scenario
from qcsc.tcg.graph import TensorComputeGraph

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3


def exit_code_for(exc: BaseException) -> int:
    """Exit status as a function of the error class only."""
    if isinstance(exc, (ParseError, ValidationError, GraphInvalid)):
        return EXIT_INVALID
    return EXIT_RUNTIME


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _report_errors(exc: QcscError) -> None:
    diags = getattr(exc, "diagnostics", None)
    if diags:
        for d in diags:
            _err(f"error: {d}")
    else:
        _err(f"error: {exc.kind}: {exc}")


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario, seed=args.seed, topology=args.topology)
        result = run_scenario(scenario)
    except QcscError as exc:
        _report_errors(exc)
        return exit_code_for(exc)
    out = args.out or scenario.outputs.get("report") or f"{scenario.name}.report.json"
    result.write(
        out=out,
        trace=args.trace or scenario.outputs.get("trace"),
        metrics=args.metrics_out or scenario.outputs.get("metrics"),
        scheduler_log=args.scheduler_log or scenario.outputs.get("scheduler_log"),
    )
    for wid, w in result.report["workloads"].items():
        if w["status"] != "ok":
            _err(f"error: workload {wid} {w['status']}: {w['error']}")
    print(result.summary())
    return result.exit_code


def _looks_like_graph(doc) -> bool:
    return isinstance(doc, dict) and "workloads" not in doc and "nodes" in doc and "edges" in doc


def cmd_validate(args) -> int:
    try:
        doc = read_json(resolve_scenario(args.scenario), "scenario")
        if _looks_like_graph(doc):
            diags = TensorComputeGraph.from_dict(doc).validate()
            name = doc.get("name", "graph")
        else:
            scenario = parse_scenario(doc, topology=args.topology)
            diags = validate_scenario(scenario)
            name = scenario.name
    except QcscError as exc:
        _report_errors(exc)
        return exit_code_for(exc)
    except (KeyError, TypeError, ValueError) as exc:
        _err(f"error: InvalidGraph: {exc}")
        return EXIT_INVALID
    for d in diags:
        _err(f"error: {d}")
    status = "invalid" if diags else "ok"
    print(f"{name} diagnostics={len(diags)} status={status}")
    return EXIT_INVALID if diags else EXIT_OK


def cmd_report(args) -> int:
    try:
        report = read_json(Path(args.path), "report")
        if not isinstance(report, dict) or "jobs" not in report:
            raise ParseError(f"{args.path} is not a run report")
    except QcscError as exc:
        _report_errors(exc)
        return exit_code_for(exc)
    sys.stdout.write(report_csv(report) if args.format == "csv" else dumps(report))
    return EXIT_OK


def cmd_list(args) -> int:
    for name in bundled_scenarios():
        print(name)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from qcsc.service.app import create_app

    try:
        app = create_app(args.scenario, topology=args.topology, seed=args.seed)
    except QcscError as exc:
        _report_errors(exc)
        return exit_code_for(exc)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcsc", description="Quantum-centric supercomputing scenario simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario and write its report")
    r.add_argument("scenario", help="scenario file or bundled scenario name")
    r.add_argument("--seed", type=int, help="override the scenario's seed")
    r.add_argument("--topology", help="bundled topology name or topology file overriding the scenario's")
    r.add_argument("--out", help="report path (default: <name>.report.json)")
    r.add_argument("--trace", help="write the kernel event trace here")
    r.add_argument("--metrics-out", dest="metrics_out", help="write the metrics exposition here")
    r.add_argument("--scheduler-log", dest="scheduler_log", help="write the scheduler decision log here")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="static checks without simulating")
    v.add_argument("scenario", help="scenario file, bundled scenario name, or tensor compute graph file")
    v.add_argument("--topology", help="bundled topology name or topology file overriding the scenario's")
    v.set_defaults(func=cmd_validate)

    rep = sub.add_parser("report", help="print a run report")
    rep.add_argument("path")
    rep.add_argument("--format", choices=("json", "csv"), default="json")
    rep.set_defaults(func=cmd_report)

    ls = sub.add_parser("list", help="list bundled scenarios")
    ls.set_defaults(func=cmd_list)

    s = sub.add_parser("serve", help="expose the mock QPU and QRMI over HTTP")
    s.add_argument("--scenario", default="sqd_batch", help="scenario whose topology and devices to serve")
    s.add_argument("--topology")
    s.add_argument("--seed", type=int)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.set_defaults(func=cmd_serve)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
