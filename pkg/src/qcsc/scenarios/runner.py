"""Static validation and full simulation of a scenario, producing a RunReport."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Any

from qcsc.core.topology import Topology, build_topology, transfer_time
from qcsc.errors import QcscError, ValidationError
from qcsc.qpu.device import Calibration, DriftConfig, QpuTiming
from qcsc.qpu.system import MockQpu
from qcsc.qrmi.interface import Qrmi
from qcsc.scenarios.drivers import DRIVERS, jsonable
from qcsc.scenarios.loader import Scenario, WorkloadEntry
from qcsc.scheduler.core import Job, JobState, PlacementCheck, Scheduler
from qcsc.sim.kernel import Kernel, trace_lines
from qcsc.tcg.graph import Diagnostic
from qcsc.telemetry import MetricsRegistry, qpu_saturation
from qcsc.units import S


def calibration_for(scenario: Scenario, qpu) -> tuple[Calibration, QpuTiming, DriftConfig]:
    dev = scenario.device(qpu.id)
    n = qpu.qpu_qubits
    ro = dev.readout_error
    readout = tuple(ro) if isinstance(ro, tuple) else (ro,) * n
    if len(readout) != n:
        raise ValueError(f"{qpu.id}: {len(readout)} readout errors for {n} qubits")
    kw = {"t1_proxy": dev.t1_proxy} if dev.t1_proxy is not None else {}
    base = QpuTiming()
    timing = QpuTiming(dev.t_shot_base or base.t_shot_base, dev.t_gate or base.t_gate)
    return Calibration(readout, dev.gate_error, **kw), timing, DriftConfig(dev.drift_magnitude, dev.drift_interval)


class Simulation:
    """One kernel with its topology, mock QPUs, QRMI and scheduler."""

    def __init__(self, scenario: Scenario, topology: Topology | None = None):
        self.scenario = scenario
        self.topology = topology or build_topology(scenario.topology)
        self.kernel = Kernel(scenario.seed, self.topology, record_trace=True)
        self.registry = MetricsRegistry()
        self.qpus: dict[str, MockQpu] = {}
        for q in self.topology.qpus:
            cal, timing, drift = calibration_for(scenario, q)
            self.qpus[q.id] = MockQpu(self.kernel, q, cal, timing, drift, self.registry)
        self.qrmi = Qrmi(self.kernel, list(self.qpus.values()))
        self.scheduler = Scheduler(self.kernel, self.topology, self.qrmi, scenario.policy, self.registry)

    def rng(self, entry: WorkloadEntry):
        return self.kernel.rng(f"workload:{entry.id}")

    def eligible_nodes(self, entry: WorkloadEntry) -> list:
        zone = entry.job.get("residency")
        cores, gpus = int(entry.job.get("cores", 1)), int(entry.job.get("gpus", 0))
        return [
            n
            for n in sorted(self.topology.classical, key=lambda n: n.id)
            if zone in (None, n.residency_zone) and n.cpu_cores >= cores and n.gpu_units >= gpus
        ] or sorted(self.topology.classical, key=lambda n: n.id)

    def origin(self, entry: WorkloadEntry) -> str:
        """Where a batch workload's data lives between its jobs."""
        return entry.job.get("origin") or self.eligible_nodes(entry)[0].id

    def qpu_for(self, entry: WorkloadEntry, qubits: int) -> str:
        if entry.job.get("qpu"):
            return entry.job["qpu"]
        able = [q for q in self.topology.qpus if q.qpu_qubits >= qubits] or list(self.topology.qpus)
        return able[0].id

    def quantum_estimate(self, circuit, entry: WorkloadEntry) -> int:
        """Device time plus the worst round trip to any node the job could land on."""
        qpu = self.qpu_for(entry, circuit.num_qubits)
        return max(self.scheduler.estimate_quantum(circuit, qpu, n.id) for n in self.eligible_nodes(entry))

    def worst_transfer(self, entry: WorkloadEntry, size: int) -> int:
        nodes = [n.id for n in self.eligible_nodes(entry)]
        ends = nodes + [q.id for q in self.topology.qpus]
        return max(transfer_time(self.topology, a, b, size) for a in nodes for b in ends)

    def launch_overhead(self, entry: WorkloadEntry) -> int:
        return self.scheduler.launch_overhead({"residency": entry.job.get("residency")})


def _entry_diagnostics(entry: WorkloadEntry, sim: Simulation) -> list[Diagnostic]:
    driver = DRIVERS.get(entry.workload)
    if driver is None:
        return [Diagnostic("UnknownWorkload", f"{entry.id}: unknown workload {entry.workload!r}; known: {sorted(DRIVERS)}")]
    diags = driver.check(entry)
    if diags:
        return diags
    try:
        specs = driver.specs(entry, sim)
    except (KeyError, TypeError, ValueError, QcscError) as exc:
        return [Diagnostic(getattr(exc, "kind", "InvalidParams"), f"{entry.id}: {exc}")]
    for spec in specs:
        try:
            spec.validate()
            sim.scheduler.check_capacity(spec)
        except QcscError as exc:
            diags.append(Diagnostic(exc.kind, str(exc)))
            continue
        options = sim.scheduler.static_options(spec)
        if isinstance(options, PlacementCheck):
            diags.append(Diagnostic(options.kind, f"{spec.job_id}: {options.reason}"))
    if not diags:
        diags.extend(driver.static_checks(entry, sim))
    return diags


def validate_scenario(scenario: Scenario) -> list[Diagnostic]:
    """Topology build, workload parameters, graph checks and placement feasibility; no simulation."""
    try:
        topology = build_topology(scenario.topology)
    except (QcscError, KeyError, TypeError, ValueError) as exc:
        return [Diagnostic(getattr(exc, "kind", "TopologyError"), str(exc))]
    try:
        sim = Simulation(scenario, topology)
    except (QcscError, ValueError) as exc:
        return [Diagnostic(getattr(exc, "kind", "InvalidDevice"), str(exc))]
    out = []
    for entry in scenario.workloads:
        out.extend(_entry_diagnostics(entry, sim))
    return out


def _window(jobs: list[Job], now: int) -> tuple[int, int] | None:
    started = [j for j in jobs if j.started_at is not None]
    if not started:
        return None
    return min(j.started_at for j in started), max(j.ended_at if j.ended_at is not None else now for j in started)


def _saturation(sim: Simulation, jobs: list[Job]) -> tuple[list[int] | None, float | None]:
    """Mean busy fraction of the QPUs these jobs used, over their active window."""
    window = _window(jobs, sim.kernel.now)
    if window is None or window[1] <= window[0]:
        return (list(window) if window else None), None
    used = sorted({j.allocation.qpu for j in jobs if j.allocation is not None and j.allocation.qpu})
    if not used:
        return list(window), 0.0
    return list(window), sum(qpu_saturation(sim.qpus[q].busy_intervals, window) for q in used) / len(used)


def _job_record(job: Job) -> dict:
    d = job.to_dict()
    d["outcome"] = job.state.value
    d["wait"] = job.started_at - job.submitted_at if job.started_at is not None else None
    return d


@dataclass
class RunResult:
    report: dict
    trace: list[str]
    metrics: str
    scheduler_log: list[str]

    @property
    def exit_code(self) -> int:
        return self.report["exit_code"]

    def report_json(self) -> str:
        return dumps(self.report)

    def summary(self) -> str:
        r = self.report
        sat = r["qpu_saturation"]
        sat_s = "n/a" if sat is None else f"{sat:.4f}"
        return f"{r['scenario']} makespan={r['makespan'] / S:.6f}s saturation={sat_s} status={r['status']}"

    def write(self, out=None, trace=None, metrics=None, scheduler_log=None) -> None:
        for path, text in ((out, self.report_json()), (trace, "".join(self.trace)), (metrics, self.metrics), (scheduler_log, "".join(self.scheduler_log))):
            if path:
                with open(path, "w") as fh:
                    fh.write(text)


def dumps(report: dict) -> str:
    return json.dumps(jsonable(report), sort_keys=True, indent=2) + "\n"


def run_scenario(scenario: Scenario) -> RunResult:
    """Validate, simulate to completion (or the horizon) and assemble the report."""
    diags = validate_scenario(scenario)
    if diags:
        raise ValidationError(diags)
    sim = Simulation(scenario)
    kernel = sim.kernel
    outcomes: dict[str, dict[str, Any]] = {}

    def workload(entry: WorkloadEntry):
        driver = DRIVERS[entry.workload]
        if entry.submit_at:
            yield kernel.timeout(entry.submit_at, name=f"submit:{entry.id}")
        try:
            trace = yield from driver.process(entry, sim)
            outcomes[entry.id] = {"status": "ok", "trace": trace, "error": None}
        except QcscError as exc:
            outcomes[entry.id] = {"status": "failed", "trace": None, "error": f"{exc.kind}: {exc}"}

    procs = [kernel.spawn(f"workload:{e.id}", workload(e)) for e in scenario.workloads]

    def controller():
        yield kernel.all_of(procs, name="workloads")
        kernel.stop()

    kernel.spawn("controller", controller())
    kernel.run_until(scenario.horizon if scenario.horizon is not None else float("inf"))

    jobs = sorted(sim.scheduler.jobs.values(), key=lambda j: (j.submitted_at, j.job_id))
    workloads = {}
    for entry in scenario.workloads:
        driver = DRIVERS[entry.workload]
        mine = [j for j in jobs if j.spec.workload == entry.id]
        window, sat = _saturation(sim, mine)
        outcome = outcomes.get(entry.id, {"status": "incomplete", "trace": None, "error": "horizon reached"})
        workloads[entry.id] = {
            "workload": entry.workload,
            "mode": driver.mode(entry),
            "embedding": driver.embedding(entry),
            "jobs": [j.job_id for j in mine],
            "window": window,
            "qpu_saturation": sat,
            **outcome,
        }
    window, sat = _saturation(sim, jobs)
    ended = [j.ended_at for j in jobs if j.ended_at is not None]
    makespan = max(ended) - min(j.submitted_at for j in jobs) if ended else 0
    ok = all(w["status"] == "ok" for w in workloads.values())
    report = {
        "scenario": scenario.name,
        "seed": scenario.seed,
        "topology": scenario.topology_name,
        "status": "ok" if ok else "failed",
        "exit_code": 0 if ok else 3,
        "end_time": kernel.now,
        "makespan": makespan,
        "window": window,
        "qpu_saturation": sat,
        "counts": sim.scheduler.counts(),
        "jobs": [_job_record(j) for j in jobs],
        "workloads": workloads,
        "metrics": sim.registry.snapshot(),
        "scheduler_log": sim.scheduler.log,
    }
    return RunResult(report, trace_lines(kernel.trace or []), sim.registry.export_text(), sim.scheduler.log_lines())


CSV_FIELDS = ["job", "workload", "kind", "priority", "outcome", "submitted_at", "started_at", "ended_at", "wait", "nodes", "qpu"]


def report_csv(report: dict) -> str:
    """Per-job table of a report."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for j in report["jobs"]:
        alloc = j.get("allocation") or {}
        row = {k: j.get(k) for k in CSV_FIELDS}
        row["nodes"] = " ".join(n[0] for n in alloc.get("nodes", []))
        row["qpu"] = alloc.get("qpu") or ""
        w.writerow({k: "" if v is None else v for k, v in row.items()})
    return buf.getvalue()


def terminal_states_consistent(report: dict) -> bool:
    """Job records agree with the scheduler's conservation counts."""
    c = report["counts"]
    terminal = sum(1 for j in report["jobs"] if JobState(j["outcome"]).terminal)
    return c["submitted"] == len(report["jobs"]) and c["terminal"] == terminal
