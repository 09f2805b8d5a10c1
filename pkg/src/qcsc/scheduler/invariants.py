"""Randomized workloads and runtime checks for the scheduler's guarantees."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from qcsc.core.topology import Topology, build_topology
from qcsc.errors import UnsatisfiableDemand
from qcsc.qpu.device import Calibration
from qcsc.qpu.system import MockQpu
from qcsc.qrmi.interface import Qrmi
from qcsc.scheduler.core import JobKind, JobSpec, JobState, Scheduler, SchedulerPolicy, synthetic_payload
from qcsc.sim.kernel import Event, Kernel, rng_stream
from qcsc.units import S


def random_topology(rng: np.random.Generator) -> dict:
    n = int(rng.integers(4, 13))
    nodes = []
    for i in range(n):
        kind = "ScaleUpNode" if rng.random() < 0.25 else "ScaleOutNode"
        nodes.append(
            {
                "id": f"c{i:02d}",
                "kind": kind,
                "cpu_cores": int(rng.choice([8, 16, 32])),
                "gpu_units": int(rng.choice([0, 2, 4])) if kind == "ScaleUpNode" else 0,
            }
        )
    qpus = [{"id": f"q{j}", "kind": "QPU", "qpu_qubits": int(rng.choice([16, 27, 64]))} for j in range(int(rng.integers(1, 3)))]
    links = [
        {"endpoints": [q["id"], c["id"]], "latency": f"{int(rng.choice([5, 50, 500]))}us", "bandwidth": 1e9}
        for q in qpus
        for c in nodes
    ]
    return {"nodes": nodes + qpus, "links": links}


@dataclass
class SyntheticJob:
    arrival: int
    spec: JobSpec
    actual: int


def random_jobs(rng: np.random.Generator, topology: Topology, count: int) -> list[SyntheticJob]:
    classical = topology.classical
    max_cores = max(n.cpu_cores for n in classical)
    min_cores = min(n.cpu_cores for n in classical)
    max_q = max(q.qpu_qubits for q in topology.qpus)
    out = []
    t = 0
    for i in range(count):
        t += int(rng.exponential(4 * S))
        roll = rng.random()
        kind = JobKind.CLASSICAL if roll < 0.6 else (JobKind.QUANTUM if roll < 0.8 else JobKind.HYBRID)
        est = int(rng.integers(1, 60)) * S
        overrun = rng.random() < 0.05
        actual = int(est * (rng.uniform(1.2, 3.0) if overrun else rng.uniform(0.3, 1.0)))
        nodes = int(rng.integers(1, max(2, len(classical) // 2) + 1)) if kind is not JobKind.QUANTUM else 0
        cap = max_cores if rng.random() < 0.1 else min_cores  # a few jobs overask on purpose
        cores = int(rng.integers(1, cap + 1)) if nodes else 0
        qubits = int(rng.integers(4, max_q + 1)) if kind is not JobKind.CLASSICAL else 0
        spec = JobSpec.make(
            f"j{i:04d}",
            kind,
            est,
            payload=synthetic_payload(max(1, actual)),
            priority=int(rng.integers(0, 4)),
            nodes=nodes,
            cores=cores,
            qubits=qubits,
        )
        out.append(SyntheticJob(t, spec, actual))
    return out


@dataclass
class InvariantReport:
    oversubscribed: list[tuple[int, str]] = field(default_factory=list)
    priority_violations: list[tuple[int, str, str]] = field(default_factory=list)
    conservation_failures: list[tuple[int, dict]] = field(default_factory=list)
    hybrid_overlap_failures: list[str] = field(default_factory=list)
    backfills: int = 0
    rejected: int = 0
    jobs: int = 0

    @property
    def ok(self) -> bool:
        return not (self.oversubscribed or self.priority_violations or self.conservation_failures or self.hybrid_overlap_failures)


def attach_monitors(kernel: Kernel, scheduler: Scheduler, report: InvariantReport) -> None:
    """Check capacity and job conservation after every kernel event."""
    topo = scheduler.topology

    def hook(event: Event) -> None:
        for node_id, (cores, gpus) in scheduler.usage().items():
            node = topo.node(node_id)
            if node.is_qpu:
                if cores > 1:
                    report.oversubscribed.append((kernel.now, node_id))
            elif cores > node.cpu_cores or gpus > node.gpu_units:
                report.oversubscribed.append((kernel.now, node_id))
        c = scheduler.counts()
        if c["submitted"] != c["queued"] + c["running"] + c["terminal"]:
            report.conservation_failures.append((kernel.now, c))

    kernel.add_hook(hook)


def priority_safety_violations(scheduler: Scheduler) -> list[tuple[int, str, str]]:
    """Replay every backfilling pass without each backfilled job; higher jobs' starts must not move."""
    bad = []
    for audit in scheduler.audit:
        for b in audit.backfilled:
            pos = audit.queue.index(b)
            without = [j for j in audit.queue if j != b]
            replay = {e.job_id: e.start for e in scheduler.plan(audit.t, audit.base, without)}
            for h in audit.queue[:pos]:
                if replay[h] != audit.starts[h]:
                    bad.append((audit.t, h, b))
    return bad


def run_random_scenario(seed: int, jobs: int = 200, policy: SchedulerPolicy = SchedulerPolicy()) -> InvariantReport:
    rng = rng_stream(seed, "scheduler-suite")
    topology = build_topology(random_topology(rng))
    kernel = Kernel(seed, topology)
    qpus = [MockQpu(kernel, q, Calibration.uniform(q.qpu_qubits)) for q in topology.qpus]
    qrmi = Qrmi(kernel, qpus)
    scheduler = Scheduler(kernel, topology, qrmi, policy)
    report = InvariantReport(jobs=jobs)
    attach_monitors(kernel, scheduler, report)
    workload = random_jobs(rng, topology, jobs)

    def submitter():
        for sj in workload:
            if sj.arrival > kernel.now:
                yield kernel.timeout(sj.arrival - kernel.now, name="arrival")
            try:
                scheduler.submit(sj.spec)
            except UnsatisfiableDemand:
                report.rejected += 1

    kernel.spawn("submitter", submitter())
    kernel.run()
    report.priority_violations = priority_safety_violations(scheduler)
    report.backfills = sum(len(a.backfilled) for a in scheduler.audit)
    for job in scheduler.jobs.values():
        if job.spec.kind is JobKind.HYBRID and job.allocation is not None:
            q, c = job.allocation.qpu_window, job.allocation.classical_window
            if q is None or c is None or max(q[0], c[0]) >= min(q[1], c[1]):
                report.hybrid_overlap_failures.append(job.job_id)
    if any(j.state is JobState.QUEUED for j in scheduler.jobs.values()):
        report.conservation_failures.append((kernel.now, scheduler.counts()))
    return report
