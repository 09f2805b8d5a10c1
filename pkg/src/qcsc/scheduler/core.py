"""Quantum-aware workload manager.

Jobs wait in one queue ordered by ``(priority desc, submit time asc, job id
asc)``.  Every scheduling pass walks that queue and, using estimated
runtimes, computes each job's earliest feasible start against a usage
profile made of running allocations plus the reservations handed to jobs
earlier in the same walk.  A job whose earliest start is *now* is started;
otherwise it keeps its reservation.  A start while some higher-ranked job
holds a future reservation is a backfill, and by construction it cannot move
that reservation (conservative backfilling).

QPUs are exclusive resources.  The scheduler acquires a QRMI token for the
lifetime of a job that needs one; tokens held by anyone else count as busy
until they expire.
"""
from __future__ import annotations

import bisect
import enum
import inspect
import json
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Sequence

from qcsc.core.topology import LOOSEST, CouplingClass, ResourceNode, Topology, classify_coupling, transfer_time
from qcsc.errors import (
    CouplingInfeasible,
    InvalidSpec,
    NoPath,
    ResidencyViolation,
    UnsatisfiableDemand,
)
from qcsc.qpu.device import CircuitSpec, estimate_exec_time
from qcsc.qrmi.interface import AcquisitionToken, Qrmi
from qcsc.sim.kernel import Event, Interrupt, Kernel, Signal
from qcsc.telemetry import MetricsRegistry

_HANDLER = "sched"


class JobKind(str, enum.Enum):
    CLASSICAL = "Classical"
    QUANTUM = "Quantum"
    HYBRID = "HybridClosedLoop"


class JobState(str, enum.Enum):
    QUEUED = "Queued"
    RUNNING = "Running"
    DONE = "Done"
    FAILED = "Failed"
    KILLED = "Killed"
    REJECTED = "Rejected"

    @property
    def terminal(self) -> bool:
        return self in (JobState.DONE, JobState.FAILED, JobState.KILLED, JobState.REJECTED)


@dataclass(frozen=True)
class ClassicalDemand:
    nodes: int = 0
    cores: int = 0  # per node
    gpus: int = 0  # per node


@dataclass(frozen=True)
class JobSpec:
    job_id: str
    kind: JobKind
    estimated_runtime: int
    priority: int = 0
    classical: ClassicalDemand = ClassicalDemand()
    qubits: int = 0
    coupling: CouplingClass = LOOSEST
    residency: str | None = None
    payload: Callable[["JobContext"], Any] | None = None
    qpu: str | None = None  # pin to one QPU
    origin: str | None = None  # where a node-less quantum job's data lives
    workload: str = "synthetic"

    def validate(self) -> None:
        if not self.job_id:
            raise InvalidSpec("job id must be non-empty")
        if self.estimated_runtime <= 0:
            raise InvalidSpec(f"{self.job_id}: estimated runtime must be positive")
        c = self.classical
        if min(c.nodes, c.cores, c.gpus) < 0:
            raise InvalidSpec(f"{self.job_id}: negative classical demand")
        if c.nodes > 0 and c.cores == 0 and c.gpus == 0:
            raise InvalidSpec(f"{self.job_id}: classical nodes requested without cores or gpus")
        if self.kind is JobKind.CLASSICAL:
            if c.nodes <= 0:
                raise InvalidSpec(f"{self.job_id}: Classical jobs need at least one node")
            if self.qubits:
                raise InvalidSpec(f"{self.job_id}: Classical jobs cannot request qubits")
        else:
            if self.qubits <= 0:
                raise InvalidSpec(f"{self.job_id}: {self.kind.value} jobs need qubits > 0")
            if self.kind is JobKind.HYBRID and c.nodes <= 0:
                raise InvalidSpec(f"{self.job_id}: Hybrid jobs need classical nodes")

    @property
    def needs_qpu(self) -> bool:
        return self.kind is not JobKind.CLASSICAL

    @classmethod
    def make(cls, job_id: str, kind: JobKind, estimated_runtime: int, payload=None, **kw) -> "JobSpec":
        """Build from flat keyword arguments (``nodes``/``cores``/``gpus`` fold into the demand)."""
        demand = ClassicalDemand(int(kw.pop("nodes", 0)), int(kw.pop("cores", 0)), int(kw.pop("gpus", 0)))
        return cls(job_id, JobKind(kind), int(estimated_runtime), classical=demand, payload=payload, **kw)


@dataclass(frozen=True)
class NodeShare:
    node: str
    cores: int
    gpus: int


@dataclass
class Allocation:
    job_id: str
    nodes: tuple[NodeShare, ...]
    qpu: str | None
    start: int
    end: int  # start + estimated runtime
    token: AcquisitionToken | None = None
    released_at: int | None = None

    @property
    def qpu_window(self) -> tuple[int, int] | None:
        return (self.start, self.end) if self.qpu else None

    @property
    def classical_window(self) -> tuple[int, int] | None:
        return (self.start, self.end) if self.nodes else None

    def to_dict(self) -> dict:
        return {
            "job": self.job_id,
            "nodes": [[n.node, n.cores, n.gpus] for n in self.nodes],
            "qpu": self.qpu,
            "start": self.start,
            "end": self.end,
            "released_at": self.released_at,
        }


@dataclass
class Job:
    spec: JobSpec
    submitted_at: int
    finished: Signal
    state: JobState = JobState.QUEUED
    allocation: Allocation | None = None
    started_at: int | None = None
    ended_at: int | None = None
    reserved_start: int | None = None
    diagnostic: str | None = None
    result: Any = None
    error: BaseException | None = None
    process: Any = None
    attempts: int = 0

    @property
    def job_id(self) -> str:
        return self.spec.job_id

    def to_dict(self) -> dict:
        return {
            "job": self.job_id,
            "kind": self.spec.kind.value,
            "workload": self.spec.workload,
            "priority": self.spec.priority,
            "state": self.state.value,
            "submitted_at": self.submitted_at,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "estimated_runtime": self.spec.estimated_runtime,
            "diagnostic": self.diagnostic,
            "error": f"{getattr(self.error, 'kind', type(self.error).__name__)}: {self.error}" if self.error else None,
            "allocation": self.allocation.to_dict() if self.allocation else None,
        }


@dataclass
class PlacementCheck:
    ok: bool
    kind: str | None = None
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class Occupant:
    """One interval of resource use in the planning profile."""

    owner: str
    resource: str
    start: int
    end: int
    cores: int = 0
    gpus: int = 0


@dataclass(frozen=True)
class Placement:
    qpu: str | None
    nodes: tuple[NodeShare, ...]
    origin: str | None


@dataclass
class PlanEntry:
    job_id: str
    start: int | None
    placement: Placement | None


@dataclass
class PassAudit:
    """Inputs and outcome of one pass that backfilled; enough to replay it."""

    t: int
    base: tuple[Occupant, ...]
    queue: tuple[str, ...]
    starts: dict[str, int | None]
    backfilled: tuple[str, ...]


@dataclass(frozen=True)
class SchedulerPolicy:
    kill_factor: float = 2.0
    backfill: bool = True
    preemption: bool = False
    node_order: str = "latency"  # or "packed"; the pluggable placement objective


@dataclass
class JobContext:
    kernel: Kernel
    scheduler: "Scheduler"
    spec: JobSpec
    allocation: Allocation
    origin: str | None

    @property
    def qrmi(self) -> Qrmi:
        return self.scheduler.qrmi

    @property
    def topology(self) -> Topology:
        return self.scheduler.topology

    @property
    def window(self) -> tuple[int, int]:
        return (self.allocation.start, self.allocation.end)

    def session(self):
        from qcsc.workloads.session import AllocationSession

        return AllocationSession(self.kernel, self.qrmi, self.allocation.token, self.origin, self.window)


def synthetic_payload(runtime: int) -> Callable[[JobContext], Any]:
    """Payload that just holds its allocation for ``runtime`` ns."""

    def payload(ctx: JobContext):
        yield ctx.kernel.timeout(runtime, name=f"run:{ctx.spec.job_id}")
        return runtime

    return payload


def placement_check(
    spec: JobSpec, topology: Topology, candidate_nodes: Iterable[str], qpu: str | None = None
) -> PlacementCheck:
    """Coupling between the QPU and each candidate, and residency labels."""
    for node_id in candidate_nodes:
        node = topology.node(node_id)
        if spec.residency is not None and node.residency_zone != spec.residency:
            return PlacementCheck(False, ResidencyViolation.kind, f"{node_id} is in zone {node.residency_zone!r}, job requires {spec.residency!r}")
        if qpu is not None:
            try:
                got = classify_coupling(topology, qpu, node_id)
            except NoPath:
                return PlacementCheck(False, CouplingInfeasible.kind, f"no path {qpu}<->{node_id}")
            if not got.meets(spec.coupling):
                return PlacementCheck(False, CouplingInfeasible.kind, f"{qpu}<->{node_id} is {got}, job needs {spec.coupling}")
    return PlacementCheck(True)


def _fits(node: ResourceNode, d: ClassicalDemand) -> bool:
    return node.cpu_cores >= d.cores and node.gpu_units >= d.gpus


class Scheduler:
    def __init__(
        self,
        kernel: Kernel,
        topology: Topology,
        qrmi: Qrmi,
        policy: SchedulerPolicy = SchedulerPolicy(),
        registry: MetricsRegistry | None = None,
    ):
        self.kernel = kernel
        self.topology = topology
        self.qrmi = qrmi
        self.policy = policy
        self.registry = registry if registry is not None else MetricsRegistry()
        self.jobs: dict[str, Job] = {}
        self.queue: list[str] = []
        self.running: dict[str, Job] = {}
        self.log: list[dict] = []
        self.audit: list[PassAudit] = []
        self.submitted = 0
        self._pass_pending: set[int] = set()
        self._wakeups: set[int] = set()
        self._static: dict[str, list[tuple[str | None, list[ResourceNode], str | None]] | PlacementCheck] = {}
        kernel.register(_HANDLER, self._on_event)

    # -- queries ------------------------------------------------------------
    def job(self, job_id: str) -> Job:
        return self.jobs[job_id]

    def counts(self) -> dict[str, int]:
        out = {"submitted": self.submitted, "queued": 0, "running": 0, "terminal": 0}
        for job in self.jobs.values():
            if job.state is JobState.QUEUED:
                out["queued"] += 1
            elif job.state is JobState.RUNNING:
                out["running"] += 1
            else:
                out["terminal"] += 1
        return out

    def usage(self) -> dict[str, tuple[int, int]]:
        """Current (cores, gpus) in use per classical node; QPUs as (holders, 0)."""
        use: dict[str, list[int]] = {n.id: [0, 0] for n in self.topology.nodes}
        for job in self.running.values():
            alloc = job.allocation
            for share in alloc.nodes:
                use[share.node][0] += share.cores
                use[share.node][1] += share.gpus
            if alloc.qpu:
                use[alloc.qpu][0] += 1
        return {k: (v[0], v[1]) for k, v in use.items()}

    def queue_order(self) -> list[str]:
        return sorted(self.queue, key=self._rank)

    def _rank(self, job_id: str) -> tuple:
        job = self.jobs[job_id]
        return (-job.spec.priority, job.submitted_at, job_id)

    def estimate_quantum(self, circuit: CircuitSpec, qpu: str | None = None, origin: str | None = None) -> int:
        """Device time plus the round-trip transfers between ``origin`` and the QPU."""
        qpu = qpu or next(n.id for n in self.topology.qpus if n.qpu_qubits >= circuit.num_qubits)
        system = self.qrmi.system(qpu)
        device = system.estimate(circuit) if hasattr(system, "estimate") else estimate_exec_time(circuit)
        if origin is None:
            return device
        return device + transfer_time(self.topology, origin, qpu, circuit.payload_bytes()) + transfer_time(
            self.topology, qpu, origin, circuit.shots * max(1, circuit.num_qubits // 8 + 1)
        )

    def launch_overhead(self, job: dict) -> int:
        """Per-job launch cost of the classical nodes a job could land on."""
        nodes = [n for n in self.topology.classical if job.get("residency") in (None, n.residency_zone)]
        return max((n.service_overhead for n in nodes), default=0)

    # -- submission ----------------------------------------------------------
    def submit(self, spec: JobSpec) -> int:
        """Queue ``spec``; returns its position in the current queue order."""
        now = self.kernel.now
        self.submitted += 1
        if spec.job_id in self.jobs:
            self.submitted -= 1
            raise InvalidSpec(f"duplicate job id {spec.job_id!r}")
        job = Job(spec, now, self.kernel.signal(f"job:{spec.job_id}"))
        self.jobs[spec.job_id] = job
        try:
            spec.validate()
            self.check_capacity(spec)
        except (InvalidSpec, UnsatisfiableDemand) as exc:
            job.state = JobState.REJECTED
            job.ended_at = now
            job.diagnostic = exc.kind
            job.error = exc
            self._log(spec.job_id, "REJECT", reason=f"{exc.kind}: {exc}")
            job.finished.succeed(job)
            raise
        self.queue.append(spec.job_id)
        self._log(spec.job_id, "QUEUE")
        self._request_pass(now)
        self._observe_queue()
        return self.queue_order().index(spec.job_id)

    def check_capacity(self, spec: JobSpec) -> None:
        d = spec.classical
        if d.nodes:
            able = [n for n in self.topology.classical if _fits(n, d)]
            if len(able) < d.nodes:
                raise UnsatisfiableDemand(
                    f"{spec.job_id} needs {d.nodes} nodes with {d.cores} cores/{d.gpus} gpus; system has {len(able)}"
                )
        if spec.needs_qpu:
            qpus = [q for q in self.topology.qpus if q.qpu_qubits >= spec.qubits and spec.qpu in (None, q.id)]
            if not qpus:
                raise UnsatisfiableDemand(f"{spec.job_id} needs {spec.qubits} qubits; no QPU offers that")

    # -- static placement ------------------------------------------------------
    def static_options(self, spec: JobSpec) -> list[tuple[str | None, list[ResourceNode], str | None]] | PlacementCheck:
        """Per usable QPU (or ``None``), the ordered candidate nodes; or why none work."""
        cached = self._static.get(spec.job_id)
        if cached is not None:
            return cached
        d = spec.classical
        nodes = [n for n in self.topology.classical if _fits(n, d)] if d.nodes else []
        if not spec.needs_qpu:
            ok = [n for n in nodes if spec.residency in (None, n.residency_zone)]
            if len(ok) < d.nodes:
                out: Any = PlacementCheck(False, ResidencyViolation.kind, f"fewer than {d.nodes} nodes in zone {spec.residency!r}")
            else:
                out = [(None, self._order(None, ok), None)]
            self._static[spec.job_id] = out
            return out
        options = []
        first_failure: PlacementCheck | None = None
        for q in self.topology.qpus:
            if q.qpu_qubits < spec.qubits or spec.qpu not in (None, q.id):
                continue
            if d.nodes:
                zone_ok = [n for n in nodes if placement_check(replace(spec, coupling=LOOSEST), self.topology, [n.id]).ok]
                if len(zone_ok) < d.nodes:
                    if first_failure is None:
                        first_failure = PlacementCheck(
                            False, ResidencyViolation.kind, f"fewer than {d.nodes} eligible nodes in zone {spec.residency!r}"
                        )
                    continue
                good = [n for n in zone_ok if placement_check(spec, self.topology, [n.id], q.id).ok]
                if len(good) < d.nodes:
                    bad = next(n for n in zone_ok if n not in good)
                    if first_failure is None:
                        first_failure = placement_check(spec, self.topology, [bad.id], q.id)
                    continue
                options.append((q.id, self._order(q.id, good), None))
            else:
                origin = spec.origin
                if origin is not None:
                    check = placement_check(spec, self.topology, [origin], q.id)
                    if not check:
                        first_failure = check if first_failure is None else first_failure
                        continue
                options.append((q.id, [], origin))
        if first_failure is None:
            first_failure = PlacementCheck(False, CouplingInfeasible.kind, "no usable QPU")
        out = options if options else first_failure
        self._static[spec.job_id] = out
        return out

    def _order(self, qpu: str | None, nodes: list[ResourceNode]) -> list[ResourceNode]:
        if self.policy.node_order == "packed":
            return sorted(nodes, key=lambda n: (n.cpu_cores + n.gpu_units, n.id))
        if qpu is None:
            return sorted(nodes, key=lambda n: n.id)
        return sorted(nodes, key=lambda n: (self.topology.route(qpu, n.id).latency, n.id))

    # -- planning --------------------------------------------------------------
    def base_profile(self, now: int) -> list[Occupant]:
        """Running allocations (to their expected end) and foreign QPU tokens."""
        occ: list[Occupant] = []
        for job in self.running.values():
            alloc = job.allocation
            end = alloc.end if alloc.end > now else self._kill_time(alloc)
            end = max(end, now + 1)
            for share in alloc.nodes:
                occ.append(Occupant(job.job_id, share.node, alloc.start, end, share.cores, share.gpus))
            if alloc.qpu:
                occ.append(Occupant(job.job_id, alloc.qpu, alloc.start, end))
        ours = {j.allocation.token.token_id for j in self.running.values() if j.allocation.token}
        for q in self.topology.qpus:
            tok = self.qrmi.holder_token(q.id)
            if tok is not None and tok.token_id not in ours:
                occ.append(Occupant(f"qrmi:{tok.holder}", q.id, tok.issued_at, tok.expires_at))
        return occ

    def plan(self, now: int, base: Sequence[Occupant], queue: Sequence[str]) -> list[PlanEntry]:
        """Earliest start for every queued job in order, each seeing the reservations before it."""
        profile = _Profile(base)
        out = []
        for job_id in queue:
            spec = self.jobs[job_id].spec
            options = self.static_options(spec)
            if isinstance(options, PlacementCheck):
                out.append(PlanEntry(job_id, None, None))
                continue
            start, placement = self._earliest(spec, options, profile, now)
            if start is not None:
                profile.add_placement(job_id, placement, start, start + spec.estimated_runtime)
            out.append(PlanEntry(job_id, start, placement))
        return out

    def _earliest(self, spec: JobSpec, options, profile: "_Profile", now: int) -> tuple[int | None, Placement | None]:
        usable = [o for o in options if o[0] is None or self.qrmi.system(o[0]).info()["accessible"]]
        if not usable:
            return None, None
        est = spec.estimated_runtime
        for t in profile.candidate_times(now):
            for qpu, nodes, origin in usable:
                if qpu is not None and profile.busy(qpu, t, t + est):
                    continue
                shares = []
                for node in nodes:
                    cores, gpus = profile.peak(node.id, t, t + est)
                    if cores + spec.classical.cores <= node.cpu_cores and gpus + spec.classical.gpus <= node.gpu_units:
                        shares.append(NodeShare(node.id, spec.classical.cores, spec.classical.gpus))
                        if len(shares) == spec.classical.nodes:
                            break
                if len(shares) < spec.classical.nodes:
                    continue
                if origin is None and shares:
                    origin = shares[0].node
                return t, Placement(qpu, tuple(shares), origin)
        return None, None

    # -- passes ------------------------------------------------------------------
    def _request_pass(self, t: int) -> None:
        if t in self._pass_pending:
            return
        self._pass_pending.add(t)
        self.kernel.post(Event(t, target=_HANDLER, payload={"kind": "pass"}))

    def _on_event(self, event: Event) -> None:
        kind = event.payload["kind"]
        if kind == "pass":
            self._pass_pending.discard(event.timestamp)
            self._wakeups.discard(event.timestamp)
            self.schedule_pass(event.timestamp)
        elif kind == "kill":
            self._kill(event.payload["job_id"], event.payload["attempt"])

    def schedule_pass(self, now: int | None = None) -> list[Allocation]:
        now = self.kernel.now if now is None else now
        order = self.queue_order()
        if not order:
            return []
        if self.policy.preemption:
            self._maybe_preempt(now, order)
            order = self.queue_order()
        base = self.base_profile(now)
        entries = self.plan(now, base, order)
        started: list[Allocation] = []
        backfilled: list[str] = []
        reserved_ahead = False
        starts = {e.job_id: e.start for e in entries}
        for entry in entries:
            job = self.jobs[entry.job_id]
            if entry.start is None:
                options = self.static_options(job.spec)
                job.diagnostic = options.kind if isinstance(options, PlacementCheck) else "ResourceInaccessible"
                continue
            if entry.start > now:
                job.reserved_start = entry.start
                reserved_ahead = True
                continue
            is_backfill = reserved_ahead
            if is_backfill and not self.policy.backfill:
                job.reserved_start = entry.start
                continue
            alloc = self._start(job, entry.placement, now, "BACKFILL" if is_backfill else "START")
            started.append(alloc)
            if is_backfill:
                backfilled.append(job.job_id)
        if backfilled:
            self.audit.append(PassAudit(now, tuple(base), tuple(order), starts, tuple(backfilled)))
        future = [s for s in starts.values() if s is not None and s > now]
        if future:
            self._wake(min(future))
        self._observe_queue()
        return started

    def _wake(self, t: int) -> None:
        if t not in self._wakeups:
            self._wakeups.add(t)
            self._request_pass(t)

    def co_allocate(self, spec: JobSpec, now: int | None = None) -> Allocation | PlacementCheck:
        """Earliest common window for the QPU token and classical nodes.

        Starting now acquires both atomically; a later window is returned as
        an unacquired reservation so nothing is held idle before it.
        """
        now = self.kernel.now if now is None else now
        if spec.kind is not JobKind.HYBRID:
            raise InvalidSpec(f"{spec.job_id} is not a HybridClosedLoop job")
        if spec.job_id not in self.jobs:
            self.submit(spec)
        job = self.jobs[spec.job_id]
        if job.state is not JobState.QUEUED:
            return job.allocation
        options = self.static_options(spec)
        if isinstance(options, PlacementCheck):
            return options
        profile = _Profile(self.base_profile(now))
        start, placement = self._earliest(spec, options, profile, now)
        if start is None:
            return PlacementCheck(False, "ResourceInaccessible", "no accessible QPU")
        if start == now:
            return self._start(job, placement, now, "START")
        job.reserved_start = start
        self._wake(start)
        return Allocation(spec.job_id, placement.nodes, placement.qpu, start, start + spec.estimated_runtime)

    # -- lifecycle ----------------------------------------------------------------
    def _start(self, job: Job, placement: Placement, now: int, action: str) -> Allocation:
        spec = job.spec
        token = None
        if placement.qpu is not None:
            lease = max(1, int(spec.estimated_runtime * self.policy.kill_factor))
            token = self.qrmi.acquire(placement.qpu, f"sched:{spec.job_id}", lease)
        alloc = Allocation(spec.job_id, placement.nodes, placement.qpu, now, now + spec.estimated_runtime, token)
        self.queue.remove(job.job_id)
        job.state = JobState.RUNNING
        job.allocation = alloc
        job.started_at = now
        job.reserved_start = None
        job.diagnostic = None
        job.attempts += 1
        self.running[job.job_id] = job
        self._log(job.job_id, action, alloc)
        kill_at = now + max(1, int(spec.estimated_runtime * self.policy.kill_factor))
        self.kernel.post(Event(kill_at, target=_HANDLER, payload={"kind": "kill", "job_id": job.job_id, "attempt": job.attempts}))
        origin = placement.origin if placement.origin is not None else placement.qpu
        ctx = JobContext(self.kernel, self, spec, alloc, origin)
        job.process = self.kernel.spawn(f"job:{job.job_id}#{job.attempts}", self._run(job, ctx))
        return alloc

    def _run(self, job: Job, ctx: JobContext):
        overhead = max((self.topology.node(s.node).service_overhead for s in ctx.allocation.nodes), default=0)
        attempt = job.attempts
        try:
            if overhead:
                yield self.kernel.timeout(overhead, name=f"launch:{job.job_id}")
            payload = job.spec.payload or synthetic_payload(job.spec.estimated_runtime)
            out = payload(ctx)
            if inspect.isgenerator(out):
                out = yield from out
        except Interrupt as intr:
            if job.attempts == attempt and job.state is JobState.RUNNING:
                self._finish(job, JobState.KILLED, error=None, reason=str(intr.cause))
            return None
        except Exception as exc:  # noqa: BLE001 - recorded on the job
            if job.attempts == attempt and job.state is JobState.RUNNING:
                self._finish(job, JobState.FAILED, error=exc, reason=f"{getattr(exc, 'kind', type(exc).__name__)}: {exc}")
            return None
        if job.attempts == attempt and job.state is JobState.RUNNING:
            job.result = out
            self._finish(job, JobState.DONE)
        return out

    def _release(self, job: Job) -> None:
        alloc = job.allocation
        alloc.released_at = self.kernel.now
        if alloc.token is not None and alloc.token.live(self.kernel.now):
            self.qrmi.release(alloc.token)
        self.running.pop(job.job_id, None)

    def _finish(self, job: Job, state: JobState, error: BaseException | None = None, reason: str | None = None) -> None:
        self._release(job)
        job.state = state
        job.ended_at = self.kernel.now
        job.error = error
        action = {JobState.DONE: "END", JobState.FAILED: "END", JobState.KILLED: "KILL"}[state]
        self._log(job.job_id, action, job.allocation, reason)
        self.registry.inc("sched.jobs_finished", {"state": state.value}, self.kernel.now)
        self._request_pass(self.kernel.now)
        job.finished.succeed(job)

    def _kill_time(self, alloc: Allocation) -> int:
        return alloc.start + max(1, int((alloc.end - alloc.start) * self.policy.kill_factor))

    def _kill(self, job_id: str, attempt: int) -> None:
        job = self.jobs[job_id]
        if job.state is not JobState.RUNNING or job.attempts != attempt:
            return
        self._finish(job, JobState.KILLED, reason=f"exceeded {self.policy.kill_factor}x estimate")
        job.process.interrupt("killed")

    def _maybe_preempt(self, now: int, order: list[str]) -> None:
        """Cancel-and-requeue lower-priority Classical jobs so a blocked job can start now."""
        for job_id in order:
            spec = self.jobs[job_id].spec
            options = self.static_options(spec)
            if isinstance(options, PlacementCheck):
                continue
            base = self.base_profile(now)
            start, _ = self._earliest(spec, options, _Profile(base), now)
            if start == now:
                continue
            victims = sorted(
                (j for j in self.running.values() if j.spec.kind is JobKind.CLASSICAL and j.spec.priority < spec.priority),
                key=lambda j: (j.spec.priority, -j.started_at, j.job_id),
            )
            for i in range(1, len(victims) + 1):
                gone = {v.job_id for v in victims[:i]}
                trial = [o for o in base if o.owner not in gone]
                start, _ = self._earliest(spec, options, _Profile(trial), now)
                if start == now:
                    for v in victims[:i]:
                        self._preempt(v)
                    return

    def _preempt(self, job: Job) -> None:
        self._release(job)
        job.state = JobState.QUEUED
        job.allocation = None
        job.started_at = None
        self.queue.append(job.job_id)
        self._log(job.job_id, "QUEUE", reason="preempted")
        job.process.interrupt("preempted")
        job.attempts += 1  # invalidates the old process and kill timer

    # -- logging ------------------------------------------------------------------
    def _log(self, job_id: str, action: str, alloc: Allocation | None = None, reason: str | None = None) -> None:
        rec: dict[str, Any] = {
            "t": self.kernel.now,
            "job": job_id,
            "action": action,
            "nodes": [s.node for s in alloc.nodes] if alloc else [],
            "qpu": alloc.qpu if alloc else None,
        }
        if reason is not None:
            rec["reason"] = reason
        self.log.append(rec)

    def log_lines(self) -> list[str]:
        return [json.dumps(r, sort_keys=True) + "\n" for r in self.log]

    def write_log(self, path) -> None:
        with open(path, "w") as fh:
            fh.writelines(self.log_lines())

    def _observe_queue(self) -> None:
        self.registry.observe("sched.queue_length", "gauge", None, len(self.queue), self.kernel.now)
        self.registry.observe("sched.running", "gauge", None, len(self.running), self.kernel.now)


class _Steps:
    """Piecewise-constant usage of one resource: segment i covers [ts[i], ts[i+1])."""

    __slots__ = ("ts", "cores", "gpus", "holders")

    def __init__(self):
        self.ts: list[int] = []
        self.cores: list[int] = []
        self.gpus: list[int] = []
        self.holders: list[int] = []

    def _split(self, t: int) -> int:
        i = bisect.bisect_left(self.ts, t)
        if i < len(self.ts) and self.ts[i] == t:
            return i
        prev = i - 1
        self.ts.insert(i, t)
        for arr in (self.cores, self.gpus, self.holders):
            arr.insert(i, arr[prev] if prev >= 0 else 0)
        return i

    def add(self, start: int, end: int, cores: int, gpus: int) -> None:
        i = self._split(start)
        j = self._split(end)
        for k in range(i, j):
            self.cores[k] += cores
            self.gpus[k] += gpus
            self.holders[k] += 1

    def peak(self, start: int, end: int) -> tuple[int, int]:
        ts = self.ts
        i = bisect.bisect_right(ts, start) - 1
        if i < 0:
            i = 0
        j = bisect.bisect_left(ts, end)
        if i >= j:
            return 0, 0
        if j - i == 1:
            return self.cores[i], self.gpus[i]
        return max(self.cores[i:j]), max(self.gpus[i:j])

    def busy(self, start: int, end: int) -> bool:
        ts = self.ts
        i = max(0, bisect.bisect_right(ts, start) - 1)
        j = bisect.bisect_left(ts, end)
        return i < j and max(self.holders[i:j]) > 0


class _Profile:
    """Per-resource step functions supporting peak-usage queries."""

    def __init__(self, occupants: Iterable[Occupant] = ()):
        self.by_resource: dict[str, _Steps] = {}
        self.ends: set[int] = set()
        for o in occupants:
            self.add(o)

    def add(self, o: Occupant) -> None:
        steps = self.by_resource.get(o.resource)
        if steps is None:
            steps = self.by_resource[o.resource] = _Steps()
        steps.add(o.start, o.end, o.cores, o.gpus)
        self.ends.add(o.end)

    def add_placement(self, owner: str, placement: Placement, start: int, end: int) -> None:
        for s in placement.nodes:
            self.add(Occupant(owner, s.node, start, end, s.cores, s.gpus))
        if placement.qpu:
            self.add(Occupant(owner, placement.qpu, start, end))

    def candidate_times(self, now: int) -> list[int]:
        return [now] + sorted(e for e in self.ends if e > now)

    def busy(self, resource: str, start: int, end: int) -> bool:
        steps = self.by_resource.get(resource)
        return steps is not None and steps.busy(start, end)

    def peak(self, resource: str, start: int, end: int) -> tuple[int, int]:
        """Max (cores, gpus) in use at any instant of [start, end)."""
        steps = self.by_resource.get(resource)
        return (0, 0) if steps is None else steps.peak(start, end)
