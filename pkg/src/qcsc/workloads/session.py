"""How a workload reaches the QPU and classical compute.

A session hides whether the workload holds a co-allocation (QPU token plus
classical nodes for the whole run) or goes through the batch queues one
phase at a time.  All methods are generator functions meant to be driven
with ``yield from`` inside a kernel process.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Mapping, Protocol

from qcsc.errors import AllocationExpired, QcscError, RuntimeFailure
from qcsc.qpu.device import CircuitSpec, SampleSet
from qcsc.qrmi.interface import Action, JobState, Qrmi
from qcsc.sim.kernel import Kernel

if TYPE_CHECKING:
    from qcsc.scheduler.core import Scheduler


@dataclass(frozen=True)
class ClassicalCost:
    """Affine cost model: ``base + sum(per_unit[k] * amount[k])`` nanoseconds."""

    base: int = 1_000_000
    per_unit: Mapping[str, int] = field(default_factory=dict)

    def duration(self, **amounts: float) -> int:
        total = self.base + sum(self.per_unit.get(k, 0) * v for k, v in amounts.items())
        return max(1, int(round(total)))

    @classmethod
    def from_dict(cls, d: Mapping[str, Any] | None, default: "ClassicalCost") -> "ClassicalCost":
        if not d:
            return default
        from qcsc.units import parse_duration

        per_unit = {k: parse_duration(v) for k, v in d.get("per_unit", {}).items()}
        return cls(parse_duration(d.get("base", default.base / 1e9)), per_unit or dict(default.per_unit))


class Session(Protocol):
    kernel: Kernel

    def sample(self, circuit: CircuitSpec, tag: str): ...
    def compute(self, duration: int, tag: str): ...


def _qpu_roundtrip(kernel: Kernel, qrmi: Qrmi, token, origin: str, circuit: CircuitSpec):
    start = kernel.now
    yield kernel.send(origin, token.resource_id, circuit.payload_bytes())
    handle = qrmi.submit_job(token, circuit)
    yield qrmi.wait(handle)
    state = qrmi.job_lifecycle(handle, Action.STATUS)
    if state is not JobState.DONE:
        raise RuntimeFailure(f"quantum job {handle.job_id} ended {state.value}")
    samples: SampleSet = qrmi.job_lifecycle(handle, Action.FETCH_RESULTS)
    yield kernel.send(token.resource_id, origin, samples.payload_bytes())
    return samples, handle.job_id, (start, kernel.now)


class AllocationSession:
    """Runs inside one allocation; every phase must finish inside its window."""

    def __init__(self, kernel: Kernel, qrmi: Qrmi, token, origin: str, window: tuple[int, int] | None = None):
        self.kernel = kernel
        self.qrmi = qrmi
        self.token = token
        self.origin = origin
        self.window = window
        self.phases: list[tuple[str, int, int]] = []

    def _check(self, tag: str) -> None:
        if self.window is not None and self.kernel.now > self.window[1]:
            raise AllocationExpired(f"phase {tag} ended at {self.kernel.now}ns, window closes at {self.window[1]}ns")

    def sample(self, circuit: CircuitSpec, tag: str):
        if self.window is not None and self.kernel.now >= self.window[1]:
            raise AllocationExpired(f"window closed before {tag}")
        result = yield from _qpu_roundtrip(self.kernel, self.qrmi, self.token, self.origin, circuit)
        self.phases.append(("qpu", *result[2]))
        self._check(tag)
        return result

    def compute(self, duration: int, tag: str):
        start = self.kernel.now
        yield self.kernel.timeout(duration, name=tag)
        self.phases.append(("classical", start, self.kernel.now))
        self._check(tag)


class DirectSession(AllocationSession):
    """Acquires the QPU itself; for tests and standalone use without a scheduler."""

    def __init__(self, kernel: Kernel, qrmi: Qrmi, resource_id: str, origin: str, lease: int = 10**15, holder: str = "direct"):
        super().__init__(kernel, qrmi, qrmi.acquire(resource_id, holder, lease), origin)


class BatchSession:
    """Each phase is its own job in the batch queues (loose, batch-time coupling)."""

    def __init__(self, scheduler: "Scheduler", quantum_job: Mapping[str, Any], classical_job: Mapping[str, Any], name: str):
        self.scheduler = scheduler
        self.kernel = scheduler.kernel
        self.quantum_job = dict(quantum_job)
        self.classical_job = dict(classical_job)
        self.name = name
        self.job_ids: list[str] = []
        self.phases: list[tuple[str, int, int]] = []

    def _run_job(self, spec):
        self.scheduler.submit(spec)
        self.job_ids.append(spec.job_id)
        job = self.scheduler.job(spec.job_id)
        yield job.finished
        if job.error is not None:
            raise job.error if isinstance(job.error, QcscError) else RuntimeFailure(str(job.error))
        if job.state.value != "Done":
            raise RuntimeFailure(f"job {spec.job_id} ended {job.state.value}")
        return job.result

    def run_job(self, spec):
        """Submit an arbitrary job spec and wait for its result."""
        return (yield from self._run_job(spec))

    def sample(self, circuit: CircuitSpec, tag: str):
        from qcsc.scheduler.core import JobKind, JobSpec

        def payload(ctx):
            result = yield from _qpu_roundtrip(ctx.kernel, ctx.qrmi, ctx.allocation.token, ctx.origin, circuit)
            return result

        est = self.scheduler.estimate_quantum(circuit, self.quantum_job.get("qpu"), self.quantum_job.get("origin"))
        spec = JobSpec.make(f"{self.name}.{tag}", JobKind.QUANTUM, estimated_runtime=est, payload=payload, **self.quantum_job)
        samples, job_id, phase = yield from self._run_job(spec)
        self.phases.append(("qpu", *phase))
        return samples, job_id, phase

    def compute(self, duration: int, tag: str):
        from qcsc.scheduler.core import JobKind, JobSpec

        def payload(ctx):
            start = ctx.kernel.now
            yield ctx.kernel.timeout(duration, name=tag)
            return (start, ctx.kernel.now)

        overhead = self.scheduler.launch_overhead(self.classical_job)
        spec = JobSpec.make(
            f"{self.name}.{tag}", JobKind.CLASSICAL, estimated_runtime=duration + overhead, payload=payload, **self.classical_job
        )
        phase = yield from self._run_job(spec)
        self.phases.append(("classical", *phase))
