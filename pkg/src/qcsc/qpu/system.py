"""Mock quantum system exposed only through the Quantum Systems API (QSA).

The device runs jobs FIFO, one at a time, in kernel virtual time.  Calibration
drift is applied lazily: before a job starts, every drift interval that has
elapsed since the last step is replayed, so an idle device costs no events.
"""
from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from typing import Protocol

from qcsc.core.topology import ResourceNode
from qcsc.errors import DeviceError, InvalidCircuit, ModelTooLarge, NotCancellable, NotDone, UnknownJob
from qcsc.qpu.device import (
    Calibration,
    CircuitKind,
    CircuitSpec,
    DriftConfig,
    QpuTiming,
    SampleSet,
    drift_step,
    estimate_exec_time,
    execute,
    ideal_distribution,
)
from qcsc.qpu.model import MAX_SITES
from qcsc.sim.kernel import Event, Kernel, Signal
from qcsc.telemetry import MetricsRegistry
from qcsc.units import S


class JobStatus(str, enum.Enum):
    QUEUED = "QUEUED"
    RUNNING = "RUNNING"
    DONE = "DONE"
    ERROR = "ERROR"
    CANCELLED = "CANCELLED"

    @property
    def terminal(self) -> bool:
        return self in (JobStatus.DONE, JobStatus.ERROR, JobStatus.CANCELLED)


class QuantumSystemAPI(Protocol):
    """The only surface QRMI and workloads may use."""

    device_id: str

    def info(self) -> dict: ...
    def submit(self, circuit: CircuitSpec) -> str: ...
    def status(self, job_id: str) -> JobStatus: ...
    def results(self, job_id: str) -> SampleSet: ...
    def cancel(self, job_id: str) -> JobStatus: ...
    def calibration(self) -> Calibration: ...
    def job_info(self, job_id: str) -> dict: ...
    def when_done(self, job_id: str) -> Signal: ...


@dataclass
class _DeviceJob:
    job_id: str
    circuit: CircuitSpec
    status: JobStatus
    submitted_at: int
    done: Signal
    started_at: int | None = None
    finished_at: int | None = None
    result: SampleSet | None = None
    error: str | None = None


class MockQpu:
    def __init__(
        self,
        kernel: Kernel,
        node: ResourceNode,
        calibration: Calibration,
        timing: QpuTiming = QpuTiming(),
        drift: DriftConfig = DriftConfig(),
        registry: MetricsRegistry | None = None,
    ):
        if not node.is_qpu:
            raise ValueError(f"{node.id} is not a QPU node")
        self.kernel = kernel
        self.node = node
        self.device_id = node.id
        self._calibration = calibration
        self.timing = timing
        self.drift = drift
        self.registry = registry if registry is not None else MetricsRegistry()
        self.maintenance = False
        self.busy_intervals: list[tuple[int, int]] = []
        self._jobs: dict[str, _DeviceJob] = {}
        self._queue: list[str] = []
        self._running: str | None = None
        self._counter = 0
        self._completed = 0
        self._busy_ns = 0
        self._lock = threading.RLock()
        self._handler = f"qpu:{self.device_id}"
        kernel.register(self._handler, self._on_event)
        self._observe_calibration()

    # -- QSA ----------------------------------------------------------------
    def info(self) -> dict:
        return {
            "id": self.device_id,
            "kind": self.node.kind.value,
            "qubits": self.node.qpu_qubits,
            "accessible": not self.maintenance,
        }

    def submit(self, circuit: CircuitSpec) -> str:
        with self._lock:
            self._admit(circuit)
            self._counter += 1
            job_id = f"{self.device_id}-j{self._counter:05d}"
            now = self.kernel.now
            job = _DeviceJob(job_id, circuit, JobStatus.QUEUED, now, self.kernel.signal(f"qsa:{job_id}"))
            self._jobs[job_id] = job
            self._queue.append(job_id)
            self._observe_queue()
            if self._running is None:
                self.kernel.post(Event(now, target=self._handler, payload={"kind": "dispatch"}))
            return job_id

    def status(self, job_id: str) -> JobStatus:
        return self._job(job_id).status

    def job_info(self, job_id: str) -> dict:
        job = self._job(job_id)
        return {
            "job_id": job_id,
            "status": job.status.value,
            "submitted_at": job.submitted_at,
            "started_at": job.started_at,
            "finished_at": job.finished_at,
            "error": job.error,
        }

    def results(self, job_id: str) -> SampleSet:
        job = self._job(job_id)
        if job.status is not JobStatus.DONE:
            raise NotDone(f"job {job_id} is {job.status.value}")
        return job.result

    def cancel(self, job_id: str) -> JobStatus:
        with self._lock:
            job = self._job(job_id)
            if job.status.terminal:
                raise NotCancellable(f"job {job_id} already {job.status.value}")
            now = self.kernel.now
            if job.status is JobStatus.QUEUED:
                self._queue.remove(job_id)
            else:
                self._running = None
                self._record_busy(job.started_at, now)
                self.kernel.post(Event(now, target=self._handler, payload={"kind": "dispatch"}))
            job.status = JobStatus.CANCELLED
            job.finished_at = now
            job.done.succeed(job.status)
            self._observe_queue()
            return job.status

    def calibration(self) -> Calibration:
        with self._lock:
            self._apply_drift()
            return self._calibration

    def when_done(self, job_id: str) -> Signal:
        return self._job(job_id).done

    # -- device internals ---------------------------------------------------
    def estimate(self, circuit: CircuitSpec) -> int:
        return estimate_exec_time(circuit, self.timing) + self.node.service_overhead

    def set_maintenance(self, flag: bool) -> None:
        self.maintenance = flag

    @property
    def queue_depth(self) -> int:
        return len(self._queue) + (1 if self._running else 0)

    def _job(self, job_id: str) -> _DeviceJob:
        try:
            return self._jobs[job_id]
        except KeyError:
            raise UnknownJob(f"unknown job {job_id!r}") from None

    def _admit(self, circuit: CircuitSpec) -> None:
        if circuit.num_qubits > self.node.qpu_qubits:
            raise ModelTooLarge(f"{circuit.num_qubits} qubits on a {self.node.qpu_qubits}-qubit device")
        if circuit.num_qubits > MAX_SITES or (circuit.model and circuit.model.sites > MAX_SITES):
            raise ModelTooLarge(f"circuit exceeds the {MAX_SITES}-site limit")
        if circuit.kind is not CircuitKind.SYNDROME:
            if len(self._calibration.readout_error) < circuit.num_qubits:
                raise InvalidCircuit("calibration does not cover the circuit width")
            ideal_distribution(circuit)  # surfaces InvalidTheta before queueing

    def _on_event(self, event: Event) -> None:
        kind = event.payload["kind"]
        with self._lock:
            if kind == "dispatch":
                self._dispatch()
            elif kind == "finish":
                self._finish(event.payload["job_id"])

    def _dispatch(self) -> None:
        if self._running is not None or not self._queue:
            return
        job = self._jobs[self._queue.pop(0)]
        now = self.kernel.now
        self._apply_drift()
        job.status = JobStatus.RUNNING
        job.started_at = now
        self._running = job.job_id
        try:
            job.result = execute(
                job.circuit,
                self._calibration,
                self.kernel.rng(f"qpu:{self.device_id}"),
                self.timing,
                overhead=self.node.service_overhead,
                t0=now,
            )
        except DeviceError as exc:
            job.status = JobStatus.ERROR
            job.error = f"{exc.kind}: {exc}"
            job.finished_at = now
            self._running = None
            job.done.succeed(job.status)
            self.kernel.post(Event(now, target=self._handler, payload={"kind": "dispatch"}))
            return
        self.kernel.post(Event(now + job.result.duration, target=self._handler, payload={"kind": "finish", "job_id": job.job_id}))
        self._observe_queue()

    def _finish(self, job_id: str) -> None:
        job = self._jobs[job_id]
        if job.status is not JobStatus.RUNNING or self._running != job_id:
            return  # cancelled while running
        now = self.kernel.now
        job.status = JobStatus.DONE
        job.finished_at = now
        self._running = None
        self._record_busy(job.started_at, now)
        self._completed += 1
        labels = {"device": self.device_id}
        self.registry.observe("qpu.jobs_completed", "counter", labels, self._completed, now)
        self._observe_calibration()
        self._observe_queue()
        job.done.succeed(job.status)
        self._dispatch()

    def _record_busy(self, start: int, end: int) -> None:
        if end > start:
            self.busy_intervals.append((start, end))
            self._busy_ns += end - start
        self.registry.observe("qpu.busy_seconds", "counter", {"device": self.device_id}, self._busy_ns / S, end)

    def _apply_drift(self) -> None:
        if self.drift.interval <= 0:
            return
        rng = self.kernel.rng(f"drift:{self.device_id}")
        while self._calibration.timestamp + self.drift.interval <= self.kernel.now:
            self._calibration = drift_step(self._calibration, rng, self.drift)

    def _observe_queue(self) -> None:
        self.registry.observe("qpu.queue_depth", "gauge", {"device": self.device_id}, self.queue_depth, self.kernel.now)

    def _observe_calibration(self) -> None:
        now = self.kernel.now
        labels = {"device": self.device_id}
        cal = self._calibration
        self.registry.observe("qpu.gate_error", "gauge", labels, cal.gate_error, now)
        self.registry.observe("qpu.readout_error", "gauge", labels, cal.mean_readout_error, now)
        self.registry.observe("qpu.calibration_age", "gauge", labels, max(0, now - cal.timestamp) / S, now)
        self.registry.observe("qpu.t1_proxy", "gauge", labels, cal.t1_proxy / S, now)
        if self.registry.get("qpu.jobs_completed", labels) is None:
            self.registry.observe("qpu.jobs_completed", "counter", labels, 0, now)
            self.registry.observe("qpu.busy_seconds", "counter", labels, 0, now)
