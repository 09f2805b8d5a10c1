"""Quantum Resource Management Interface.

Discovery, exclusive acquisition with leases, and the quantum job lifecycle.
Every interaction with a device goes through its QSA object; nothing here
reaches into device internals.
"""
from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field
from typing import Iterable

from qcsc.errors import (
    AlreadyReleased,
    DeviceError,
    DeviceRejected,
    NotCancellable,
    NotDone,
    ResourceHeld,
    ResourceInaccessible,
    TokenExpired,
    UnknownJob,
    UnknownResource,
    UnknownToken,
)
from qcsc.qpu.device import CircuitSpec, SampleSet
from qcsc.qpu.system import JobStatus, QuantumSystemAPI
from qcsc.sim.kernel import Event, Kernel, Signal


class JobState(str, enum.Enum):
    QUEUED = "Queued"
    RUNNING = "Running"
    DONE = "Done"
    ERROR = "Error"
    CANCELLED = "Cancelled"

    @property
    def terminal(self) -> bool:
        return self in (JobState.DONE, JobState.ERROR, JobState.CANCELLED)


_FROM_QSA = {
    JobStatus.QUEUED: JobState.QUEUED,
    JobStatus.RUNNING: JobState.RUNNING,
    JobStatus.DONE: JobState.DONE,
    JobStatus.ERROR: JobState.ERROR,
    JobStatus.CANCELLED: JobState.CANCELLED,
}

LEGAL_TRANSITIONS = {
    (JobState.QUEUED, JobState.RUNNING),
    (JobState.RUNNING, JobState.DONE),
    (JobState.RUNNING, JobState.ERROR),
    (JobState.QUEUED, JobState.CANCELLED),
    (JobState.RUNNING, JobState.CANCELLED),
}


class Action(str, enum.Enum):
    STATUS = "Status"
    CANCEL = "Cancel"
    FETCH_RESULTS = "FetchResults"


@dataclass(frozen=True)
class ResourceInfo:
    resource_id: str
    kind: str
    qubits: int
    accessible: bool


@dataclass
class AcquisitionToken:
    token_id: str
    resource_id: str
    holder: str
    issued_at: int
    expires_at: int
    released_at: int | None = None

    def live(self, now: int) -> bool:
        return self.released_at is None and now < self.expires_at


@dataclass
class QuantumJobHandle:
    job_id: str
    resource_id: str
    token_id: str
    state: JobState
    submitted_at: int
    finished_at: int | None = None
    history: list[tuple[int, JobState]] = field(default_factory=list)


class Qrmi:
    def __init__(self, kernel: Kernel, systems: Iterable[QuantumSystemAPI] = ()):
        self.kernel = kernel
        self._systems: dict[str, QuantumSystemAPI] = {}
        self._tokens: dict[str, AcquisitionToken] = {}
        self._holding: dict[str, str] = {}  # resource id -> live token id
        self._jobs: dict[str, QuantumJobHandle] = {}
        self._token_jobs: dict[str, list[str]] = {}
        self._counter = 0
        self._lock = threading.RLock()
        kernel.register("qrmi", self._on_event)
        for s in systems:
            self.register(s)

    def register(self, system: QuantumSystemAPI) -> None:
        self._systems[system.device_id] = system

    def system(self, resource_id: str) -> QuantumSystemAPI:
        try:
            return self._systems[resource_id]
        except KeyError:
            raise UnknownResource(f"unknown resource {resource_id!r}") from None

    # -- discovery --------------------------------------------------------
    def list_resources(self) -> list[ResourceInfo]:
        out = []
        for rid in sorted(self._systems):
            info = self._systems[rid].info()
            out.append(ResourceInfo(rid, info["kind"], int(info["qubits"]), bool(info["accessible"])))
        return out

    # -- acquisition -------------------------------------------------------
    def holder_token(self, resource_id: str) -> AcquisitionToken | None:
        with self._lock:
            tid = self._holding.get(resource_id)
            if tid is None:
                return None
            token = self._tokens[tid]
            if not token.live(self.kernel.now):
                self._expire(token)
                return None
            return token

    def acquire(self, resource_id: str, holder: str, lease: int) -> AcquisitionToken:
        with self._lock:
            system = self.system(resource_id)
            if not system.info()["accessible"]:
                raise ResourceInaccessible(f"{resource_id} is not accessible")
            if self.holder_token(resource_id) is not None:
                raise ResourceHeld(f"{resource_id} is held by {self._tokens[self._holding[resource_id]].holder}")
            if lease <= 0:
                raise ValueError("lease must be positive")
            self._counter += 1
            now = self.kernel.now
            token = AcquisitionToken(f"tok-{self._counter:05d}", resource_id, holder, now, now + int(lease))
            self._tokens[token.token_id] = token
            self._holding[resource_id] = token.token_id
            self._token_jobs[token.token_id] = []
            self.kernel.post(Event(token.expires_at, target="qrmi", payload={"kind": "lease_expiry", "token_id": token.token_id}))
            return token

    def release(self, token: AcquisitionToken | str) -> None:
        with self._lock:
            tok = self._token(token)
            if not tok.live(self.kernel.now):
                self._expire(tok)
                raise AlreadyReleased(f"token {tok.token_id} is not live")
            self._end(tok, self.kernel.now, cancel_jobs=False)

    def _token(self, token: AcquisitionToken | str) -> AcquisitionToken:
        tid = token if isinstance(token, str) else token.token_id
        try:
            return self._tokens[tid]
        except KeyError:
            raise UnknownToken(f"unknown token {tid!r}") from None

    def _end(self, tok: AcquisitionToken, at: int, cancel_jobs: bool) -> None:
        tok.released_at = at
        if self._holding.get(tok.resource_id) == tok.token_id:
            del self._holding[tok.resource_id]
        if cancel_jobs:
            for jid in self._token_jobs.get(tok.token_id, []):
                handle = self._jobs[jid]
                if not self._refresh(handle).terminal:
                    self._cancel(handle)

    def _expire(self, tok: AcquisitionToken) -> None:
        """Expiry implies release and cancels in-flight work."""
        if tok.released_at is None:
            self._end(tok, tok.expires_at, cancel_jobs=True)

    def _on_event(self, event: Event) -> None:
        if event.payload["kind"] == "lease_expiry":
            with self._lock:
                self._expire(self._tokens[event.payload["token_id"]])

    # -- jobs ----------------------------------------------------------------
    def submit_job(self, token: AcquisitionToken | str, circuit: CircuitSpec) -> QuantumJobHandle:
        with self._lock:
            tok = self._token(token)
            if not tok.live(self.kernel.now):
                self._expire(tok)
                raise TokenExpired(f"token {tok.token_id} is not live")
            system = self.system(tok.resource_id)
            try:
                job_id = system.submit(circuit)
            except DeviceError as exc:
                raise DeviceRejected(exc) from exc
            now = self.kernel.now
            handle = QuantumJobHandle(job_id, tok.resource_id, tok.token_id, JobState.QUEUED, now, history=[(now, JobState.QUEUED)])
            self._jobs[job_id] = handle
            self._token_jobs[tok.token_id].append(job_id)
            system.when_done(job_id).on_fire(lambda _s, h=handle: self._refresh(h))
            return handle

    def job_lifecycle(self, handle: QuantumJobHandle | str, action: Action | str) -> JobState | SampleSet:
        with self._lock:
            h = self._handle(handle)
            action = Action(action)
            if action is Action.STATUS:
                return self._refresh(h)
            if action is Action.CANCEL:
                if self._refresh(h).terminal:
                    raise NotCancellable(f"job {h.job_id} already {h.state.value}")
                return self._cancel(h)
            if self._refresh(h) is not JobState.DONE:
                raise NotDone(f"job {h.job_id} is {h.state.value}")
            return self.system(h.resource_id).results(h.job_id)

    def wait(self, handle: QuantumJobHandle | str) -> Signal:
        """Signal that fires once the job is terminal (in-simulation convenience)."""
        h = self._handle(handle)
        return self.system(h.resource_id).when_done(h.job_id)

    def handles(self) -> list[QuantumJobHandle]:
        return [self._jobs[k] for k in sorted(self._jobs)]

    def tokens(self) -> list[AcquisitionToken]:
        return [self._tokens[k] for k in sorted(self._tokens)]

    def _handle(self, handle: QuantumJobHandle | str) -> QuantumJobHandle:
        jid = handle if isinstance(handle, str) else handle.job_id
        try:
            return self._jobs[jid]
        except KeyError:
            raise UnknownJob(f"unknown job {jid!r}") from None

    def _cancel(self, h: QuantumJobHandle) -> JobState:
        self.system(h.resource_id).cancel(h.job_id)
        return self._refresh(h)

    def _refresh(self, h: QuantumJobHandle) -> JobState:
        if h.state.terminal:
            return h.state
        info = self.system(h.resource_id).job_info(h.job_id)
        new = _FROM_QSA[JobStatus(info["status"])]
        if new is not h.state:
            if h.state is JobState.QUEUED and new is not JobState.CANCELLED and info["started_at"] is not None:
                h.history.append((info["started_at"], JobState.RUNNING))
                h.state = JobState.RUNNING
            if new is not h.state:
                h.history.append((info["finished_at"] if new.terminal else self.kernel.now, new))
                h.state = new
            if new.terminal:
                h.finished_at = info["finished_at"]
        return h.state


def trajectory_is_legal(history: list[tuple[int, JobState]]) -> bool:
    states = [s for _, s in history]
    if not states or states[0] is not JobState.QUEUED:
        return False
    return all((a, b) in LEGAL_TRANSITIONS for a, b in zip(states, states[1:]))
