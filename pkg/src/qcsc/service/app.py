"""HTTP front end for a scenario's hardware: the QSA of one mock QPU and a QRMI daemon.

Virtual time only moves when a request needs it: fetching results runs the
kernel until the job is terminal, and ``POST /v1/clock`` advances it
explicitly.  Everything else reads state at the current virtual time.
"""
from __future__ import annotations

import threading
from dataclasses import asdict

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from qcsc import errors
from qcsc.qrmi.interface import Action, QuantumJobHandle
from qcsc.scenarios.loader import load_scenario
from qcsc.scenarios.runner import Simulation
from qcsc.service.schemas import (
    AcquireIn,
    CalibrationOut,
    CircuitIn,
    ClockAdvance,
    ClockOut,
    HandleOut,
    JobCreated,
    JobStatusOut,
    LifecycleIn,
    QrmiSubmitIn,
    ResourceOut,
    StateOut,
    TokenOut,
)
from qcsc.units import parse_duration

# Upper bound on kernel events processed while serving one request.
MAX_EVENTS_PER_REQUEST = 1_000_000

_STATUS = {
    errors.UnknownJob: 404,
    errors.UnknownResource: 404,
    errors.UnknownToken: 404,
    errors.NotDone: 409,
    errors.NotCancellable: 409,
    errors.ResourceHeld: 409,
    errors.AlreadyReleased: 409,
    errors.TokenExpired: 410,
    errors.DeviceError: 422,
    errors.DeviceRejected: 422,
    errors.ResourceInaccessible: 503,
}


def _status_for(exc: errors.QcscError) -> int:
    for cls in type(exc).__mro__:
        if cls in _STATUS:
            return _STATUS[cls]
    return 400


class ServiceState:
    """The simulation behind the service; requests are serialized by a lock."""

    def __init__(self, sim: Simulation, device: str | None = None):
        self.sim = sim
        self.lock = threading.Lock()
        self.device = sim.qpus[device or sorted(sim.qpus)[0]]

    def run_until_terminal(self, signal) -> None:
        kernel = self.sim.kernel
        steps = 0
        while not signal.fired and kernel.pending and steps < MAX_EVENTS_PER_REQUEST:
            before = kernel.events_processed
            kernel.run_until(kernel.peek())
            steps += kernel.events_processed - before

    def advance(self, delay: int) -> None:
        self.sim.kernel.run_until(self.sim.kernel.now + delay)


def _handle_out(h: QuantumJobHandle) -> HandleOut:
    return HandleOut(
        job_id=h.job_id, resource_id=h.resource_id, token_id=h.token_id, state=h.state.value, submitted_at=h.submitted_at, finished_at=h.finished_at
    )


def _circuit(body: CircuitIn):
    try:
        return body.to_spec()
    except (ValueError, KeyError) as exc:
        raise errors.InvalidCircuit(str(exc)) from None


def create_app(scenario: str = "sqd_batch", topology: str | None = None, seed: int | None = None, device: str | None = None) -> FastAPI:
    """Serve the hardware described by ``scenario`` (its topology and device settings)."""
    state = ServiceState(Simulation(load_scenario(scenario, seed=seed, topology=topology)), device)
    app = FastAPI(title="qcsc mock QPU", version="0.1.0")
    app.state.service = state
    qsa = state.device
    qrmi = state.sim.qrmi

    @app.exception_handler(errors.QcscError)
    def _qcsc_error(request: Request, exc: errors.QcscError):
        return JSONResponse(status_code=_status_for(exc), content={"error": exc.kind, "message": str(exc)})

    # -- Quantum Systems API ---------------------------------------------------
    @app.post("/v1/jobs", response_model=JobCreated, status_code=201)
    def submit(body: CircuitIn):
        with state.lock:
            return JobCreated(job_id=qsa.submit(_circuit(body)))

    @app.get("/v1/jobs/{job_id}", response_model=JobStatusOut)
    def job_status(job_id: str):
        with state.lock:
            return JobStatusOut(**qsa.job_info(job_id))

    @app.get("/v1/jobs/{job_id}/results")
    def job_results(job_id: str):
        with state.lock:
            state.run_until_terminal(qsa.when_done(job_id))
            return qsa.results(job_id).to_dict()

    @app.delete("/v1/jobs/{job_id}", response_model=JobStatusOut)
    def job_cancel(job_id: str):
        with state.lock:
            qsa.cancel(job_id)
            return JobStatusOut(**qsa.job_info(job_id))

    @app.get("/v1/calibration", response_model=CalibrationOut)
    def calibration():
        with state.lock:
            return CalibrationOut(**qsa.calibration().to_dict())

    @app.get("/v1/metrics", response_class=PlainTextResponse)
    def metrics():
        with state.lock:
            return state.sim.registry.export_text()

    @app.get("/v1/clock", response_model=ClockOut)
    def clock():
        return ClockOut(now=state.sim.kernel.now)

    @app.post("/v1/clock", response_model=ClockOut)
    def clock_advance(body: ClockAdvance):
        try:
            delay = parse_duration(body.by)
        except ValueError as exc:
            raise errors.ParseError(str(exc)) from None
        with state.lock:
            state.advance(delay)
            return ClockOut(now=state.sim.kernel.now)

    # -- QRMI daemon -------------------------------------------------------------
    @app.get("/qrmi/v1/resources", response_model=list[ResourceOut])
    def resources():
        with state.lock:
            return [ResourceOut(**asdict(r)) for r in qrmi.list_resources()]

    @app.post("/qrmi/v1/resources/{resource_id}/acquire", response_model=TokenOut, status_code=201)
    def acquire(resource_id: str, body: AcquireIn):
        try:
            lease = parse_duration(body.lease)
        except ValueError as exc:
            raise errors.ParseError(str(exc)) from None
        with state.lock:
            return TokenOut(**asdict(qrmi.acquire(resource_id, body.holder, lease)))

    @app.post("/qrmi/v1/tokens/{token_id}/release", response_model=TokenOut)
    def release(token_id: str):
        with state.lock:
            qrmi.release(token_id)
            return TokenOut(**asdict(next(t for t in qrmi.tokens() if t.token_id == token_id)))

    @app.post("/qrmi/v1/jobs", response_model=HandleOut, status_code=201)
    def qrmi_submit(body: QrmiSubmitIn):
        with state.lock:
            return _handle_out(qrmi.submit_job(body.token_id, _circuit(body.circuit)))

    @app.post("/qrmi/v1/jobs/{job_id}/lifecycle")
    def lifecycle(job_id: str, body: LifecycleIn):
        action = Action(body.action)
        with state.lock:
            if action is Action.FETCH_RESULTS:
                state.run_until_terminal(qrmi.wait(job_id))
                return qrmi.job_lifecycle(job_id, action).to_dict()
            return StateOut(job_id=job_id, state=qrmi.job_lifecycle(job_id, action).value)

    return app
