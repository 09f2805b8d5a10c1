"""Request and response bodies for the HTTP service."""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from qcsc.qpu.device import CircuitSpec

Duration = str | float


class ToyModelIn(BaseModel):
    kind: Literal["XXZChain"] = "XXZChain"
    sites: int = Field(gt=0)
    delta: float = 1.0
    k: int = 0
    coupling: float = 1.0
    periodic: bool = True


class SyndromeIn(BaseModel):
    distance: int
    physical_error: float = Field(ge=0, le=1)
    period: Duration
    rounds: int = Field(gt=0)


class CircuitIn(BaseModel):
    num_qubits: int = Field(gt=0)
    kind: Literal["GroundStateSampler", "ParameterizedSampler", "SyndromeEmitter"]
    shots: int = Field(gt=0)
    two_qubit_gate_count: int = Field(default=0, ge=0)
    model: ToyModelIn | None = None
    theta: list[float] | None = None
    syndrome: SyndromeIn | None = None
    circuit_id: str = ""

    def to_spec(self) -> CircuitSpec:
        return CircuitSpec.from_dict(self.model_dump())


class JobCreated(BaseModel):
    job_id: str


class JobStatusOut(BaseModel):
    job_id: str
    status: str
    submitted_at: int
    started_at: int | None = None
    finished_at: int | None = None
    error: str | None = None


class CalibrationOut(BaseModel):
    readout_error: list[float]
    gate_error: float
    t1_proxy: str
    timestamp: int


class ClockAdvance(BaseModel):
    by: Duration


class ClockOut(BaseModel):
    now: int


class ResourceOut(BaseModel):
    resource_id: str
    kind: str
    qubits: int
    accessible: bool


class AcquireIn(BaseModel):
    holder: str = Field(min_length=1)
    lease: Duration


class TokenOut(BaseModel):
    token_id: str
    resource_id: str
    holder: str
    issued_at: int
    expires_at: int
    released_at: int | None = None


class QrmiSubmitIn(BaseModel):
    token_id: str
    circuit: CircuitIn


class HandleOut(BaseModel):
    job_id: str
    resource_id: str
    token_id: str
    state: str
    submitted_at: int
    finished_at: int | None = None


class LifecycleIn(BaseModel):
    action: Literal["Status", "Cancel", "FetchResults"]


class StateOut(BaseModel):
    job_id: str
    state: str


class ErrorOut(BaseModel):
    error: str
    message: str
