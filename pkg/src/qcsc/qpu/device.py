"""Sampling-level device model: circuits, calibration, noisy execution."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from qcsc.errors import InvalidCircuit, InvalidDistance, InvalidTheta, ModelTooLarge
from qcsc.qpu.model import MAX_SITES, ToyModel, interpolated_state, solve_sector, to_bitstring
from qcsc.units import MS, US, parse_duration


class CircuitKind(str, enum.Enum):
    GROUND_STATE = "GroundStateSampler"
    PARAMETERIZED = "ParameterizedSampler"
    SYNDROME = "SyndromeEmitter"


@dataclass(frozen=True)
class SyndromeSpec:
    distance: int
    physical_error: float
    period: int
    rounds: int


@dataclass(frozen=True)
class CircuitSpec:
    num_qubits: int
    kind: CircuitKind
    shots: int
    two_qubit_gate_count: int = 0
    model: ToyModel | None = None
    theta: tuple[float, ...] | None = None
    syndrome: SyndromeSpec | None = None
    circuit_id: str = ""

    def __post_init__(self):
        if self.shots <= 0:
            raise InvalidCircuit("shots must be positive")
        if self.two_qubit_gate_count < 0:
            raise InvalidCircuit("gate count must be non-negative")
        if (self.theta is not None) != (self.kind is CircuitKind.PARAMETERIZED):
            raise InvalidTheta("theta is required for, and only for, ParameterizedSampler circuits")
        if self.kind is CircuitKind.SYNDROME:
            if self.syndrome is None:
                raise InvalidCircuit("SyndromeEmitter needs a syndrome spec")
            if self.num_qubits != self.syndrome.distance:
                raise InvalidCircuit("SyndromeEmitter width must equal the code distance")
            if self.shots != self.syndrome.rounds:
                raise InvalidCircuit("SyndromeEmitter shots must equal rounds")
        else:
            if self.model is None:
                raise InvalidCircuit(f"{self.kind.value} needs a toy model")
            if self.model.sites != self.num_qubits:
                raise InvalidCircuit(f"circuit width {self.num_qubits} != model size {self.model.sites}")

    @property
    def angle(self) -> float:
        return float(self.theta[0])

    def with_theta(self, theta: Sequence[float]) -> "CircuitSpec":
        return replace(self, theta=tuple(float(t) for t in theta))

    def payload_bytes(self) -> int:
        """Approximate serialized size used for transfer costs."""
        return 256 + 8 * len(self.theta or ()) + 16 * self.two_qubit_gate_count

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "num_qubits": self.num_qubits,
            "kind": self.kind.value,
            "shots": self.shots,
            "two_qubit_gate_count": self.two_qubit_gate_count,
            "model": self.model.to_dict() if self.model else None,
            "theta": list(self.theta) if self.theta is not None else None,
            "circuit_id": self.circuit_id,
        }
        if self.syndrome is not None:
            s = self.syndrome
            d["syndrome"] = {
                "distance": s.distance,
                "physical_error": s.physical_error,
                "period": f"{s.period}ns",
                "rounds": s.rounds,
            }
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CircuitSpec":
        syn = d.get("syndrome")
        return cls(
            num_qubits=int(d["num_qubits"]),
            kind=CircuitKind(d["kind"]),
            shots=int(d["shots"]),
            two_qubit_gate_count=int(d.get("two_qubit_gate_count", 0)),
            model=ToyModel.from_dict(d["model"]) if d.get("model") else None,
            theta=tuple(float(t) for t in d["theta"]) if d.get("theta") is not None else None,
            syndrome=SyndromeSpec(
                distance=int(syn["distance"]),
                physical_error=float(syn["physical_error"]),
                period=parse_duration(syn["period"]),
                rounds=int(syn["rounds"]),
            )
            if syn
            else None,
            circuit_id=d.get("circuit_id", ""),
        )


@dataclass(frozen=True)
class Calibration:
    readout_error: tuple[float, ...]
    gate_error: float
    t1_proxy: int = 100 * US
    timestamp: int = 0

    def __post_init__(self):
        for eps in (*self.readout_error, self.gate_error):
            if not 0.0 <= eps <= 1.0:
                raise ValueError(f"error rate {eps} outside [0, 1]")

    @classmethod
    def uniform(cls, num_qubits: int, readout_error: float = 0.0, gate_error: float = 0.0, **kw) -> "Calibration":
        return cls(tuple([readout_error] * num_qubits), gate_error, **kw)

    @property
    def mean_readout_error(self) -> float:
        return float(np.mean(self.readout_error)) if self.readout_error else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "readout_error": list(self.readout_error),
            "gate_error": self.gate_error,
            "t1_proxy": f"{self.t1_proxy}ns",
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class SyndromeBatch:
    timestamp: int
    bits: str
    logical: int  # hidden from decoders, kept for scoring

    def __post_init__(self):
        d = len(self.bits)
        if d < 3 or d % 2 == 0:
            raise InvalidDistance(f"batch width {d} must be odd and >= 3")


@dataclass(frozen=True)
class SampleSet:
    bitstrings: tuple[str, ...]
    shots: int
    circuit_id: str
    duration: int
    batches: tuple[SyndromeBatch, ...] = field(default=())

    def __post_init__(self):
        if len(self.bitstrings) != self.shots:
            raise ValueError("multiset cardinality must equal shots")

    @property
    def width(self) -> int:
        return len(self.bitstrings[0]) if self.bitstrings else 0

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for b in self.bitstrings:
            out[b] = out.get(b, 0) + 1
        return dict(sorted(out.items()))

    def payload_bytes(self) -> int:
        return max(1, math.ceil(self.shots * max(self.width, 1) / 8))

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "circuit_id": self.circuit_id,
            "shots": self.shots,
            "duration_ns": self.duration,
            "counts": self.counts(),
        }
        if self.batches:
            d["batches"] = [{"timestamp": b.timestamp, "bits": b.bits, "logical": b.logical} for b in self.batches]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SampleSet":
        strings = tuple(s for s, c in sorted(d["counts"].items()) for _ in range(int(c)))
        batches = tuple(SyndromeBatch(int(b["timestamp"]), b["bits"], int(b["logical"])) for b in d.get("batches", []))
        return cls(strings, int(d["shots"]), d.get("circuit_id", ""), int(d.get("duration_ns", 0)), batches)


@dataclass(frozen=True)
class QpuTiming:
    t_shot_base: int = 1 * MS
    t_gate: int = 1 * US


@dataclass(frozen=True)
class DriftConfig:
    magnitude: float = 0.0  # max |log step| per drift_step
    interval: int = 0  # virtual time between steps
    gate_band: tuple[float, float] = (1e-4, 1e-2)
    readout_band: tuple[float, float] = (1e-4, 5e-2)


def estimate_exec_time(circuit: CircuitSpec, timing: QpuTiming = QpuTiming()) -> int:
    """shots * (t_shot_base + two_qubit_gate_count * t_gate), in ns."""
    if circuit.kind is CircuitKind.SYNDROME:
        return circuit.syndrome.rounds * circuit.syndrome.period
    return circuit.shots * (timing.t_shot_base + circuit.two_qubit_gate_count * timing.t_gate)


def gates_per_qubit(num_qubits: int, two_qubit_gates: int) -> np.ndarray:
    """Spread the 2*G gate endpoints over the qubits round-robin."""
    touches = 2 * two_qubit_gates
    base, extra = divmod(touches, num_qubits)
    out = np.full(num_qubits, base, dtype=np.int64)
    out[:extra] += 1
    return out


def flip_probabilities(circuit: CircuitSpec, calibration: Calibration) -> np.ndarray:
    g = gates_per_qubit(circuit.num_qubits, circuit.two_qubit_gate_count)
    return 1.0 - (1.0 - calibration.gate_error) ** g


def ideal_distribution(circuit: CircuitSpec) -> tuple[np.ndarray, np.ndarray]:
    """(sector states, probabilities) of the noiseless sampler."""
    model = circuit.model
    if model.sites > MAX_SITES or circuit.num_qubits > MAX_SITES:
        raise ModelTooLarge(f"{model.sites} sites exceeds the {MAX_SITES}-site limit")
    sol = solve_sector(model)
    if circuit.kind is CircuitKind.GROUND_STATE:
        psi = sol.ground_state
    else:
        if not circuit.theta or not all(math.isfinite(t) for t in circuit.theta):
            raise InvalidTheta(f"bad theta {circuit.theta!r}")
        try:
            psi = interpolated_state(model, circuit.angle)
        except ValueError as exc:
            raise InvalidTheta(str(exc)) from None
    probs = psi**2
    return sol.states, probs / probs.sum()


def execute(
    circuit: CircuitSpec,
    calibration: Calibration,
    rng: np.random.Generator,
    timing: QpuTiming = QpuTiming(),
    overhead: int = 0,
    t0: int = 0,
) -> SampleSet:
    """Sample ``circuit`` and corrupt the bits with gate and readout flips."""
    duration = estimate_exec_time(circuit, timing) + overhead
    if circuit.kind is CircuitKind.SYNDROME:
        s = circuit.syndrome
        batches = emit_syndromes(s.period, s.rounds, s.distance, s.physical_error, rng, t0=t0)
        return SampleSet(tuple(b.bits for b in batches), s.rounds, circuit.circuit_id, duration, tuple(batches))
    states, probs = ideal_distribution(circuit)
    n = circuit.num_qubits
    if len(calibration.readout_error) < n:
        raise InvalidCircuit(f"calibration covers {len(calibration.readout_error)} qubits, circuit needs {n}")
    idx = rng.choice(len(states), size=circuit.shots, p=probs)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = ((states[idx][:, None] >> shifts) & 1).astype(np.uint8)
    p_flip = flip_probabilities(circuit, calibration)
    bits ^= (rng.random(bits.shape) < p_flip[None, :]).astype(np.uint8)
    eps_ro = np.asarray(calibration.readout_error[:n])
    bits ^= (rng.random(bits.shape) < eps_ro[None, :]).astype(np.uint8)
    ints = bits.astype(np.int64) @ (1 << shifts)
    strings = tuple(to_bitstring(x, n) for x in ints)
    return SampleSet(strings, circuit.shots, circuit.circuit_id, duration)


def drift_step(
    calibration: Calibration,
    rng: np.random.Generator,
    config: DriftConfig = DriftConfig(),
    dt: int | None = None,
) -> Calibration:
    """Bounded multiplicative random-walk step on every error rate, clamped to its band."""
    dt = config.interval if dt is None else dt
    if config.magnitude == 0:
        return replace(calibration, timestamp=calibration.timestamp + dt)
    n = len(calibration.readout_error)
    steps = np.exp(config.magnitude * rng.uniform(-1.0, 1.0, size=n + 1))
    lo, hi = config.gate_band
    gate = float(np.clip(calibration.gate_error * steps[0], lo, hi))
    rlo, rhi = config.readout_band
    readout = tuple(float(x) for x in np.clip(np.asarray(calibration.readout_error) * steps[1:], rlo, rhi))
    return replace(calibration, readout_error=readout, gate_error=gate, timestamp=calibration.timestamp + dt)


def emit_syndromes(
    period: int,
    rounds: int,
    distance: int,
    p: float,
    rng: np.random.Generator,
    t0: int = 0,
) -> list[SyndromeBatch]:
    """Distance-d repetition-code readouts, one batch per period starting at t0 + period."""
    if distance < 3 or distance % 2 == 0:
        raise InvalidDistance(f"distance {distance} must be odd and >= 3")
    if not 0.0 <= p < 0.5:
        raise InvalidDistance(f"physical error {p} outside [0, 0.5)")
    logical = rng.integers(0, 2, size=rounds)
    flips = rng.random((rounds, distance)) < p
    bits = logical[:, None] ^ flips
    return [
        SyndromeBatch(t0 + period * (i + 1), "".join("1" if b else "0" for b in bits[i]), int(logical[i]))
        for i in range(rounds)
    ]
