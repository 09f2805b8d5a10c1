from qcsc.qpu.device import (
    Calibration,
    CircuitKind,
    CircuitSpec,
    DriftConfig,
    QpuTiming,
    SampleSet,
    SyndromeBatch,
    SyndromeSpec,
    drift_step,
    emit_syndromes,
    estimate_exec_time,
    execute,
)
from qcsc.qpu.model import ToyModel, solve_sector
from qcsc.qpu.system import JobStatus, MockQpu, QuantumSystemAPI

__all__ = [
    "Calibration",
    "CircuitKind",
    "CircuitSpec",
    "DriftConfig",
    "JobStatus",
    "MockQpu",
    "QpuTiming",
    "QuantumSystemAPI",
    "SampleSet",
    "SyndromeBatch",
    "SyndromeSpec",
    "ToyModel",
    "drift_step",
    "emit_syndromes",
    "estimate_exec_time",
    "execute",
    "solve_sector",
]
