from qcsc.qrmi.interface import (
    AcquisitionToken,
    Action,
    JobState,
    Qrmi,
    QuantumJobHandle,
    ResourceInfo,
    trajectory_is_legal,
)

__all__ = [
    "AcquisitionToken",
    "Action",
    "JobState",
    "Qrmi",
    "QuantumJobHandle",
    "ResourceInfo",
    "trajectory_is_legal",
]
