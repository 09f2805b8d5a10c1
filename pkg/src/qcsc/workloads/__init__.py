from qcsc.workloads.closed_loop import ClosedLoopTrace, InnerSqd, StepSchedule, closed_loop_sqd
from qcsc.workloads.mitigation import (
    ConfusionMatrix,
    apply_confusion,
    expectation_z,
    mitigate_vector,
    readout_mitigation,
)
from qcsc.workloads.qec import (
    logical_error_closed_form,
    majority_decode,
    outer_decoder_loop,
    outer_decoder_process,
    syndrome_stream_decode,
)
from qcsc.workloads.session import AllocationSession, BatchSession, ClassicalCost, DirectSession
from qcsc.workloads.sqd import (
    SqdState,
    configuration_recovery,
    occupancy_update,
    partition_by_hamming,
    project_diagonalize,
    sqd_run,
    subsample,
)

__all__ = [
    "AllocationSession",
    "BatchSession",
    "ClassicalCost",
    "ClosedLoopTrace",
    "ConfusionMatrix",
    "DirectSession",
    "InnerSqd",
    "SqdState",
    "StepSchedule",
    "apply_confusion",
    "closed_loop_sqd",
    "configuration_recovery",
    "expectation_z",
    "logical_error_closed_form",
    "majority_decode",
    "mitigate_vector",
    "occupancy_update",
    "outer_decoder_loop",
    "outer_decoder_process",
    "partition_by_hamming",
    "project_diagonalize",
    "readout_mitigation",
    "sqd_run",
    "subsample",
    "syndrome_stream_decode",
]
