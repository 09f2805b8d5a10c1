from qcsc.scheduler.core import (
    Allocation,
    ClassicalDemand,
    Job,
    JobContext,
    JobKind,
    JobSpec,
    JobState,
    NodeShare,
    PassAudit,
    PlacementCheck,
    Scheduler,
    SchedulerPolicy,
    placement_check,
    synthetic_payload,
)

__all__ = [
    "Allocation",
    "ClassicalDemand",
    "Job",
    "JobContext",
    "JobKind",
    "JobSpec",
    "JobState",
    "NodeShare",
    "PassAudit",
    "PlacementCheck",
    "Scheduler",
    "SchedulerPolicy",
    "placement_check",
    "synthetic_payload",
]
