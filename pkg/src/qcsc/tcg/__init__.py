from qcsc.tcg.engine import (
    ExecutionResult,
    NodeRecord,
    critical_path,
    execute,
    placement_violations,
    plan_placement,
    twirl_expand,
)
from qcsc.tcg.graph import (
    ClassicalBinding,
    Diagnostic,
    PortKind,
    TcgNode,
    TcgNodeKind,
    TensorComputeGraph,
    TensorEdge,
    Tier,
    TwirlSpec,
)
from qcsc.tcg.ops import REGISTRY, register

__all__ = [
    "REGISTRY",
    "ClassicalBinding",
    "Diagnostic",
    "ExecutionResult",
    "NodeRecord",
    "PortKind",
    "TcgNode",
    "TcgNodeKind",
    "TensorComputeGraph",
    "TensorEdge",
    "Tier",
    "TwirlSpec",
    "critical_path",
    "execute",
    "placement_violations",
    "plan_placement",
    "register",
    "twirl_expand",
]
