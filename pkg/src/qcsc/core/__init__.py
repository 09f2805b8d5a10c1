from qcsc.core.topology import (
    LOOSEST,
    CouplingClass,
    CouplingThresholds,
    Link,
    NodeKind,
    ResourceNode,
    Route,
    Spatial,
    Temporal,
    Topology,
    build_topology,
    classify_coupling,
    classify_latency,
    path_latency,
    transfer_time,
)

__all__ = [
    "LOOSEST",
    "CouplingClass",
    "CouplingThresholds",
    "Link",
    "NodeKind",
    "ResourceNode",
    "Route",
    "Spatial",
    "Temporal",
    "Topology",
    "build_topology",
    "classify_coupling",
    "classify_latency",
    "path_latency",
    "transfer_time",
]
