"""Compute fabric: resource nodes, links, and the coupling taxonomy."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping

import networkx as nx

from qcsc.errors import DanglingLink, DuplicateId, IsolatedQpu, NoPath, TopologyError
from qcsc.units import MS, S, US, parse_duration, transfer_ns


class NodeKind(str, enum.Enum):
    QPU = "QPU"
    SCALE_UP = "ScaleUpNode"
    SCALE_OUT = "ScaleOutNode"


class Temporal(str, enum.Enum):
    REAL_TIME = "RealTime"
    NEAR_TIME = "NearTime"
    BATCH_TIME = "BatchTime"

    @property
    def rank(self) -> int:
        return {"RealTime": 2, "NearTime": 1, "BatchTime": 0}[self.value]


class Spatial(str, enum.Enum):
    TIGHT = "Tight"
    LOOSE = "Loose"

    @property
    def rank(self) -> int:
        return 1 if self is Spatial.TIGHT else 0


@dataclass(frozen=True)
class CouplingClass:
    temporal: Temporal
    spatial: Spatial

    def meets(self, minimum: "CouplingClass") -> bool:
        """True when this coupling is at least as strong as ``minimum`` on both axes."""
        return self.temporal.rank >= minimum.temporal.rank and self.spatial.rank >= minimum.spatial.rank

    def to_dict(self) -> dict[str, str]:
        return {"temporal": self.temporal.value, "spatial": self.spatial.value}

    @classmethod
    def from_dict(cls, d: Mapping[str, str]) -> "CouplingClass":
        return cls(Temporal(d.get("temporal", "BatchTime")), Spatial(d.get("spatial", "Loose")))

    def __str__(self) -> str:
        return f"({self.temporal.value}, {self.spatial.value})"


LOOSEST = CouplingClass(Temporal.BATCH_TIME, Spatial.LOOSE)


@dataclass(frozen=True)
class CouplingThresholds:
    """Latency cutoffs (ns) for the temporal bands and for spatial tightness."""

    real_time: int = 10 * US
    near_time: int = 1 * S
    tight: int = 1 * MS

    @classmethod
    def from_dict(cls, d: Mapping[str, Any] | None) -> "CouplingThresholds":
        if not d:
            return cls()
        base = cls()
        return cls(
            real_time=parse_duration(d.get("real_time", base.real_time / S)),
            near_time=parse_duration(d.get("near_time", base.near_time / S)),
            tight=parse_duration(d.get("tight", base.tight / S)),
        )


@dataclass(frozen=True)
class ResourceNode:
    id: str
    kind: NodeKind
    cpu_cores: int = 0
    gpu_units: int = 0
    qpu_qubits: int = 0
    residency_zone: str = "default"
    service_overhead: int = 0

    def __post_init__(self):
        if self.kind is NodeKind.QPU:
            if self.qpu_qubits <= 0:
                raise TopologyError(f"QPU {self.id!r} needs qpu_qubits > 0")
        else:
            if self.qpu_qubits != 0:
                raise TopologyError(f"classical node {self.id!r} cannot have qubits")
            if self.cpu_cores + self.gpu_units <= 0:
                raise TopologyError(f"classical node {self.id!r} needs cores or gpus")
        if min(self.cpu_cores, self.gpu_units, self.service_overhead) < 0:
            raise TopologyError(f"negative capacity on {self.id!r}")

    @property
    def is_qpu(self) -> bool:
        return self.kind is NodeKind.QPU


@dataclass(frozen=True)
class Link:
    a: str
    b: str
    latency: int
    bandwidth: float

    def __post_init__(self):
        if self.a == self.b:
            raise TopologyError(f"link endpoints must differ ({self.a!r})")
        if self.latency <= 0 or self.bandwidth <= 0:
            raise TopologyError(f"link {self.a}-{self.b} needs positive latency and bandwidth")

    @property
    def endpoints(self) -> tuple[str, str]:
        return (self.a, self.b)


@dataclass(frozen=True)
class Route:
    path: tuple[str, ...]
    latency: int
    bandwidth: float  # bottleneck along the path


@dataclass(frozen=True, eq=False)
class Topology:
    nodes: tuple[ResourceNode, ...]
    links: tuple[Link, ...]
    thresholds: CouplingThresholds = field(default_factory=CouplingThresholds)

    @cached_property
    def by_id(self) -> dict[str, ResourceNode]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def _graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(n.id for n in self.nodes)
        for link in self.links:
            if g.has_edge(link.a, link.b):
                cur = g.edges[link.a, link.b]
                if (link.latency, -link.bandwidth) >= (cur["latency"], -cur["bandwidth"]):
                    continue
            g.add_edge(link.a, link.b, latency=link.latency, bandwidth=link.bandwidth)
        return g

    def node(self, node_id: str) -> ResourceNode:
        try:
            return self.by_id[node_id]
        except KeyError:
            raise TopologyError(f"unknown node {node_id!r}") from None

    @property
    def qpus(self) -> list[ResourceNode]:
        return [n for n in self.nodes if n.is_qpu]

    @property
    def classical(self) -> list[ResourceNode]:
        return [n for n in self.nodes if not n.is_qpu]

    def route(self, a: str, b: str) -> Route:
        routes = self._routes(a)
        if b not in routes:
            self.node(b)
            raise NoPath(f"no path between {a!r} and {b!r}")
        return routes[b]

    def _routes(self, a: str) -> dict[str, Route]:
        cache = self.__dict__.setdefault("_route_cache", {})
        if a not in cache:
            self.node(a)
            dist, paths = nx.single_source_dijkstra(self._graph, a, weight="latency")
            routes = {}
            for dst, path in paths.items():
                bw = min(
                    (self._graph.edges[u, v]["bandwidth"] for u, v in zip(path, path[1:])),
                    default=float("inf"),
                )
                routes[dst] = Route(tuple(path), int(dist[dst]), bw)
            cache[a] = routes
        return cache[a]

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": [
                {
                    "id": n.id,
                    "kind": n.kind.value,
                    "cpu_cores": n.cpu_cores,
                    "gpu_units": n.gpu_units,
                    "qpu_qubits": n.qpu_qubits,
                    "residency_zone": n.residency_zone,
                    "service_overhead": f"{n.service_overhead}ns",
                }
                for n in self.nodes
            ],
            "links": [
                {"endpoints": [l.a, l.b], "latency": f"{l.latency}ns", "bandwidth": l.bandwidth}
                for l in self.links
            ],
        }


def build_topology(config: Mapping[str, Any], thresholds: CouplingThresholds | None = None) -> Topology:
    """Validate a topology fragment (``{"nodes": [...], "links": [...]}``)."""
    nodes: list[ResourceNode] = []
    seen: set[str] = set()
    for raw in config.get("nodes", []):
        node_id = raw["id"]
        if node_id in seen:
            raise DuplicateId(f"duplicate node id {node_id!r}")
        seen.add(node_id)
        nodes.append(
            ResourceNode(
                id=node_id,
                kind=NodeKind(raw["kind"]),
                cpu_cores=int(raw.get("cpu_cores", 0)),
                gpu_units=int(raw.get("gpu_units", 0)),
                qpu_qubits=int(raw.get("qpu_qubits", 0)),
                residency_zone=raw.get("residency_zone", "default"),
                service_overhead=parse_duration(raw.get("service_overhead", 0)),
            )
        )
    links: list[Link] = []
    for raw in config.get("links", []):
        a, b = raw["endpoints"]
        for end in (a, b):
            if end not in seen:
                raise DanglingLink(f"link {a}-{b} references unknown node {end!r}")
        links.append(Link(a, b, parse_duration(raw["latency"]), float(raw["bandwidth"])))
    linked = {end for l in links for end in l.endpoints}
    for n in nodes:
        if n.is_qpu and n.id not in linked:
            raise IsolatedQpu(f"QPU {n.id!r} has no links")
    if thresholds is None:
        thresholds = CouplingThresholds.from_dict(config.get("thresholds"))
    return Topology(tuple(nodes), tuple(links), thresholds)


def path_latency(topology: Topology, a: str, b: str) -> int:
    """Minimum one-way latency (ns) over all paths from ``a`` to ``b``."""
    return topology.route(a, b).latency


def transfer_time(topology: Topology, a: str, b: str, size: int) -> int:
    """Latency plus serialization over the min-latency path's bottleneck link."""
    if a == b:
        return 0
    route = topology.route(a, b)
    return route.latency + transfer_ns(size, route.bandwidth)


def classify_latency(latency: int, thresholds: CouplingThresholds) -> Temporal:
    if latency < thresholds.real_time:
        return Temporal.REAL_TIME
    if latency < thresholds.near_time:
        return Temporal.NEAR_TIME
    return Temporal.BATCH_TIME


def classify_coupling(topology: Topology, a: str, b: str) -> CouplingClass:
    latency = path_latency(topology, a, b)
    th = topology.thresholds
    same_zone = topology.node(a).residency_zone == topology.node(b).residency_zone
    spatial = Spatial.TIGHT if same_zone and latency < th.tight else Spatial.LOOSE
    return CouplingClass(classify_latency(latency, th), spatial)

