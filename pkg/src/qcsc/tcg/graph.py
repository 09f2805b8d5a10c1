"""Tensor compute graphs: typed nodes and edges, validation, JSON form."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Mapping

import networkx as nx

from qcsc.core.topology import CouplingClass
from qcsc.errors import GraphInvalid
from qcsc.qpu.device import CircuitKind, CircuitSpec
from qcsc.units import parse_duration
from qcsc.workloads.session import ClassicalCost


class TcgNodeKind(str, enum.Enum):
    QUANTUM_CIRCUIT = "QuantumCircuit"
    TWIRL = "Twirl"
    CLASSICAL_OP = "ClassicalOp"


class PortKind(str, enum.Enum):
    BITSTRING_TABLE = "BitstringTable"
    REAL_TENSOR = "RealTensor"
    PARAM_VECTOR = "ParamVector"


class Tier(str, enum.Enum):
    QPU = "QPU"
    SCALE_UP = "ScaleUp"
    SCALE_OUT = "ScaleOut"


@dataclass(frozen=True)
class TwirlSpec:
    base: CircuitSpec
    count: int
    amplitude: float = 0.0

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("twirl count must be non-negative")
        if self.base.kind is not CircuitKind.PARAMETERIZED:
            raise ValueError("twirling randomizes parameters; the base circuit must be a ParameterizedSampler")


@dataclass(frozen=True)
class ClassicalBinding:
    function: str
    cost: ClassicalCost = ClassicalCost()
    params: Mapping[str, Any] = field(default_factory=dict)


@dataclass
class TcgNode:
    id: str
    kind: TcgNodeKind
    inputs: dict[str, PortKind] = field(default_factory=dict)
    outputs: dict[str, PortKind] = field(default_factory=dict)
    circuit: CircuitSpec | None = None
    twirl: TwirlSpec | None = None
    op: ClassicalBinding | None = None
    hint: Tier | None = None
    optional_inputs: frozenset[str] = frozenset()

    @classmethod
    def quantum(cls, node_id: str, circuit: CircuitSpec, hint: Tier | None = None) -> "TcgNode":
        """Samples ``circuit``; an optional ``params`` input runs it once per parameter vector."""
        return cls(
            node_id,
            TcgNodeKind.QUANTUM_CIRCUIT,
            inputs={"params": PortKind.PARAM_VECTOR},
            outputs={"samples": PortKind.BITSTRING_TABLE},
            circuit=circuit,
            hint=hint,
            optional_inputs=frozenset({"params"}),
        )

    @classmethod
    def twirl_node(cls, node_id: str, twirl: TwirlSpec, hint: Tier | None = None) -> "TcgNode":
        return cls(node_id, TcgNodeKind.TWIRL, outputs={"params": PortKind.PARAM_VECTOR}, twirl=twirl, hint=hint)

    @classmethod
    def classical(
        cls,
        node_id: str,
        function: str,
        inputs: Mapping[str, PortKind],
        outputs: Mapping[str, PortKind],
        cost: ClassicalCost = ClassicalCost(),
        params: Mapping[str, Any] | None = None,
        hint: Tier | None = None,
    ) -> "TcgNode":
        return cls(
            node_id,
            TcgNodeKind.CLASSICAL_OP,
            inputs=dict(inputs),
            outputs=dict(outputs),
            op=ClassicalBinding(function, cost, dict(params or {})),
            hint=hint,
        )


@dataclass(frozen=True)
class TensorEdge:
    src: str
    src_port: str
    dst: str
    dst_port: str
    kind: PortKind
    size: int
    requirement: CouplingClass | None = None

    @property
    def label(self) -> str:
        return f"{self.src}.{self.src_port}->{self.dst}.{self.dst_port}"


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "message": self.message}

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


@dataclass
class TensorComputeGraph:
    nodes: list[TcgNode]
    edges: list[TensorEdge]
    name: str = "tcg"
    owner: str | None = None

    def node(self, node_id: str) -> TcgNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def by_id(self) -> dict[str, TcgNode]:
        return {n.id: n for n in self.nodes}

    def incoming(self, node_id: str) -> list[TensorEdge]:
        return [e for e in self.edges if e.dst == node_id]

    def outgoing(self, node_id: str) -> list[TensorEdge]:
        return [e for e in self.edges if e.src == node_id]

    def digraph(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        g.add_nodes_from(sorted(self.by_id))
        g.add_edges_from((e.src, e.dst) for e in self.edges)
        return g

    def topological_order(self) -> list[str]:
        return list(nx.lexicographical_topological_sort(self.digraph()))

    def sinks(self) -> list[str]:
        srcs = {e.src for e in self.edges}
        return sorted(n.id for n in self.nodes if n.id not in srcs)

    def validate(self) -> list[Diagnostic]:
        """Every structural problem in the graph (empty list means valid)."""
        out: list[Diagnostic] = []
        ids = [n.id for n in self.nodes]
        for dup in sorted({i for i in ids if ids.count(i) > 1}):
            out.append(Diagnostic("DuplicateNode", f"node id {dup!r} appears more than once"))
        nodes = self.by_id
        producers: dict[tuple[str, str], list[TensorEdge]] = {}
        for e in self.edges:
            if e.src not in nodes or e.dst not in nodes:
                missing = e.src if e.src not in nodes else e.dst
                out.append(Diagnostic("UnknownNode", f"edge {e.label} references unknown node {missing!r}"))
                continue
            src_kind = nodes[e.src].outputs.get(e.src_port)
            dst_kind = nodes[e.dst].inputs.get(e.dst_port)
            if src_kind is None:
                out.append(Diagnostic("UnknownPort", f"{e.src} has no output port {e.src_port!r}"))
            if dst_kind is None:
                out.append(Diagnostic("UnknownPort", f"{e.dst} has no input port {e.dst_port!r}"))
            for have, side in ((src_kind, "producer"), (dst_kind, "consumer")):
                if have is not None and have is not e.kind:
                    out.append(Diagnostic("PortKindMismatch", f"edge {e.label} carries {e.kind.value} but the {side} port is {have.value}"))
            if e.size <= 0:
                out.append(Diagnostic("InvalidSize", f"edge {e.label} has non-positive size {e.size}"))
            producers.setdefault((e.dst, e.dst_port), []).append(e)
        for (dst, port), es in sorted(producers.items()):
            if len(es) > 1:
                out.append(Diagnostic("MultipleProducers", f"{dst}.{port} has {len(es)} incoming edges"))
        for n in self.nodes:
            for port in sorted(n.inputs):
                if port not in n.optional_inputs and (n.id, port) not in producers:
                    out.append(Diagnostic("MissingInput", f"{n.id}.{port} has no producer"))
            if n.kind is TcgNodeKind.QUANTUM_CIRCUIT and n.circuit is None:
                out.append(Diagnostic("MissingBinding", f"{n.id} has no circuit"))
            if n.kind is TcgNodeKind.TWIRL and n.twirl is None:
                out.append(Diagnostic("MissingBinding", f"{n.id} has no twirl spec"))
            if n.kind is TcgNodeKind.CLASSICAL_OP and n.op is None:
                out.append(Diagnostic("MissingBinding", f"{n.id} has no classical function"))
            if n.kind is TcgNodeKind.QUANTUM_CIRCUIT and n.hint not in (None, Tier.QPU):
                out.append(Diagnostic("InvalidHint", f"{n.id} is a quantum circuit and can only run on a QPU"))
            if n.kind is not TcgNodeKind.QUANTUM_CIRCUIT and n.hint is Tier.QPU:
                out.append(Diagnostic("InvalidHint", f"{n.id} is classical and cannot run on a QPU"))
        g = nx.MultiDiGraph()
        g.add_nodes_from(sorted(nodes))
        g.add_edges_from((e.src, e.dst) for e in self.edges if e.src in nodes and e.dst in nodes)
        for cycle in sorted(sorted(c) for c in nx.simple_cycles(g)):
            out.append(Diagnostic("CycleDetected", "cycle through " + " -> ".join(cycle)))
        return out

    def check(self) -> None:
        diags = self.validate()
        if diags:
            raise GraphInvalid(diags)

    # -- JSON ---------------------------------------------------------------
    def to_dict(self) -> dict:
        return {"name": self.name, "owner": self.owner, "nodes": [_node_to_dict(n) for n in self.nodes], "edges": [_edge_to_dict(e) for e in self.edges]}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TensorComputeGraph":
        return cls(
            [_node_from_dict(n) for n in d.get("nodes", [])],
            [_edge_from_dict(e) for e in d.get("edges", [])],
            d.get("name", "tcg"),
            d.get("owner"),
        )


def _cost_to_dict(c: ClassicalCost) -> dict:
    return {"base": f"{c.base}ns", "per_unit": {k: f"{v}ns" for k, v in sorted(c.per_unit.items())}}


def _node_to_dict(n: TcgNode) -> dict:
    d: dict[str, Any] = {
        "id": n.id,
        "kind": n.kind.value,
        "inputs": {k: v.value for k, v in n.inputs.items()},
        "outputs": {k: v.value for k, v in n.outputs.items()},
        "hint": n.hint.value if n.hint else None,
    }
    if n.optional_inputs:
        d["optional_inputs"] = sorted(n.optional_inputs)
    if n.circuit is not None:
        d["circuit"] = n.circuit.to_dict()
    if n.twirl is not None:
        d["twirl"] = {"base": n.twirl.base.to_dict(), "count": n.twirl.count, "amplitude": n.twirl.amplitude}
    if n.op is not None:
        d["op"] = {"function": n.op.function, "params": dict(n.op.params), "cost": _cost_to_dict(n.op.cost)}
    return d


def _node_from_dict(d: Mapping[str, Any]) -> TcgNode:
    kind = TcgNodeKind(d["kind"])
    hint = Tier(d["hint"]) if d.get("hint") else None
    circuit = CircuitSpec.from_dict(d["circuit"]) if d.get("circuit") else None
    twirl = None
    if d.get("twirl"):
        t = d["twirl"]
        twirl = TwirlSpec(CircuitSpec.from_dict(t["base"]), int(t["count"]), float(t.get("amplitude", 0.0)))
    op = None
    if d.get("op"):
        o = d["op"]
        cost = o.get("cost") or {}
        op = ClassicalBinding(
            o["function"],
            ClassicalCost(
                parse_duration(cost.get("base", "1ms")),
                {k: parse_duration(v) for k, v in cost.get("per_unit", {}).items()},
            ),
            dict(o.get("params", {})),
        )
    if kind is TcgNodeKind.QUANTUM_CIRCUIT and "inputs" not in d:
        return TcgNode.quantum(d["id"], circuit, hint)
    if kind is TcgNodeKind.TWIRL and "outputs" not in d:
        return TcgNode.twirl_node(d["id"], twirl, hint)
    return TcgNode(
        d["id"],
        kind,
        inputs={k: PortKind(v) for k, v in d.get("inputs", {}).items()},
        outputs={k: PortKind(v) for k, v in d.get("outputs", {}).items()},
        circuit=circuit,
        twirl=twirl,
        op=op,
        hint=hint,
        optional_inputs=frozenset(d.get("optional_inputs", ["params"] if kind is TcgNodeKind.QUANTUM_CIRCUIT else [])),
    )


def _edge_to_dict(e: TensorEdge) -> dict:
    d = {"from": [e.src, e.src_port], "to": [e.dst, e.dst_port], "kind": e.kind.value, "size": e.size}
    if e.requirement is not None:
        d["requirement"] = e.requirement.to_dict()
    return d


def _edge_from_dict(d: Mapping[str, Any]) -> TensorEdge:
    return TensorEdge(
        d["from"][0],
        d["from"][1],
        d["to"][0],
        d["to"][1],
        PortKind(d["kind"]),
        int(d["size"]),
        CouplingClass.from_dict(d["requirement"]) if d.get("requirement") else None,
    )
