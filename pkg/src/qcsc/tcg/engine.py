"""Placement planning and dataflow execution of tensor compute graphs."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from qcsc.core.topology import CouplingClass, NodeKind, ResourceNode, Topology, classify_coupling, transfer_time
from qcsc.errors import NodeFailure, PlacementInfeasible, RuntimeFailure
from qcsc.qpu.device import CircuitSpec
from qcsc.qrmi.interface import AcquisitionToken, Action, JobState, Qrmi
from qcsc.sim.kernel import Kernel, Signal
from qcsc.tcg.graph import TcgNode, TcgNodeKind, TensorComputeGraph, TensorEdge, Tier
from qcsc.tcg.ops import item_count, lookup
from qcsc.workloads.session import ClassicalCost

TWIRL_COST = ClassicalCost(base=10_000, per_unit={"items": 1_000})

_TIER_KIND = {Tier.QPU: NodeKind.QPU, Tier.SCALE_UP: NodeKind.SCALE_UP, Tier.SCALE_OUT: NodeKind.SCALE_OUT}


def twirl_expand(node: TcgNode, rng: np.random.Generator) -> list[CircuitSpec]:
    """``count`` copies of the base circuit with independently jittered parameters."""
    spec = node.twirl
    base = spec.base
    out = []
    for _ in range(spec.count):
        if spec.amplitude == 0:
            out.append(base)
            continue
        jitter = spec.amplitude * rng.uniform(-1.0, 1.0, size=len(base.theta))
        out.append(base.with_theta(np.asarray(base.theta) + jitter))
    return out


# -- placement ----------------------------------------------------------------------
def _requirement(edge: TensorEdge, requirements: Mapping[Any, CouplingClass] | None) -> CouplingClass | None:
    if requirements:
        for key in (edge.label, (edge.src, edge.dst)):
            if key in requirements:
                return requirements[key]
    return edge.requirement


def _candidates(node: TcgNode, topology: Topology, allowed: set[str] | None) -> list[ResourceNode]:
    if node.kind is TcgNodeKind.QUANTUM_CIRCUIT:
        pool = [q for q in topology.qpus if q.qpu_qubits >= node.circuit.num_qubits]
    elif node.hint is not None:
        pool = [n for n in topology.nodes if n.kind is _TIER_KIND[node.hint]]
    else:
        pool = [n for n in topology.nodes if n.kind is NodeKind.SCALE_OUT]
        pool += [n for n in topology.nodes if n.kind is NodeKind.SCALE_UP]
    if allowed is not None:
        pool = [n for n in pool if n.id in allowed]
    return pool


def _coupling(topology: Topology, cache: dict, a: str, b: str) -> CouplingClass | None:
    key = (a, b)
    if key not in cache:
        try:
            cache[key] = classify_coupling(topology, a, b)
        except Exception:  # noqa: BLE001 - unreachable pair
            cache[key] = None
    return cache[key]


def plan_placement(
    graph: TensorComputeGraph,
    topology: Topology,
    requirements: Mapping[Any, CouplingClass] | None = None,
    allowed: set[str] | None = None,
) -> dict[str, str]:
    """Map every node to a resource so each edge meets its coupling requirement.

    Quantum circuits go to QPUs; hints are hard tier constraints; classical
    nodes otherwise prefer ScaleOut, then ScaleUp.  Search is backtracking in
    lexicographic topological order.
    """
    graph.check()
    order = graph.topological_order()
    nodes = graph.by_id
    cands = {nid: [n.id for n in _candidates(nodes[nid], topology, allowed)] for nid in order}
    for nid in order:
        if not cands[nid]:
            raise PlacementInfeasible(f"no resource can host node {nid!r}")
    cache: dict = {}
    constrained = [(e, r) for e in graph.edges if (r := _requirement(e, requirements)) is not None]

    def ok(e: TensorEdge, req: CouplingClass, a: str, b: str) -> bool:
        got = _coupling(topology, cache, a, b)
        return got is not None and got.meets(req)

    for e, req in constrained:
        if not any(ok(e, req, a, b) for a in cands[e.src] for b in cands[e.dst]):
            raise PlacementInfeasible(f"edge {e.label} needs {req}; no candidate pair provides it", edge=e)

    by_node: dict[str, list[tuple[TensorEdge, CouplingClass]]] = {nid: [] for nid in order}
    for e, req in constrained:
        later = max(e.src, e.dst, key=order.index)
        by_node[later].append((e, req))
    assign: dict[str, str] = {}
    worst: list[Any] = [None, -1]

    def search(i: int) -> bool:
        if i == len(order):
            return True
        nid = order[i]
        for res in cands[nid]:
            assign[nid] = res
            failed = next((e for e, req in by_node[nid] if not ok(e, req, assign[e.src], assign[e.dst])), None)
            if failed is None:
                if search(i + 1):
                    return True
            elif i > worst[1]:
                worst[0], worst[1] = failed, i
            del assign[nid]
        return False

    if not search(0):
        e = worst[0]
        raise PlacementInfeasible(f"edge {e.label} cannot meet its coupling requirement together with the rest", edge=e)
    return {nid: assign[nid] for nid in sorted(assign)}


def placement_violations(
    graph: TensorComputeGraph, placement: Mapping[str, str], topology: Topology, requirements=None
) -> list[str]:
    """Re-check a placement edge by edge; empty means sound."""
    bad = []
    nodes = graph.by_id
    for nid, res in placement.items():
        if (nodes[nid].kind is TcgNodeKind.QUANTUM_CIRCUIT) != topology.node(res).is_qpu:
            bad.append(f"{nid} on {res}")
    for e in graph.edges:
        req = _requirement(e, requirements)
        if req is not None and not classify_coupling(topology, placement[e.src], placement[e.dst]).meets(req):
            bad.append(e.label)
    return bad


# -- execution -------------------------------------------------------------------------
@dataclass
class NodeRecord:
    node_id: str
    resource: str
    ready: int
    start: int
    end: int

    @property
    def duration(self) -> int:
        return self.end - self.start

    def to_dict(self) -> dict:
        return {"node": self.node_id, "resource": self.resource, "ready": self.ready, "start": self.start, "end": self.end}


@dataclass
class ExecutionResult:
    outputs: dict[str, dict[str, Any]]
    records: dict[str, NodeRecord]
    start: int
    end: int
    qpu_jobs: list[str] = field(default_factory=list)

    @property
    def makespan(self) -> int:
        return self.end - self.start

    def to_dict(self) -> dict:
        return {
            "start": self.start,
            "end": self.end,
            "makespan": self.makespan,
            "qpu_jobs": list(self.qpu_jobs),
            "records": [self.records[k].to_dict() for k in sorted(self.records)],
        }


class _ResourceLock:
    """One node at a time per resource; simultaneous requests are granted by node id."""

    def __init__(self, kernel: Kernel, name: str):
        self.kernel = kernel
        self.name = name
        self.busy = False
        self._waiting: list[tuple[str, int, Signal]] = []
        self._grant_pending = False
        self._n = 0

    def acquire(self, node_id: str) -> Signal:
        sig = self.kernel.signal(f"res:{self.name}:{node_id}")
        self._n += 1
        heapq.heappush(self._waiting, (node_id, self._n, sig))
        self._schedule()
        return sig

    def release(self) -> None:
        self.busy = False
        self._schedule()

    def _schedule(self) -> None:
        if self.busy or self._grant_pending or not self._waiting:
            return
        self._grant_pending = True
        self.kernel.timeout(0, name=f"grant:{self.name}").on_fire(self._grant)

    def _grant(self, _sig: Signal) -> None:
        self._grant_pending = False
        if self.busy or not self._waiting:
            return
        self.busy = True
        heapq.heappop(self._waiting)[2].succeed()


def execute(
    graph: TensorComputeGraph,
    placement: Mapping[str, str],
    kernel: Kernel,
    qrmi: Qrmi,
    tokens: Mapping[str, AcquisitionToken] | None = None,
    rng: np.random.Generator | None = None,
    lease: int = 10**15,
):
    """Kernel process running every node once its inputs have arrived.

    Returns an :class:`ExecutionResult` with the outputs of sink nodes.
    QPUs without a supplied token are acquired for the run and released after.
    """
    graph.check()
    rng = rng if rng is not None else kernel.rng(f"tcg:{graph.name}")
    nodes = graph.by_id
    tokens = dict(tokens or {})
    owned = []
    for nid in sorted(nodes):
        res = placement[nid]
        if nodes[nid].kind is TcgNodeKind.QUANTUM_CIRCUIT and res not in tokens:
            tokens[res] = qrmi.acquire(res, f"tcg:{graph.name}", lease)
            owned.append(tokens[res])
    locks = {res: _ResourceLock(kernel, res) for res in sorted(set(placement.values()))}
    arrivals = {e: kernel.signal(f"edge:{e.label}") for e in graph.edges}
    records: dict[str, NodeRecord] = {}
    qpu_jobs: list[str] = []
    start = kernel.now

    def run_quantum(node: TcgNode, inputs: dict, res: str):
        circuits = [node.circuit] if "params" not in inputs else [node.circuit.with_theta(t) for t in inputs["params"]]
        results = []
        for circuit in circuits:
            handle = qrmi.submit_job(tokens[res], circuit)
            qpu_jobs.append(handle.job_id)
            yield qrmi.wait(handle)
            state = qrmi.job_lifecycle(handle, Action.STATUS)
            if state is not JobState.DONE:
                raise RuntimeFailure(f"quantum job {handle.job_id} for node {node.id} ended {state.value}")
            results.append(qrmi.job_lifecycle(handle, Action.FETCH_RESULTS))
        return {"samples": results[0] if "params" not in inputs else results}

    def run_node(node: TcgNode):
        incoming = sorted(graph.incoming(node.id), key=lambda e: e.label)
        values = yield kernel.all_of([arrivals[e] for e in incoming], name=f"inputs:{node.id}")
        inputs = {e.dst_port: v for e, v in zip(incoming, values)}
        res = placement[node.id]
        ready = kernel.now
        lock = locks[res]
        yield lock.acquire(node.id)
        began = kernel.now
        try:
            if node.kind is TcgNodeKind.QUANTUM_CIRCUIT:
                outputs = yield from run_quantum(node, inputs, res)
            elif node.kind is TcgNodeKind.TWIRL:
                specs = twirl_expand(node, rng)
                outputs = {"params": [c.theta for c in specs]}
                yield kernel.timeout(TWIRL_COST.duration(items=len(specs)), name=f"node:{node.id}")
            else:
                fn = lookup(node.op.function)
                try:
                    outputs = dict(fn(inputs, node.op.params, rng))
                except Exception as exc:  # noqa: BLE001 - wrapped with the node id
                    raise NodeFailure(node.id, exc) from exc
                amounts = {"bytes": sum(e.size for e in incoming), "items": sum(item_count(v) for v in values)}
                yield kernel.timeout(node.op.cost.duration(**amounts), name=f"node:{node.id}")
        finally:
            lock.release()
        records[node.id] = NodeRecord(node.id, res, ready, began, kernel.now)
        for e in sorted(graph.outgoing(node.id), key=lambda e: e.label):
            sent = kernel.send(res, placement[e.dst], e.size, value=outputs[e.src_port])
            sent.on_fire(lambda s, e=e: arrivals[e].succeed(s.value))
        return outputs

    procs = {nid: kernel.spawn(f"tcg:{graph.name}:{nid}", run_node(nodes[nid])) for nid in sorted(nodes)}
    try:
        yield kernel.all_of(list(procs.values()), name=f"tcg:{graph.name}")
    finally:
        for tok in owned:
            if tok.live(kernel.now):
                qrmi.release(tok)
    end = max((r.end for r in records.values()), default=start)
    outputs = {nid: procs[nid].value for nid in graph.sinks()}
    return ExecutionResult(outputs, records, start, end, qpu_jobs)


def critical_path(
    graph: TensorComputeGraph, placement: Mapping[str, str], topology: Topology, durations: Mapping[str, int]
) -> int:
    """Longest source-to-sink path counting node durations and edge transfer times."""
    finish: dict[str, int] = {}
    for nid in graph.topological_order():
        t = 0
        for e in graph.incoming(nid):
            t = max(t, finish[e.src] + transfer_time(topology, placement[e.src], placement[e.dst], e.size))
        finish[nid] = t + durations[nid]
    return max(finish.values(), default=0)
