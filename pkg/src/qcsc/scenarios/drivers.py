"""Workload drivers: how each named workload becomes scheduler jobs.

A driver checks its parameters, lists the job specs it will submit (for
static placement checks without simulating), and provides the kernel
process that submits those jobs and returns a JSON-ready trace.
"""
from __future__ import annotations

import math
from typing import TYPE_CHECKING, Any, Mapping

import numpy as np

from qcsc.core.topology import LOOSEST, CouplingClass, Spatial, Temporal, transfer_time
from qcsc.errors import InvalidSpec, PlacementInfeasible, QcscError, RuntimeFailure
from qcsc.qpu.device import CircuitKind, CircuitSpec, SampleSet, SyndromeSpec, ideal_distribution
from qcsc.qpu.model import ToyModel, solve_sector, to_bitstring
from qcsc.scheduler.core import JobKind, JobSpec, JobState, synthetic_payload
from qcsc.tcg.engine import TWIRL_COST, execute, plan_placement
from qcsc.tcg.graph import (
    Diagnostic,
    PortKind,
    TcgNode,
    TcgNodeKind,
    TensorComputeGraph,
    TensorEdge,
    TwirlSpec,
)
from qcsc.units import parse_duration
from qcsc.workloads.closed_loop import InnerSqd, StepSchedule, closed_loop_sqd
from qcsc.workloads.mitigation import expectation_z
from qcsc.workloads.qec import (
    DEFAULT_DECODE_COST,
    NEAR_TIME_TIGHT,
    batch_bytes,
    logical_error_closed_form,
    outer_decoder_loop,
    outer_decoder_process,
    syndrome_stream_decode,
)
from qcsc.workloads.session import BatchSession, ClassicalCost
from qcsc.workloads.sqd import DEFAULT_SQD_COST, sqd_run

if TYPE_CHECKING:
    from qcsc.scenarios.loader import WorkloadEntry
    from qcsc.scenarios.runner import Simulation

# Auto-derived runtime estimates are the modeled duration times this margin.
ESTIMATE_MARGIN = 1.25
BATCH_TIGHT = CouplingClass(Temporal.BATCH_TIME, Spatial.TIGHT)


def coupling_from(d: Mapping[str, str] | None, default: CouplingClass) -> CouplingClass:
    return CouplingClass.from_dict(d) if d else default


def estimate(entry: "WorkloadEntry", modeled: int) -> int:
    """The scenario's estimate if given, else the modeled duration with a safety margin."""
    if "estimated_runtime" in entry.job:
        return parse_duration(entry.job["estimated_runtime"])
    return max(1, math.ceil(modeled * ESTIMATE_MARGIN))


def wait_job(sim: "Simulation", spec: JobSpec):
    """Submit ``spec`` and return its result; anything but Done raises."""
    sim.scheduler.submit(spec)
    job = sim.scheduler.job(spec.job_id)
    yield job.finished
    if job.state is not JobState.DONE:
        why = f": {getattr(job.error, 'kind', type(job.error).__name__)}: {job.error}" if job.error else ""
        if isinstance(job.error, QcscError):
            raise job.error
        raise RuntimeFailure(f"job {spec.job_id} ended {job.state.value}{why}")
    return job.result


def jsonable(value: Any) -> Any:
    if isinstance(value, SampleSet):
        return {"shots": value.shots, "distinct": len(set(value.bitstrings)), "batches": len(value.batches)}
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return value


class Driver:
    name = ""
    modes: tuple[str, ...] = ("batch",)
    embeddings: tuple[str, ...] = ("driver",)
    coupling = LOOSEST

    def mode(self, entry: "WorkloadEntry") -> str:
        return entry.mode or self.modes[0]

    def embedding(self, entry: "WorkloadEntry") -> str:
        return entry.embedding or self.embeddings[0]

    def requirement(self, entry: "WorkloadEntry") -> CouplingClass:
        return coupling_from(entry.job.get("coupling"), self.coupling)

    def check(self, entry: "WorkloadEntry") -> list[Diagnostic]:
        out = []
        if self.mode(entry) not in self.modes:
            out.append(Diagnostic("InvalidMode", f"{entry.id}: {self.name} supports modes {list(self.modes)}, not {entry.mode!r}"))
        if self.embedding(entry) not in self.embeddings:
            out.append(
                Diagnostic("InvalidEmbedding", f"{entry.id}: {self.name} supports embeddings {list(self.embeddings)}, not {entry.embedding!r}")
            )
        try:
            self.build(entry)
        except (KeyError, TypeError, ValueError, QcscError) as exc:
            msg = f"missing parameter {exc}" if isinstance(exc, KeyError) else str(exc)
            out.append(Diagnostic("InvalidParams", f"{entry.id}: {msg}"))
        return out

    def build(self, entry: "WorkloadEntry") -> Any:
        return None

    def fields(self, entry: "WorkloadEntry", classical: bool = True, quantum: bool = True) -> dict:
        """JobSpec.make keyword arguments from the scenario's job block."""
        j = entry.job
        out: dict[str, Any] = {"priority": int(j.get("priority", 0)), "residency": j.get("residency"), "workload": entry.id}
        if classical:
            out.update(nodes=int(j.get("nodes", 1)), cores=int(j.get("cores", 1)), gpus=int(j.get("gpus", 0)))
        if quantum:
            out.update(coupling=self.requirement(entry), qpu=j.get("qpu"))
        return out

    def specs(self, entry: "WorkloadEntry", sim: "Simulation") -> list[JobSpec]:
        raise NotImplementedError

    def static_checks(self, entry: "WorkloadEntry", sim: "Simulation") -> list[Diagnostic]:
        return []

    def process(self, entry: "WorkloadEntry", sim: "Simulation"):
        raise NotImplementedError


# -- SQD -----------------------------------------------------------------------------
class SqdDriver(Driver):
    name = "sqd"
    modes = ("batch", "coallocated")

    def build(self, entry):
        p = entry.params
        model = ToyModel.from_dict(p["model"])
        model.check_size()
        circuit = CircuitSpec(
            model.sites,
            CircuitKind.GROUND_STATE,
            int(p.get("shots", 2000)),
            two_qubit_gate_count=int(p.get("two_qubit_gate_count", 0)),
            model=model,
            circuit_id=entry.id,
        )
        kw = dict(
            shots=circuit.shots,
            m=int(p.get("m", 50)),
            max_iters=int(p.get("max_iters", 5)),
            tol=float(p.get("tol", 1e-6)),
            carryover=p.get("carryover", 1e-8),
            cost=ClassicalCost.from_dict(p.get("cost"), DEFAULT_SQD_COST),
        )
        if kw["shots"] <= 0 or kw["m"] <= 0 or kw["max_iters"] <= 0:
            raise ValueError("shots, m and max_iters must be positive")
        return model, circuit, kw

    def _classical_est(self, kw) -> int:
        return kw["cost"].duration(samples=kw["shots"], configs=kw["m"] * kw["max_iters"])

    def _jobs(self, entry, sim):
        model, circuit, kw = self.build(entry)
        origin = sim.origin(entry)
        qjob = dict(self.fields(entry, classical=False), qubits=model.sites, origin=origin)
        cjob = self.fields(entry, quantum=False)
        return model, circuit, kw, qjob, cjob

    def _hybrid(self, entry, sim, payload=None) -> JobSpec:
        model, circuit, kw = self.build(entry)
        per_iter = sim.quantum_estimate(circuit, entry) + self._classical_est(kw)
        est = estimate(entry, sim.launch_overhead(entry) + kw["max_iters"] * per_iter)
        return JobSpec.make(entry.id, JobKind.HYBRID, est, payload=payload, qubits=model.sites, **self.fields(entry))

    def specs(self, entry, sim):
        if self.mode(entry) == "coallocated":
            return [self._hybrid(entry, sim)]
        model, circuit, kw, qjob, cjob = self._jobs(entry, sim)
        q = JobSpec.make(f"{entry.id}.sample", JobKind.QUANTUM, sim.scheduler.estimate_quantum(circuit, qjob["qpu"], qjob["origin"]), **qjob)
        c = JobSpec.make(f"{entry.id}.diag", JobKind.CLASSICAL, self._classical_est(kw) + sim.launch_overhead(entry), **cjob)
        return [q, c]

    def process(self, entry, sim):
        model, circuit, kw = self.build(entry)
        rng = sim.rng(entry)
        if self.mode(entry) == "batch":
            _, _, _, qjob, cjob = self._jobs(entry, sim)
            session = BatchSession(sim.scheduler, qjob, cjob, entry.id)
            state = yield from sqd_run(model, circuit, session=session, rng=rng, label="sqd", **kw)
            phases = session.phases
        else:

            def payload(ctx):
                session = ctx.session()
                state = yield from sqd_run(model, circuit, session=session, rng=rng, label="sqd", **kw)
                return state, session.phases

            state, phases = yield from wait_job(sim, self._hybrid(entry, sim, payload))
        exact = solve_sector(model).energy
        out = state.to_dict()
        out.update(
            exact_energy=exact,
            abs_error=abs(state.energy - exact),
            variational=all(it.energy >= exact - 1e-9 for it in state.trace),
            phases=[list(p) for p in phases],
        )
        return out


# -- closed loop ---------------------------------------------------------------------
class ClosedLoopDriver(Driver):
    name = "closed_loop_sqd"
    modes = ("coallocated",)
    coupling = BATCH_TIGHT

    def build(self, entry):
        p = entry.params
        model = ToyModel.from_dict(p["model"])
        model.check_size()
        schedule = StepSchedule(
            initial=float(p.get("initial_step", math.pi / 2)),
            min_step=float(p.get("min_step", math.pi / 16)),
            max_iters=int(p.get("max_iters", 20)),
            tol=float(p.get("tol", 1e-6)),
        )
        inner = InnerSqd(
            shots=int(p.get("shots", 2000)),
            m=int(p.get("m", 50)),
            max_iters=int(p.get("inner_iters", 3)),
            tol=float(p.get("inner_tol", 1e-6)),
            two_qubit_gate_count=int(p.get("two_qubit_gate_count", 0)),
            carryover=p.get("carryover", 1e-8),
            cost=ClassicalCost.from_dict(p.get("cost"), DEFAULT_SQD_COST),
        )
        if schedule.max_iters <= 0 or inner.max_iters <= 0:
            raise ValueError("max_iters and inner_iters must be positive")
        theta0 = float(p.get("theta0", 0.0))
        CircuitSpec(model.sites, CircuitKind.PARAMETERIZED, inner.shots, inner.two_qubit_gate_count, model, (theta0,))
        return model, theta0, schedule, inner

    def _spec(self, entry, sim, payload=None) -> JobSpec:
        model, theta0, schedule, inner = self.build(entry)
        circuit = CircuitSpec(model.sites, CircuitKind.PARAMETERIZED, inner.shots, inner.two_qubit_gate_count, model, (theta0,))
        per_iter = sim.quantum_estimate(circuit, entry) + inner.cost.duration(samples=inner.shots, configs=inner.m * inner.max_iters)
        evaluations = 1 + 2 * schedule.max_iters
        est = estimate(entry, sim.launch_overhead(entry) + evaluations * inner.max_iters * per_iter)
        return JobSpec.make(entry.id, JobKind.HYBRID, est, payload=payload, qubits=model.sites, **self.fields(entry))

    def specs(self, entry, sim):
        return [self._spec(entry, sim)]

    def process(self, entry, sim):
        model, theta0, schedule, inner = self.build(entry)
        rng = sim.rng(entry)

        def payload(ctx):
            return (yield from closed_loop_sqd(model, theta0, schedule, ctx.session(), rng, inner, label="cl"))

        trace = yield from wait_job(sim, self._spec(entry, sim, payload))
        exact = solve_sector(model).energy
        out = trace.to_dict()
        out.update(
            exact_energy=exact,
            abs_error=abs(trace.energy - exact),
            phases=[list(p) for p in trace.phases],
            qpu_jobs=sum(len(e.qpu_jobs) for it in trace.iterations for e in it.trials),
        )
        return out


# -- readout mitigation (TCG embedding) -----------------------------------------------
def mitigation_graph(
    name: str, circuit: CircuitSpec, twirls: int, amplitude: float, readout_error, requirement: CouplingClass | None
) -> TensorComputeGraph:
    """twirl -> sample -> {mitigate -> expect, empirical -> raw_expect}."""
    n = circuit.num_qubits
    table = twirls * circuit.shots * (n // 8 + 1)
    dense = 8 * 2**n
    nodes = [
        TcgNode.twirl_node("twirl", TwirlSpec(circuit, twirls, amplitude)),
        TcgNode.quantum("sample", circuit),
        TcgNode.classical(
            "mitigate", "readout_mitigation", {"samples": PortKind.BITSTRING_TABLE}, {"quasi": PortKind.REAL_TENSOR},
            params={"readout_error": list(readout_error)},
        ),
        TcgNode.classical("expect", "expectation_z", {"quasi": PortKind.REAL_TENSOR}, {"values": PortKind.REAL_TENSOR}),
        TcgNode.classical("raw", "empirical_distribution", {"samples": PortKind.BITSTRING_TABLE}, {"quasi": PortKind.REAL_TENSOR}),
        TcgNode.classical("raw_expect", "expectation_z", {"quasi": PortKind.REAL_TENSOR}, {"values": PortKind.REAL_TENSOR}),
    ]
    edges = [
        TensorEdge("twirl", "params", "sample", "params", PortKind.PARAM_VECTOR, 8 * twirls * len(circuit.theta)),
        TensorEdge("sample", "samples", "mitigate", "samples", PortKind.BITSTRING_TABLE, table, requirement),
        TensorEdge("sample", "samples", "raw", "samples", PortKind.BITSTRING_TABLE, table, requirement),
        TensorEdge("mitigate", "quasi", "expect", "quasi", PortKind.REAL_TENSOR, dense),
        TensorEdge("raw", "quasi", "raw_expect", "quasi", PortKind.REAL_TENSOR, dense),
    ]
    return TensorComputeGraph(nodes, edges, name=name)


def ideal_z(circuit: CircuitSpec) -> list[float]:
    states, probs = ideal_distribution(circuit)
    dist = {to_bitstring(int(s), circuit.num_qubits): float(p) for s, p in zip(states, probs)}
    return [expectation_z(dist, i) for i in range(circuit.num_qubits)]


def tcg_estimate(graph: TensorComputeGraph, sim: "Simulation", entry: "WorkloadEntry") -> int:
    """Serial upper bound: every node's cost plus a worst-case transfer per edge."""
    total = 0
    twirl_items = {}
    for node in graph.nodes:
        if node.kind is TcgNodeKind.TWIRL:
            twirl_items[node.id] = node.twirl.count
            total += TWIRL_COST.duration(items=node.twirl.count)
    for node in graph.nodes:
        if node.kind is TcgNodeKind.QUANTUM_CIRCUIT:
            runs = max([twirl_items.get(e.src, 1) for e in graph.incoming(node.id)] or [1])
            total += runs * sim.quantum_estimate(node.circuit, entry)
        elif node.kind is TcgNodeKind.CLASSICAL_OP:
            items = sum(e.size for e in graph.incoming(node.id))
            total += node.op.cost.duration(bytes=items, items=items)
    for e in graph.edges:
        total += sim.worst_transfer(entry, e.size)
    return total


def run_graph(ctx, graph: TensorComputeGraph, rng):
    """Place ``graph`` on the job's own allocation and execute it."""
    alloc = ctx.allocation
    allowed = {s.node for s in alloc.nodes} | ({alloc.qpu} if alloc.qpu else set())
    placement = plan_placement(graph, ctx.topology, allowed=allowed)
    tokens = {alloc.qpu: alloc.token} if alloc.qpu else {}
    result = yield from execute(graph, placement, ctx.kernel, ctx.qrmi, tokens=tokens, rng=rng)
    return placement, result


class MitigationDriver(Driver):
    name = "readout_mitigation"
    modes = ("coallocated",)
    embeddings = ("tcg",)
    coupling = BATCH_TIGHT

    def build(self, entry):
        p = entry.params
        model = ToyModel.from_dict(p["model"])
        model.check_size()
        circuit = CircuitSpec(
            model.sites,
            CircuitKind.PARAMETERIZED,
            int(p.get("shots", 4000)),
            two_qubit_gate_count=int(p.get("two_qubit_gate_count", 0)),
            model=model,
            theta=(float(p.get("theta", 0.5)),),
            circuit_id=entry.id,
        )
        twirls = int(p.get("twirls", 8))
        if twirls <= 0:
            raise ValueError("twirls must be positive")
        return circuit, twirls, float(p.get("amplitude", 0.0))

    def graph(self, entry, readout_error) -> TensorComputeGraph:
        circuit, twirls, amplitude = self.build(entry)
        return mitigation_graph(entry.id, circuit, twirls, amplitude, readout_error, self.requirement(entry))

    def _spec(self, entry, sim, payload=None) -> JobSpec:
        circuit = self.build(entry)[0]
        graph = self.graph(entry, [0.0] * circuit.num_qubits)
        est = estimate(entry, sim.launch_overhead(entry) + tcg_estimate(graph, sim, entry))
        return JobSpec.make(entry.id, JobKind.HYBRID, est, payload=payload, qubits=circuit.num_qubits, **self.fields(entry))

    def specs(self, entry, sim):
        return [self._spec(entry, sim)]

    def static_checks(self, entry, sim):
        circuit = self.build(entry)[0]
        return self.graph(entry, [0.0] * circuit.num_qubits).validate()

    def process(self, entry, sim):
        circuit = self.build(entry)[0]
        n = circuit.num_qubits
        rng = sim.rng(entry)
        seen = {}

        def payload(ctx):
            cal = ctx.qrmi.system(ctx.allocation.qpu).calibration()
            seen["readout_error"] = list(cal.readout_error[:n])
            return (yield from run_graph(ctx, self.graph(entry, seen["readout_error"]), rng))

        placement, result = yield from wait_job(sim, self._spec(entry, sim, payload))
        ideal = ideal_z(circuit)
        mitigated = [float(v) for v in result.outputs["expect"]["values"]]
        raw = [float(v) for v in result.outputs["raw_expect"]["values"]]
        return {
            "placement": dict(placement),
            "readout_error": seen["readout_error"],
            "ideal_z": ideal,
            "mitigated_z": mitigated,
            "raw_z": raw,
            "max_error_mitigated": max(abs(a - b) for a, b in zip(mitigated, ideal)),
            "max_error_raw": max(abs(a - b) for a, b in zip(raw, ideal)),
            "execution": result.to_dict(),
        }


# -- QEC ---------------------------------------------------------------------------
def _syndrome_circuit(entry, distance: int, p: float, period: int, rounds: int) -> CircuitSpec:
    spec = SyndromeSpec(distance, p, period, rounds)
    return CircuitSpec(distance, CircuitKind.SYNDROME, rounds, syndrome=spec, circuit_id=entry.id)


class SyndromeDecodeDriver(Driver):
    name = "syndrome_decode"
    modes = ("batch", "coallocated")

    def build(self, entry):
        p = entry.params
        d, per = int(p.get("distance", 3)), float(p.get("physical_error", 0.1))
        circuit = _syndrome_circuit(entry, d, per, parse_duration(p.get("period", "1us")), int(p.get("rounds", 10000)))
        chunk = int(p.get("chunk", 1000))
        if chunk <= 0:
            raise ValueError("chunk must be positive")
        return circuit, chunk, ClassicalCost.from_dict(p.get("cost"), DEFAULT_DECODE_COST)

    def _decode_est(self, entry, sim, circuit, chunk, cost) -> int:
        rounds = circuit.syndrome.rounds
        chunks = math.ceil(rounds / chunk)
        moved = sim.worst_transfer(entry, batch_bytes(circuit.num_qubits) * rounds)
        return moved + chunks * cost.duration(batches=chunk)

    def _decode_spec(self, entry, sim, circuit, chunk, cost, payload=None) -> JobSpec:
        est = estimate(entry, sim.launch_overhead(entry) + self._decode_est(entry, sim, circuit, chunk, cost))
        return JobSpec.make(f"{entry.id}.decode", JobKind.CLASSICAL, est, payload=payload, **self.fields(entry, quantum=False))

    def _hybrid(self, entry, sim, payload=None) -> JobSpec:
        circuit, chunk, cost = self.build(entry)
        modeled = sim.launch_overhead(entry) + sim.quantum_estimate(circuit, entry) + self._decode_est(entry, sim, circuit, chunk, cost)
        return JobSpec.make(entry.id, JobKind.HYBRID, estimate(entry, modeled), payload=payload, qubits=circuit.num_qubits, **self.fields(entry))

    def specs(self, entry, sim):
        if self.mode(entry) == "coallocated":
            return [self._hybrid(entry, sim)]
        circuit, chunk, cost = self.build(entry)
        origin = sim.origin(entry)
        q = JobSpec.make(
            f"{entry.id}.emit", JobKind.QUANTUM, sim.scheduler.estimate_quantum(circuit, entry.job.get("qpu"), origin),
            qubits=circuit.num_qubits, origin=origin, **self.fields(entry, classical=False),
        )
        return [q, self._decode_spec(entry, sim, circuit, chunk, cost)]

    def process(self, entry, sim):
        circuit, chunk, cost = self.build(entry)
        if self.mode(entry) == "batch":
            origin = sim.origin(entry)
            qjob = dict(self.fields(entry, classical=False), qubits=circuit.num_qubits, origin=origin)
            session = BatchSession(sim.scheduler, qjob, self.fields(entry, quantum=False), entry.id)
            samples, _, _ = yield from session.sample(circuit, "emit")

            def decode(ctx):
                decoder = ctx.allocation.nodes[0].node
                return (yield from syndrome_stream_decode(samples.batches, origin, decoder, ctx.kernel, chunk, cost))

            report = yield from session.run_job(self._decode_spec(entry, sim, circuit, chunk, cost, decode))
        else:

            def payload(ctx):
                samples, _, _ = yield from ctx.session().sample(circuit, "emit")
                decoder = ctx.allocation.nodes[0].node
                return (yield from syndrome_stream_decode(samples.batches, ctx.origin, decoder, ctx.kernel, chunk, cost))

            report = yield from wait_job(sim, self._hybrid(entry, sim, payload))
        d, p = circuit.num_qubits, circuit.syndrome.physical_error
        expected = logical_error_closed_form(d, p)
        sigma = math.sqrt(expected * (1 - expected) / report.batches) if report.batches else 0.0
        out = report.to_dict()
        out.update(
            closed_form=expected,
            sigma=sigma,
            z_score=(report.logical_error_rate - expected) / sigma if sigma else 0.0,
        )
        return out


class OuterDecoderDriver(Driver):
    name = "outer_decoder"
    modes = ("coallocated",)
    coupling = NEAR_TIME_TIGHT

    def build(self, entry):
        p = entry.params
        period = parse_duration(p.get("period", "500us"))
        service = parse_duration(p.get("service", "100us"))
        batches = int(p.get("batches", 10000))
        if period <= 0 or batches <= 0:
            raise ValueError("period and batches must be positive")
        circuit = _syndrome_circuit(entry, int(p.get("distance", 3)), float(p.get("physical_error", 0.01)), period, batches)
        return circuit, period, service, batches

    def _spec(self, entry, sim, payload=None) -> JobSpec:
        circuit, period, service, batches = self.build(entry)
        loop = batches * period + 2 * sim.worst_transfer(entry, 0) + service
        modeled = sim.launch_overhead(entry) + max(loop, sim.quantum_estimate(circuit, entry))
        return JobSpec.make(entry.id, JobKind.HYBRID, estimate(entry, modeled), payload=payload, qubits=circuit.num_qubits, **self.fields(entry))

    def specs(self, entry, sim):
        return [self._spec(entry, sim)]

    def process(self, entry, sim):
        circuit, period, service, batches = self.build(entry)
        requirement = self.requirement(entry)

        def payload(ctx):
            qpu, decoder = ctx.allocation.qpu, ctx.allocation.nodes[0].node
            emitter = ctx.kernel.spawn(f"{entry.id}:emit", ctx.session().sample(circuit, "emit"))
            report = yield from outer_decoder_process(ctx.kernel, qpu, decoder, period, service, batches, requirement)
            yield emitter
            closed = outer_decoder_loop(period, service, ctx.topology, qpu, decoder, batches, requirement)
            return qpu, decoder, report, closed

        qpu, decoder, report, closed = yield from wait_job(sim, self._spec(entry, sim, payload))
        out = report.to_dict()
        out.update(qpu=qpu, decoder=decoder, period=period, service=service, closed_form=closed.to_dict())
        return out


# -- synthetic background load and free-form graphs --------------------------------------
class SyntheticDriver(Driver):
    name = "synthetic"

    def build(self, entry):
        p = entry.params
        kind = JobKind(p.get("kind", "Classical"))
        est = parse_duration(p.get("estimated_runtime", 60))
        runtime = parse_duration(p["runtime"]) if "runtime" in p else est
        count = int(p.get("count", 1))
        if count <= 0 or runtime <= 0:
            raise ValueError("count and runtime must be positive")
        return kind, est, runtime, count, parse_duration(p.get("interarrival", 0)), int(p.get("qubits", 0))

    def _spec(self, entry, i: int) -> JobSpec:
        kind, est, runtime, _, _, qubits = self.build(entry)
        fields = self.fields(entry, classical=kind is not JobKind.QUANTUM)
        fields["estimated_runtime"] = parse_duration(entry.job["estimated_runtime"]) if "estimated_runtime" in entry.job else est
        return JobSpec.make(f"{entry.id}.{i:03d}", kind, payload=synthetic_payload(runtime), qubits=qubits, **fields)

    def specs(self, entry, sim):
        return [self._spec(entry, 0)]

    def process(self, entry, sim):
        _, _, _, count, gap, _ = self.build(entry)
        jobs = []
        for i in range(count):
            if i and gap:
                yield sim.kernel.timeout(gap, name=f"arrival:{entry.id}")
            spec = self._spec(entry, i)
            sim.scheduler.submit(spec)
            jobs.append(sim.scheduler.job(spec.job_id))
        yield sim.kernel.all_of([j.finished for j in jobs], name=f"{entry.id}:done")
        states: dict[str, int] = {}
        for j in jobs:
            states[j.state.value] = states.get(j.state.value, 0) + 1
        return {"jobs": [j.job_id for j in jobs], "states": states}


def tightest(requirements) -> CouplingClass:
    reqs = list(requirements)
    if not reqs:
        return LOOSEST
    temporal = max((r.temporal for r in reqs), key=lambda t: t.rank)
    spatial = max((r.spatial for r in reqs), key=lambda s: s.rank)
    return CouplingClass(temporal, spatial)


class TcgDriver(Driver):
    name = "tcg"
    modes = ("coallocated",)
    embeddings = ("tcg",)

    def build(self, entry):
        graph = TensorComputeGraph.from_dict(entry.params["graph"])
        graph.name = graph.name if graph.name != "tcg" else entry.id
        return graph

    def requirement(self, entry):
        if entry.job.get("coupling"):
            return CouplingClass.from_dict(entry.job["coupling"])
        graph = self.build(entry)
        quantum = {n.id for n in graph.nodes if n.kind is TcgNodeKind.QUANTUM_CIRCUIT}
        return tightest(e.requirement for e in graph.edges if e.requirement and (e.src in quantum or e.dst in quantum))

    def _spec(self, entry, sim, payload=None) -> JobSpec:
        graph = self.build(entry)
        widths = [n.circuit.num_qubits for n in graph.nodes if n.kind is TcgNodeKind.QUANTUM_CIRCUIT]
        has_classical = any(n.kind is not TcgNodeKind.QUANTUM_CIRCUIT for n in graph.nodes)
        if widths and not has_classical:
            raise InvalidSpec(f"{entry.id}: a graph run as a job needs at least one classical node")
        kind = JobKind.HYBRID if widths else JobKind.CLASSICAL
        est = estimate(entry, sim.launch_overhead(entry) + tcg_estimate(graph, sim, entry))
        fields = self.fields(entry, quantum=bool(widths))
        return JobSpec.make(entry.id, kind, est, payload=payload, qubits=max(widths, default=0), **fields)

    def specs(self, entry, sim):
        return [self._spec(entry, sim)]

    def static_checks(self, entry, sim):
        graph = self.build(entry)
        diags = graph.validate()
        if diags:
            return diags
        try:
            plan_placement(graph, sim.topology)
        except PlacementInfeasible as exc:
            return [Diagnostic(exc.kind, f"{entry.id}: {exc}")]
        return []

    def process(self, entry, sim):
        graph = self.build(entry)
        rng = sim.rng(entry)

        def payload(ctx):
            return (yield from run_graph(ctx, graph, rng))

        placement, result = yield from wait_job(sim, self._spec(entry, sim, payload))
        return {"placement": dict(placement), "outputs": jsonable(result.outputs), "execution": result.to_dict()}


DRIVERS: dict[str, Driver] = {
    d.name: d
    for d in (
        SqdDriver(),
        ClosedLoopDriver(),
        MitigationDriver(),
        SyndromeDecodeDriver(),
        OuterDecoderDriver(),
        SyntheticDriver(),
        TcgDriver(),
    )
}
