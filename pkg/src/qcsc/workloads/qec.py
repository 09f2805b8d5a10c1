"""Repetition-code decoding, offline (streamed) and as an outer near-time loop."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qcsc.core.topology import CouplingClass, Spatial, Temporal, Topology, classify_coupling, path_latency
from qcsc.errors import CouplingInfeasible
from qcsc.qpu.device import SyndromeBatch
from qcsc.sim.kernel import Kernel
from qcsc.units import S
from qcsc.workloads.session import ClassicalCost

NEAR_TIME_TIGHT = CouplingClass(Temporal.NEAR_TIME, Spatial.TIGHT)
DEFAULT_DECODE_COST = ClassicalCost(base=1_000, per_unit={"batches": 200})


def majority_decode(bits: str) -> int:
    ones = bits.count("1")
    return 1 if 2 * ones > len(bits) else 0


def logical_error_closed_form(d: int, p: float) -> float:
    """P(more than half the d copies flip) for i.i.d. flips with probability p."""
    return sum(math.comb(d, j) * p**j * (1 - p) ** (d - j) for j in range(d // 2 + 1, d + 1))


def batch_bytes(distance: int) -> int:
    """Wire size of one batch: 8-byte timestamp plus the packed bits."""
    return 8 + math.ceil(distance / 8)


@dataclass(frozen=True)
class DecodeReport:
    batches: int
    errors: int
    logical_error_rate: float
    throughput: float  # batches per virtual second
    transfer_bytes: int
    start: int
    end: int

    def to_dict(self) -> dict:
        return {
            "batches": self.batches,
            "errors": self.errors,
            "logical_error_rate": self.logical_error_rate,
            "throughput": self.throughput,
            "transfer_bytes": self.transfer_bytes,
            "start": self.start,
            "end": self.end,
        }


def decode_errors(batches: Sequence[SyndromeBatch]) -> int:
    return sum(majority_decode(b.bits) != b.logical for b in batches)


def syndrome_stream_decode(
    batches: Sequence[SyndromeBatch],
    source: str,
    decoder: str,
    kernel: Kernel,
    chunk: int = 1000,
    cost: ClassicalCost = DEFAULT_DECODE_COST,
):
    """Kernel process: ship batches to ``decoder`` in chunks and majority-decode each chunk.

    Offline mode: no deadline, transfers pipeline with decoding but the decoder
    works on one chunk at a time.
    """
    if not batches:
        return DecodeReport(0, 0, 0.0, 0.0, 0, kernel.now, kernel.now)
    d = len(batches[0].bits)
    start = kernel.now
    total_bytes = 0
    arrivals = []
    for i in range(0, len(batches), chunk):
        part = batches[i : i + chunk]
        size = batch_bytes(d) * len(part)
        total_bytes += size
        arrivals.append((kernel.send(source, decoder, size), part))
    errors = 0
    for arrived, part in arrivals:
        yield arrived
        yield kernel.timeout(cost.duration(batches=len(part)), name=f"decode@{decoder}")
        errors += decode_errors(part)
    n = len(batches)
    elapsed = kernel.now - start
    return DecodeReport(n, errors, errors / n, n / (elapsed / S) if elapsed else math.inf, total_bytes, start, kernel.now)


@dataclass(frozen=True)
class OuterLoopReport:
    batches: int
    misses: int
    response_time: int
    mean_response: float
    max_response: int

    @property
    def miss_rate(self) -> float:
        return self.misses / self.batches if self.batches else 0.0

    def to_dict(self) -> dict:
        return {
            "batches": self.batches,
            "misses": self.misses,
            "miss_rate": self.miss_rate,
            "response_time": self.response_time,
            "mean_response": self.mean_response,
            "max_response": self.max_response,
        }


def check_outer_placement(topology: Topology, qpu: str, decoder: str, requirement: CouplingClass = NEAR_TIME_TIGHT) -> None:
    got = classify_coupling(topology, qpu, decoder)
    if not got.meets(requirement):
        raise CouplingInfeasible(f"{qpu}<->{decoder} is {got}, outer decoder needs {requirement}")


def outer_decoder_loop(
    period: int,
    service: int,
    topology: Topology,
    qpu: str,
    decoder: str,
    batches: int,
    requirement: CouplingClass = NEAR_TIME_TIGHT,
) -> OuterLoopReport:
    """Closed-form deadline accounting: response = 2 * path latency + service.

    Each batch is answered independently (no queueing between batches), so
    every batch sees the same response time.
    """
    check_outer_placement(topology, qpu, decoder, requirement)
    response = 2 * path_latency(topology, qpu, decoder) + service
    misses = batches if response > period else 0
    return OuterLoopReport(batches, misses, response, float(response), response)


def outer_decoder_process(
    kernel: Kernel,
    qpu: str,
    decoder: str,
    period: int,
    service: int,
    batches: int,
    requirement: CouplingClass = NEAR_TIME_TIGHT,
):
    """The same loop simulated event by event on the kernel's topology.

    A batch is emitted every ``period``; its syndrome travels to the decoder,
    is decoded for ``service`` and the correction travels back.
    """
    check_outer_placement(kernel.topology, qpu, decoder, requirement)
    responses = np.zeros(batches, dtype=np.int64)

    def one(i: int, emitted: int):
        yield kernel.send(qpu, decoder, 0)
        yield kernel.timeout(service, name=f"outer@{decoder}")
        yield kernel.send(decoder, qpu, 0)
        responses[i] = kernel.now - emitted

    procs = []
    for i in range(batches):
        if i:
            yield kernel.timeout(period, name="outer.period")
        procs.append(kernel.spawn(f"outer.b{i}", one(i, kernel.now)))
    yield kernel.all_of(procs)
    misses = int((responses > period).sum())
    return OuterLoopReport(batches, misses, int(responses[0]), float(responses.mean()), int(responses.max()))
