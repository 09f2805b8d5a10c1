"""Named classical functions usable as ClassicalOp bindings.

A function takes ``(inputs, params, rng)`` where ``inputs`` maps input port
names to values, and returns a mapping of output port names to values.
"""
from __future__ import annotations

from typing import Any, Callable, Mapping

import numpy as np

from qcsc.qpu.device import SampleSet
from qcsc.qpu.model import ToyModel

ClassicalFn = Callable[[Mapping[str, Any], Mapping[str, Any], np.random.Generator], Mapping[str, Any]]

REGISTRY: dict[str, ClassicalFn] = {}


def register(name: str) -> Callable[[ClassicalFn], ClassicalFn]:
    def deco(fn: ClassicalFn) -> ClassicalFn:
        REGISTRY[name] = fn
        return fn

    return deco


def lookup(name: str) -> ClassicalFn:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown classical function {name!r}; known: {sorted(REGISTRY)}") from None


def _strings(value: Any) -> list[str]:
    if isinstance(value, SampleSet):
        return list(value.bitstrings)
    if isinstance(value, (list, tuple)) and value and isinstance(value[0], SampleSet):
        return [s for ss in value for s in ss.bitstrings]
    return list(value)


def item_count(value: Any) -> int:
    if isinstance(value, SampleSet):
        return len(value.bitstrings)
    if isinstance(value, (list, tuple, dict)):
        return sum(item_count(v) for v in value) if value and isinstance(next(iter(value)), SampleSet) else len(value)
    if isinstance(value, np.ndarray):
        return int(value.size)
    return 1


@register("identity")
def _identity(inputs, params, rng):
    return {"y": inputs["x"]}


@register("sum")
def _sum(inputs, params, rng):
    return {"y": float(sum(np.sum(v) for _, v in sorted(inputs.items())))}


@register("fail")
def _fail(inputs, params, rng):
    raise RuntimeError(params.get("message", "classical function failed"))


@register("hamming_partition")
def _hamming_partition(inputs, params, rng):
    from qcsc.workloads.sqd import partition_by_hamming

    correct, incorrect = partition_by_hamming(_strings(inputs["samples"]), int(params["k"]))
    return {"correct": correct, "incorrect": incorrect}


@register("sqd_diagonalize")
def _sqd_diagonalize(inputs, params, rng):
    """One SQD post-processing step: recover, subsample, diagonalize."""
    from qcsc.workloads.sqd import (
        configuration_recovery,
        initial_occupancy,
        occupancy_update,
        partition_by_hamming,
        project_diagonalize,
        subsample,
    )

    model = ToyModel.from_dict(params["model"])
    correct, incorrect = partition_by_hamming(_strings(inputs["samples"]), model.k)
    occ = initial_occupancy(correct, model.sites, model.k)
    pool = correct + [configuration_recovery(x, model.k, occ, rng) for x in incorrect]
    subspace = subsample(pool, int(params.get("m", 50)), rng)
    energy, coeffs = project_diagonalize(model, subspace)
    return {"energy": np.array([energy]), "occupancy": occupancy_update(coeffs, subspace)}


@register("readout_mitigation")
def _readout_mitigation(inputs, params, rng):
    """Pool every sample set on the input and invert symmetric per-qubit readout errors."""
    from qcsc.workloads.mitigation import ConfusionMatrix, readout_mitigation

    strings = _strings(inputs["samples"])
    width = len(strings[0])
    eps = params.get("readout_error", 0.0)
    eps = [float(eps)] * width if np.isscalar(eps) else [float(e) for e in eps]
    hist: dict[str, int] = {}
    for s in strings:
        hist[s] = hist.get(s, 0) + 1
    quasi = readout_mitigation(hist, [ConfusionMatrix.symmetric(e) for e in eps])
    return {"quasi": quasi}


@register("empirical_distribution")
def _empirical_distribution(inputs, params, rng):
    """Normalized counts of every sample set on the input, without mitigation."""
    strings = _strings(inputs["samples"])
    hist: dict[str, float] = {}
    for s in strings:
        hist[s] = hist.get(s, 0.0) + 1.0
    return {"quasi": {s: c / len(strings) for s, c in sorted(hist.items())}}


@register("expectation_z")
def _expectation_z(inputs, params, rng):
    from qcsc.workloads.mitigation import expectation_z

    quasi = inputs["quasi"]
    width = len(next(iter(quasi)))
    return {"values": np.array([expectation_z(quasi, i) for i in range(width)])}


@register("majority_decode")
def _majority_decode(inputs, params, rng):
    from qcsc.workloads.qec import decode_errors

    batches = inputs["syndromes"].batches
    return {"rate": np.array([decode_errors(batches) / len(batches) if batches else 0.0])}
