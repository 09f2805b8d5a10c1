"""Sample-based quantum diagonalization on the toy spin chain.

One iteration: sample on the QPU, split samples by Hamming weight, repair the
wrong-weight ones against the current occupancy vector, subsample the
combined pool, diagonalize H in the selected configurations, and update the
occupancy vector from the resulting eigenvector.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from qcsc.errors import EmptySubspace
from qcsc.qpu.device import CircuitSpec, SampleSet
from qcsc.qpu.model import ToyModel, from_bitstring, hamiltonian_block, hamming_weight, lowest_eigenpair
from qcsc.workloads.session import ClassicalCost, Session


def partition_by_hamming(samples: SampleSet | Sequence[str], k: int) -> tuple[list[str], list[str]]:
    strings = samples.bitstrings if isinstance(samples, SampleSet) else samples
    correct, incorrect = [], []
    for s in strings:
        (correct if hamming_weight(s) == k else incorrect).append(s)
    return correct, incorrect


def _pick(eligible: np.ndarray, weights: np.ndarray, rng: np.random.Generator) -> int:
    total = weights.sum()
    if total <= 0:
        return int(eligible[rng.integers(len(eligible))])
    return int(eligible[rng.choice(len(eligible), p=weights / total)])


def configuration_recovery(x: str, k: int, occupancy: Sequence[float], rng: np.random.Generator) -> str:
    """Flip exactly |weight(x) - k| bits so the result has weight ``k``.

    Raising a 0 picks site i with probability proportional to n_i; lowering a
    1 picks site i proportional to 1 - n_i.  Each flip renormalizes over the
    bits still eligible; an all-zero weight set falls back to uniform.
    """
    bits = np.array([c == "1" for c in x], dtype=bool)
    occ = np.clip(np.asarray(occupancy, dtype=float), 0.0, 1.0)
    w = int(bits.sum())
    while w != k:
        if w < k:
            eligible = np.nonzero(~bits)[0]
            i = _pick(eligible, occ[eligible], rng)
            bits[i] = True
            w += 1
        else:
            eligible = np.nonzero(bits)[0]
            i = _pick(eligible, 1.0 - occ[eligible], rng)
            bits[i] = False
            w -= 1
    return "".join("1" if b else "0" for b in bits)


def subsample(pool: Sequence[str], m: int, rng: np.random.Generator) -> list[str]:
    """Up to ``m`` distinct strings, drawn without replacement, weighted by multiplicity."""
    if m <= 0:
        raise ValueError("m must be positive")
    if not pool:
        return []
    distinct, counts = np.unique(np.asarray(pool), return_counts=True)
    if m >= len(distinct):
        return [str(s) for s in distinct]
    pick = rng.choice(len(distinct), size=m, replace=False, p=counts / counts.sum())
    return sorted(str(distinct[i]) for i in pick)


def project_diagonalize(model: ToyModel, subspace: Sequence[str]) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of H in span(subspace).

    The coefficient vector is indexed like ``sorted(set(subspace))``.
    """
    basis = sorted(set(subspace))
    if not basis:
        raise EmptySubspace("cannot diagonalize in an empty subspace")
    weights = {hamming_weight(s) for s in basis}
    if weights != {model.k}:
        raise ValueError(f"subspace strings must all have weight {model.k}, got {sorted(weights)}")
    states = np.array([from_bitstring(s) for s in basis], dtype=np.int64)
    energy, vec = lowest_eigenpair(hamiltonian_block(model, states))
    return energy, vec / np.linalg.norm(vec)


def occupancy_update(coefficients: np.ndarray, subspace: Sequence[str]) -> np.ndarray:
    """n_i = sum_x |c_x|^2 x_i over the (sorted) subspace basis."""
    basis = sorted(set(subspace))
    bits = np.array([[c == "1" for c in s] for s in basis], dtype=float)
    probs = np.abs(np.asarray(coefficients)) ** 2
    return probs @ bits


def initial_occupancy(correct: Sequence[str], sites: int, k: int) -> np.ndarray:
    if correct:
        return np.array([[c == "1" for c in s] for s in correct], dtype=float).mean(axis=0)
    return np.full(sites, k / sites)


@dataclass
class SqdIteration:
    iteration: int
    energy: float
    subspace_size: int
    n_correct: int
    n_recovered: int
    qpu_job: str
    qpu_phase: tuple[int, int]
    classical_phase: tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "energy": self.energy,
            "subspace_size": self.subspace_size,
            "n_correct": self.n_correct,
            "n_recovered": self.n_recovered,
            "qpu_job": self.qpu_job,
            "qpu_phase": list(self.qpu_phase),
            "classical_phase": list(self.classical_phase),
        }


@dataclass
class SqdState:
    iteration: int = 0
    subspace: list[str] = field(default_factory=list)
    energy: float = float("inf")
    occupancy: np.ndarray | None = None
    converged: bool = False
    trace: list[SqdIteration] = field(default_factory=list)

    @property
    def qpu_jobs(self) -> list[str]:
        return [it.qpu_job for it in self.trace]

    def to_dict(self) -> dict:
        return {
            "iterations": self.iteration,
            "energy": self.energy,
            "converged": self.converged,
            "subspace_size": len(self.subspace),
            "occupancy": [float(x) for x in self.occupancy] if self.occupancy is not None else None,
            "trace": [it.to_dict() for it in self.trace],
        }


DEFAULT_SQD_COST = ClassicalCost(base=50_000_000, per_unit={"samples": 1_000, "configs": 100_000})


def sqd_run(
    model: ToyModel,
    circuit: CircuitSpec,
    shots: int,
    m: int,
    max_iters: int,
    tol: float,
    session: Session,
    rng: np.random.Generator,
    carryover: float | None = 1e-8,
    cost: ClassicalCost = DEFAULT_SQD_COST,
    label: str = "sqd",
):
    """Self-consistent SQD loop; a kernel process returning the final :class:`SqdState`.

    ``carryover`` keeps configurations of the previous eigenvector whose
    weight |c_x|^2 is at least the threshold; the ``m`` fresh configurations
    are then drawn from pool strings not already kept, so the subspace can
    grow past ``m`` across iterations. ``None`` disables carry-over.
    """
    circuit = replace(circuit, shots=shots)
    state = SqdState()
    previous: dict[str, float] = {}
    for it in range(1, max_iters + 1):
        samples, job_id, q_phase = yield from session.sample(circuit, f"{label}.it{it}")
        c_start = session.kernel.now
        correct, incorrect = partition_by_hamming(samples, model.k)
        occupancy = state.occupancy if state.occupancy is not None else initial_occupancy(correct, model.sites, model.k)
        recovered = [configuration_recovery(x, model.k, occupancy, rng) for x in incorrect]
        kept = {s for s, w in previous.items() if w >= carryover} if carryover is not None else set()
        fresh = [s for s in correct + recovered if s not in kept]
        subspace = sorted(kept.union(subsample(fresh, m, rng) if fresh else ()))
        energy, coeffs = project_diagonalize(model, subspace)
        occupancy = occupancy_update(coeffs, subspace)
        yield from session.compute(cost.duration(samples=len(samples.bitstrings), configs=len(subspace)), f"{label}.diag{it}")
        c_phase = (c_start, session.kernel.now)
        previous = dict(zip(subspace, np.abs(coeffs) ** 2))
        prev_energy = state.energy
        state.iteration = it
        state.subspace = subspace
        state.energy = energy
        state.occupancy = occupancy
        state.trace.append(
            SqdIteration(it, energy, len(subspace), len(correct), len(recovered), job_id, q_phase, c_phase)
        )
        if it > 1 and abs(energy - prev_energy) < tol:
            state.converged = True
            break
    return state
