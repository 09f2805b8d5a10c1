"""Closed-loop SQD: an outer search over the sampler angle around inner SQD runs.

Each outer iteration tries ``theta + step`` then ``theta - step``; a trial is
accepted only if it lowers the best energy by more than ``tol``.  When neither
direction helps the step halves.  The loop stops once the best energy changed
by less than ``tol`` over an iteration with the step already below
``min_step``, or at ``max_iters``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from qcsc.qpu.device import CircuitKind, CircuitSpec
from qcsc.qpu.model import ToyModel
from qcsc.workloads.session import ClassicalCost, Session
from qcsc.workloads.sqd import DEFAULT_SQD_COST, sqd_run


@dataclass(frozen=True)
class StepSchedule:
    initial: float = math.pi / 2
    min_step: float = math.pi / 16
    max_iters: int = 20
    tol: float = 1e-6


@dataclass(frozen=True)
class InnerSqd:
    shots: int = 2000
    m: int = 50
    max_iters: int = 3
    tol: float = 1e-6
    two_qubit_gate_count: int = 0
    carryover: float | None = 1e-8
    cost: ClassicalCost = DEFAULT_SQD_COST


@dataclass
class Evaluation:
    theta: float
    energy: float
    inner_iterations: int
    qpu_jobs: list[str]


@dataclass
class OuterIteration:
    iteration: int
    theta: float
    energy: float
    step: float
    trials: list[Evaluation] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "theta": self.theta,
            "energy": self.energy,
            "step": self.step,
            "trials": [
                {"theta": t.theta, "energy": t.energy, "inner_iterations": t.inner_iterations, "qpu_jobs": t.qpu_jobs}
                for t in self.trials
            ],
        }


@dataclass
class ClosedLoopTrace:
    iterations: list[OuterIteration] = field(default_factory=list)
    converged: bool = False
    phases: list[tuple[str, int, int]] = field(default_factory=list)
    window: tuple[int, int] | None = None

    @property
    def theta(self) -> float:
        return self.iterations[-1].theta

    @property
    def energy(self) -> float:
        return self.iterations[-1].energy

    @property
    def phases_inside_window(self) -> bool:
        if self.window is None:
            return True
        lo, hi = self.window
        return all(lo <= a and b <= hi for _, a, b in self.phases)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "energy": self.energy,
            "converged": self.converged,
            "outer_iterations": len(self.iterations) - 1,
            "window": list(self.window) if self.window else None,
            "phases_inside_window": self.phases_inside_window,
            "trace": [it.to_dict() for it in self.iterations],
        }


def closed_loop_sqd(
    model: ToyModel,
    theta0: float,
    schedule: StepSchedule,
    session: Session,
    rng: np.random.Generator,
    inner: InnerSqd = InnerSqd(),
    label: str = "cl",
):
    """Kernel process returning a :class:`ClosedLoopTrace`.

    Iteration 0 is the evaluation at ``theta0``; ``max_iters`` bounds the
    outer iterations after it.
    """
    base = CircuitSpec(
        model.sites,
        CircuitKind.PARAMETERIZED,
        inner.shots,
        two_qubit_gate_count=inner.two_qubit_gate_count,
        model=model,
        theta=(float(theta0),),
        circuit_id=label,
    )
    counter = [0]

    def evaluate(theta: float):
        counter[0] += 1
        state = yield from sqd_run(
            model,
            base.with_theta((theta,)),
            inner.shots,
            inner.m,
            inner.max_iters,
            inner.tol,
            session,
            rng,
            carryover=inner.carryover,
            cost=inner.cost,
            label=f"{label}.e{counter[0]}",
        )
        return Evaluation(theta, state.energy, state.iteration, state.qpu_jobs)

    trace = ClosedLoopTrace(window=getattr(session, "window", None))
    first = yield from evaluate(float(theta0))
    trace.iterations.append(OuterIteration(0, first.theta, first.energy, schedule.initial, [first]))
    theta, energy, step = first.theta, first.energy, schedule.initial
    for it in range(1, schedule.max_iters + 1):
        trials = []
        moved = False
        for direction in (1.0, -1.0):
            trial = yield from evaluate(theta + direction * step)
            trials.append(trial)
            if trial.energy < energy - schedule.tol:
                theta, moved = trial.theta, True
                break
        previous = energy
        if moved:
            energy = trials[-1].energy
        else:
            step /= 2
        trace.iterations.append(OuterIteration(it, theta, energy, step, trials))
        if abs(energy - previous) < schedule.tol and step < schedule.min_step:
            trace.converged = True
            break
    trace.phases = list(getattr(session, "phases", []))
    return trace
