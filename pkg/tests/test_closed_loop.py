import math

import pytest

from conftest import direct_session
from qcsc.errors import AllocationExpired
from qcsc.qpu import Calibration, ToyModel, solve_sector
from qcsc.sim import run_process
from qcsc.units import MS
from qcsc.workloads import InnerSqd, StepSchedule, closed_loop_sqd

MODEL = ToyModel(8, 1.0, 4)
# enough shots that the exact sampler covers the whole sector
FULL = InnerSqd(shots=200_000, m=70)


def run_loop(theta0, inner=FULL, schedule=StepSchedule(), window=None, gate_error=0.0):
    k, _, session = direct_session(Calibration.uniform(16, gate_error=gate_error), window=window)
    return run_process(k, closed_loop_sqd(MODEL, theta0, schedule, session, k.rng("cl"), inner))


def test_exact_sampler_is_fixed_point():
    trace = run_loop(math.pi / 2)
    assert all(it.theta == math.pi / 2 for it in trace.iterations)
    assert trace.converged
    assert abs(trace.energy - solve_sector(MODEL).energy) < 1e-9


def test_from_mean_field_reaches_optimum():
    trace = run_loop(0.0)
    energies = [it.energy for it in trace.iterations]
    assert all(b <= a for a, b in zip(energies, energies[1:]))
    assert energies[-1] < energies[0]
    assert trace.converged and len(trace.iterations) - 1 <= 20
    assert abs(trace.theta - math.pi / 2) <= StepSchedule().min_step
    assert abs(trace.energy - solve_sector(MODEL).energy) < 1e-9


def test_mean_field_start_energy_is_diagonal_minimum():
    trace = run_loop(0.0, InnerSqd(shots=500, m=10, max_iters=1), StepSchedule(max_iters=0))
    assert len(trace.iterations) == 1
    # at theta = 0 the sampler returns the single lowest diagonal configuration
    assert trace.energy == pytest.approx(-2.0)


def test_step_halves_when_no_direction_improves():
    trace = run_loop(math.pi / 2, schedule=StepSchedule(max_iters=2, min_step=1e-9))
    steps = [it.step for it in trace.iterations]
    assert steps == [math.pi / 2, math.pi / 4, math.pi / 8]
    assert not trace.converged


def test_phases_inside_window():
    trace = run_loop(0.0, InnerSqd(shots=2000, m=50), window=(0, 10**13))
    assert trace.phases and trace.phases_inside_window
    assert all(a <= b for _, a, b in trace.phases)


def test_window_shorter_than_one_iteration_expires():
    with pytest.raises(AllocationExpired):
        run_loop(0.0, InnerSqd(shots=2000, m=50), window=(0, 1 * MS))


def test_trace_serializes():
    d = run_loop(0.0, InnerSqd(shots=500, m=20, max_iters=1), StepSchedule(max_iters=1)).to_dict()
    assert d["outer_iterations"] == 1 and len(d["trace"]) == 2
    assert {"theta", "energy", "step", "trials"} <= set(d["trace"][1])
