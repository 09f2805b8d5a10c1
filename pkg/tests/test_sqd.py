import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import direct_session
from qcsc.errors import EmptySubspace
from qcsc.qpu import Calibration, CircuitKind, CircuitSpec, ToyModel, solve_sector
from qcsc.qpu.model import diagonal_energies, from_bitstring, sector_states, to_bitstring
from qcsc.sim import run_process
from qcsc.workloads import (
    configuration_recovery,
    occupancy_update,
    partition_by_hamming,
    project_diagonalize,
    sqd_run,
    subsample,
)


def sector(sites, k):
    return [to_bitstring(x, sites) for x in sector_states(sites, k)]


def test_partition_by_hamming():
    assert partition_by_hamming(["1100", "1010", "1000", "1110"], 2) == (["1100", "1010"], ["1000", "1110"])
    assert partition_by_hamming(["0000", "0100"], 0) == (["0000"], ["0100"])


def test_partition_zero_noise_sampleset():
    from qcsc.qpu import execute

    s = execute(CircuitSpec(6, CircuitKind.GROUND_STATE, 500, 20, ToyModel(6, 1.0, 3)), Calibration.uniform(6), np.random.default_rng(0))
    assert partition_by_hamming(s, 3)[1] == []


def test_recovery_keeps_set_bit_and_reaches_weight():
    rng = np.random.default_rng(0)
    for _ in range(200):
        y = configuration_recovery("1000", 2, (0.5, 0.5, 0.5, 0.9), rng)
        assert y.count("1") == 2 and y[0] == "1"


def test_recovery_flip_law_frequencies():
    rng = np.random.default_rng(7)
    occ = (0.5, 0.5, 0.5, 0.9)
    n = 100_000
    raised = np.zeros(4)
    for _ in range(n):
        y = configuration_recovery("1000", 2, occ, rng)
        raised[[i for i in range(1, 4) if y[i] == "1"]] += 1
    p = np.array([0.5, 0.5, 0.9]) / 1.9
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(raised[1:] - n * p) <= 3 * sigma)
    assert raised[3] == raised[1:].max()


def test_recovery_lowers_exactly_one_bit():
    rng = np.random.default_rng(1)
    for x in ("1110", "1011", "0111"):
        y = configuration_recovery(x, 2, (0.2, 0.4, 0.6, 0.8), rng)
        assert y.count("1") == 2
        assert sum(a != b for a, b in zip(x, y)) == 1


def test_recovery_uniform_fallback():
    rng = np.random.default_rng(2)
    picks = [configuration_recovery("0000", 1, (0, 0, 0, 0), rng).index("1") for _ in range(4000)]
    counts = np.bincount(picks, minlength=4)
    assert np.all(np.abs(counts - 1000) <= 3 * np.sqrt(4000 * 0.25 * 0.75))


@given(st.text(alphabet="01", min_size=1, max_size=12), st.data())
def test_recovery_minimal_flips(x, data):
    k = data.draw(st.integers(0, len(x)))
    occ = data.draw(st.lists(st.floats(0, 1), min_size=len(x), max_size=len(x)))
    y = configuration_recovery(x, k, occ, np.random.default_rng(0))
    assert y.count("1") == k
    assert sum(a != b for a, b in zip(x, y)) == abs(x.count("1") - k)


def test_subsample():
    rng = np.random.default_rng(0)
    assert subsample(["01", "10", "01"], 5, rng) == ["01", "10"]
    assert subsample([], 3, rng) == []
    n = 20_000
    hits = sum(subsample(["a", "a", "a", "b"], 1, rng) == ["a"] for _ in range(n))
    assert abs(hits - 0.75 * n) <= 3 * np.sqrt(n * 0.75 * 0.25)


@given(st.lists(st.sampled_from(["a", "b", "c", "d", "e"]), max_size=30), st.integers(1, 6))
def test_subsample_distinct_subset(pool, m):
    out = subsample(pool, m, np.random.default_rng(0))
    assert len(out) == len(set(out)) == min(m, len(set(pool)))
    assert set(out) <= set(pool)


def test_project_full_sector_is_exact():
    model = ToyModel(8, 1.0, 4)
    energy, coeffs = project_diagonalize(model, sector(8, 4))
    assert abs(energy - solve_sector(model).energy) < 1e-10
    assert np.isclose(np.linalg.norm(coeffs), 1.0)


def test_project_single_string_is_diagonal():
    model = ToyModel(6, 0.7, 3)
    for x in ("111000", "101010"):
        energy, _ = project_diagonalize(model, [x])
        assert energy == pytest.approx(diagonal_energies(model, np.array([from_bitstring(x)]))[0])


def test_project_empty_subspace():
    with pytest.raises(EmptySubspace):
        project_diagonalize(ToyModel(4, 1.0, 2), [])


@given(st.data())
def test_variational_in_subspace_inclusion(data):
    model = ToyModel(6, data.draw(st.floats(-1.5, 1.5)), 3)
    full = sector(6, 3)
    big = data.draw(st.lists(st.sampled_from(full), min_size=1, unique=True))
    small = data.draw(st.lists(st.sampled_from(big), min_size=1, unique=True))
    e_small, _ = project_diagonalize(model, small)
    e_big, _ = project_diagonalize(model, big)
    assert e_small >= e_big - 1e-10
    assert e_big >= solve_sector(model).energy - 1e-10


def test_occupancy_update():
    assert np.allclose(occupancy_update(np.array([1.0]), ["1100"]), [1, 1, 0, 0])
    c = np.array([1, 1]) / np.sqrt(2)
    assert np.allclose(occupancy_update(c, ["1100", "0011"]), [0.5] * 4)


@given(st.integers(2, 8).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))))
def test_occupancy_sums_to_k(nk):
    n, k = nk
    model = ToyModel(n, 1.0, k)
    basis = sector(n, k)
    _, coeffs = project_diagonalize(model, basis)
    assert occupancy_update(coeffs, basis).sum() == pytest.approx(k)


def run_sqd(gate_error=0.0, m=70, max_iters=5, shots=2000, gates=16, seed=0):
    model = ToyModel(8, 1.0, 4)
    k, qrmi, session = direct_session(Calibration.uniform(16, gate_error=gate_error), seed=seed)
    circ = CircuitSpec(8, CircuitKind.GROUND_STATE, shots, gates, model)
    state = run_process(k, sqd_run(model, circ, shots, m, max_iters, 1e-9, session, k.rng("sqd")))
    return model, state, session


def test_sqd_zero_noise_full_subspace_converges():
    # enough shots that the least likely sector state (p ~ 5.6e-5) is sampled
    model, state, _ = run_sqd(shots=200_000)
    assert state.subspace == sector(8, 4)
    assert abs(state.energy - solve_sector(model).energy) < 1e-9
    assert state.converged and state.iteration <= 2


def test_sqd_noisy_is_variational_and_close():
    model, state, _ = run_sqd(gate_error=1e-2, m=50)
    exact = solve_sector(model).energy
    assert state.energy >= exact - 1e-12
    assert state.energy - exact <= 1e-2


def test_sqd_single_iteration_single_job():
    _, state, session = run_sqd(max_iters=1)
    assert len(state.qpu_jobs) == 1 and state.iteration == 1
    assert [p[0] for p in session.phases] == ["qpu", "classical"]


def test_sqd_deterministic():
    a = run_sqd(gate_error=1e-2, m=30, seed=4)[1].to_dict()
    b = run_sqd(gate_error=1e-2, m=30, seed=4)[1].to_dict()
    assert a == b
