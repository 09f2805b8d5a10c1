import itertools
from functools import reduce

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import cpu_node, link, qpu_node
from qcsc.core import build_topology
from qcsc.errors import InvalidCircuit, InvalidDistance, InvalidTheta, ModelTooLarge, NotCancellable, NotDone, UnknownJob
from qcsc.qpu import (
    Calibration,
    CircuitKind,
    CircuitSpec,
    DriftConfig,
    JobStatus,
    MockQpu,
    QpuTiming,
    SampleSet,
    SyndromeSpec,
    ToyModel,
    drift_step,
    emit_syndromes,
    estimate_exec_time,
    execute,
    solve_sector,
)
from qcsc.qpu.device import flip_probabilities
from qcsc.qpu.model import interpolated_state
from qcsc.sim import Kernel, run_process
from qcsc.units import MS, S, US

SX = np.array([[0, 1], [1, 0]]) / 2
SY = np.array([[0, -1j], [1j, 0]]) / 2
SZ = np.array([[1, 0], [0, -1]]) / 2


def dense_hamiltonian(model: ToyModel) -> np.ndarray:
    """Full 2^n XXZ matrix from Kronecker products; basis index = bitstring with site 0 most significant, up = 1."""
    n = model.sites
    # |1> is spin up: in the computational basis index 1, so Sz must be +1/2 on index 1.
    sz = -SZ

    def op(single, site):
        mats = [np.eye(2)] * n
        mats = mats[:site] + [single] + mats[site + 1 :]
        return reduce(np.kron, mats)

    h = np.zeros((2**n, 2**n), dtype=complex)
    for i, j in model.bonds:
        h += op(SX, i) @ op(SX, j) + op(SY, i) @ op(SY, j) + model.delta * op(sz, i) @ op(sz, j)
    return model.coupling * h.real


def sector_ground_energy_dense(model: ToyModel) -> float:
    n = model.sites
    idx = [x for x in range(2**n) if bin(x).count("1") == model.k]
    h = dense_hamiltonian(model)[np.ix_(idx, idx)]
    return float(np.linalg.eigvalsh(h)[0])


def sampler(sites=4, k=2, shots=1000, gates=0, delta=1.0, kind=CircuitKind.GROUND_STATE, theta=None):
    return CircuitSpec(sites, kind, shots, gates, ToyModel(sites, delta, k), theta)


@given(st.integers(2, 8).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))), st.floats(-2, 2), st.booleans())
def test_sector_energy_matches_dense_oracle(nk, delta, periodic):
    n, k = nk
    model = ToyModel(n, delta, k, periodic=periodic)
    assert solve_sector(model).energy == pytest.approx(sector_ground_energy_dense(model), abs=1e-9)


def test_large_sector_uses_sparse_path():
    model = ToyModel(14, 1.0, 7)
    sol = solve_sector(model)
    assert len(sol.states) == 3432
    # the returned vector satisfies the eigen-equation
    from qcsc.qpu.model import hamiltonian_block

    h = hamiltonian_block(model, sol.states)
    v = sol.ground_state
    assert np.linalg.norm(h @ v - sol.energy * v) < 1e-8


def test_interpolated_state_endpoints():
    model = ToyModel(6, 1.0, 3)
    sol = solve_sector(model)
    assert np.allclose(interpolated_state(model, np.pi / 2), sol.ground_state)
    e0 = np.zeros(len(sol.states))
    e0[sol.mean_field_index] = 1
    assert np.allclose(interpolated_state(model, 0.0), e0)


def test_zero_noise_conserves_weight():
    s = execute(sampler(gates=10), Calibration.uniform(4), np.random.default_rng(0))
    assert s.shots == 1000 and len(s.bitstrings) == 1000
    assert all(b.count("1") == 2 for b in s.bitstrings)


def binomial_ok(hits, n, p):
    sigma = np.sqrt(n * p * (1 - p))
    return abs(hits - n * p) <= 3 * sigma


def test_gate_noise_on_single_state_sector_matches_closed_form():
    # k = 0 has one basis state, so any flip changes the weight.
    circ = sampler(k=0, shots=20000, gates=4)
    cal = Calibration.uniform(4, gate_error=0.01)
    p_flip = flip_probabilities(circ, cal)
    assert np.allclose(p_flip, p_flip[0])
    p = 1 - (1 - p_flip[0]) ** 4
    s = execute(circ, cal, np.random.default_rng(3))
    hits = sum(b != "0000" for b in s.bitstrings)
    assert hits > 0 and binomial_ok(hits, s.shots, p)


def test_gate_noise_weight_change_matches_enumerated_law():
    circ = sampler(k=2, shots=20000, gates=6)
    cal = Calibration.uniform(4, gate_error=0.02)
    q = flip_probabilities(circ, cal)
    # weight survives iff as many 1s as 0s are flipped; average over ideal states
    states, probs = solve_sector(circ.model).states, solve_sector(circ.model).ground_state ** 2
    p_change = 0.0
    for x, px in zip(states, probs):
        bits = [(int(x) >> (3 - i)) & 1 for i in range(4)]
        for mask in itertools.product((0, 1), repeat=4):
            pm = np.prod([q[i] if m else 1 - q[i] for i, m in enumerate(mask)])
            ones = sum(m and b for m, b in zip(mask, bits))
            zeros = sum(m and not b for m, b in zip(mask, bits))
            p_change += px * pm * (ones != zeros)
    s = execute(circ, cal, np.random.default_rng(4))
    hits = sum(b.count("1") != 2 for b in s.bitstrings)
    assert binomial_ok(hits, s.shots, p_change)


def test_readout_noise_per_qubit():
    circ = sampler(k=0, shots=40000)
    cal = Calibration((0.0, 0.1, 0.0, 0.3), 0.0)
    s = execute(circ, cal, np.random.default_rng(5))
    for i, eps in enumerate(cal.readout_error):
        ones = sum(b[i] == "1" for b in s.bitstrings)
        assert binomial_ok(ones, s.shots, eps)


def test_model_too_large():
    with pytest.raises(ModelTooLarge):
        execute(sampler(sites=30, k=1), Calibration.uniform(30), np.random.default_rng(0))


def test_invalid_theta():
    with pytest.raises(InvalidTheta):
        sampler(kind=CircuitKind.PARAMETERIZED)
    with pytest.raises(InvalidTheta):
        execute(sampler(kind=CircuitKind.PARAMETERIZED, theta=(float("nan"),)), Calibration.uniform(4), np.random.default_rng(0))


def test_circuit_invariants():
    with pytest.raises(InvalidCircuit):
        sampler(shots=0)
    with pytest.raises(InvalidCircuit):
        CircuitSpec(5, CircuitKind.GROUND_STATE, 10, 0, ToyModel(4, 1.0, 2))


def test_circuit_and_sampleset_roundtrip():
    c = sampler(kind=CircuitKind.PARAMETERIZED, theta=(0.3,))
    assert CircuitSpec.from_dict(c.to_dict()) == c
    s = execute(sampler(shots=50), Calibration.uniform(4, 0.1), np.random.default_rng(0))
    again = SampleSet.from_dict(s.to_dict())
    assert again.counts() == s.counts() and again.shots == s.shots


def test_estimate_exec_time():
    t = QpuTiming(t_shot_base=1 * MS, t_gate=1 * US)
    assert estimate_exec_time(sampler(shots=1, gates=0), t) == 1 * MS
    assert estimate_exec_time(sampler(shots=1000, gates=100), t) == 1100 * MS
    syn = CircuitSpec(3, CircuitKind.SYNDROME, 100, syndrome=SyndromeSpec(3, 0.1, 500 * US, 100))
    assert estimate_exec_time(syn) == 50 * MS


@given(st.integers(1, 10**5), st.integers(0, 500))
def test_estimate_linear_in_shots(shots, gates):
    assert estimate_exec_time(sampler(shots=2 * shots, gates=gates)) == 2 * estimate_exec_time(sampler(shots=shots, gates=gates))


def test_drift_zero_magnitude():
    cal = Calibration.uniform(3, 0.01, 0.005)
    out = drift_step(cal, np.random.default_rng(0), DriftConfig(0.0, 10 * S))
    assert out.readout_error == cal.readout_error and out.gate_error == cal.gate_error
    assert out.timestamp == 10 * S


def test_drift_million_steps_stay_in_band():
    cfg = DriftConfig(0.2, 1 * S)
    cal = Calibration.uniform(2, 0.01, 0.005)
    rng = np.random.default_rng(9)
    lo, hi = cfg.gate_band
    ro_lo, ro_hi = cfg.readout_band
    seen_lo, seen_hi = 1.0, 0.0
    ro_seen_lo, ro_seen_hi = 1.0, 0.0
    for _ in range(10**6):
        cal = drift_step(cal, rng, cfg)
        g = cal.gate_error
        seen_lo, seen_hi = min(seen_lo, g), max(seen_hi, g)
        ro_seen_lo, ro_seen_hi = min(ro_seen_lo, *cal.readout_error), max(ro_seen_hi, *cal.readout_error)
    assert lo <= seen_lo and seen_hi <= hi
    assert seen_hi - seen_lo > 1e-3
    assert ro_lo <= ro_seen_lo and ro_seen_hi <= ro_hi


def test_drift_deterministic():
    def walk(seed):
        cal, rng = Calibration.uniform(3, 0.01, 0.005), np.random.default_rng(seed)
        out = []
        for _ in range(50):
            cal = drift_step(cal, rng, DriftConfig(0.1, 1))
            out.append(cal)
        return out

    assert walk(1) == walk(1) and walk(1) != walk(2)


def test_emit_syndromes():
    rng = np.random.default_rng(0)
    clean = emit_syndromes(500 * US, 100, 3, 0.0, rng, t0=7)
    assert [b.timestamp for b in clean] == [7 + 500 * US * i for i in range(1, 101)]
    assert all(b.bits == str(b.logical) * 3 for b in clean)
    noisy = emit_syndromes(1, 2000, 5, 0.2, rng)
    assert any(b.bits != str(b.logical) * 5 for b in noisy)
    for bad in (2, 4, 1):
        with pytest.raises(InvalidDistance):
            emit_syndromes(1, 1, bad, 0.1, rng)


# -- QSA ---------------------------------------------------------------------------


def device(qubits=16, overhead="0s", **kw):
    topo = build_topology({"nodes": [qpu_node(qubits=qubits, overhead=overhead), cpu_node("c0")], "links": [link("q0", "c0", "5us")]})
    k = Kernel(1, topo)
    return k, MockQpu(k, topo.node("q0"), Calibration.uniform(qubits), QpuTiming(1 * MS, 1 * US), **kw)


def test_qsa_lifecycle_fifo_and_timing():
    k, qpu = device(overhead="2ms")
    a = qpu.submit(sampler(shots=10))
    b = qpu.submit(sampler(shots=20))
    assert qpu.status(a) is JobStatus.QUEUED
    with pytest.raises(NotDone):
        qpu.results(a)
    run_process(k, (lambda: (yield qpu.when_done(b)))())
    ia, ib = qpu.job_info(a), qpu.job_info(b)
    assert ia["finished_at"] == 12 * MS
    assert ib["started_at"] == ia["finished_at"] and ib["finished_at"] == 12 * MS + 22 * MS
    assert qpu.results(b).shots == 20
    assert qpu.busy_intervals == [(0, 12 * MS), (12 * MS, 34 * MS)]
    assert qpu.registry.get("qpu.jobs_completed", {"device": "q0"}).latest == (34 * MS, 2)


def test_qsa_cancel_and_errors():
    k, qpu = device()
    a = qpu.submit(sampler(shots=10))
    b = qpu.submit(sampler(shots=10))
    assert qpu.cancel(b) is JobStatus.CANCELLED
    k.run()
    assert qpu.status(a) is JobStatus.DONE
    with pytest.raises(NotCancellable):
        qpu.cancel(a)
    with pytest.raises(UnknownJob):
        qpu.status("nope")


def test_qsa_rejects_oversized_circuit():
    _, qpu = device(qubits=24)
    with pytest.raises(ModelTooLarge):
        qpu.submit(sampler(sites=30, k=1))


def test_qsa_lazy_drift():
    k, qpu = device(drift=DriftConfig(0.5, 1 * S))
    before = qpu.calibration()
    k.run_until(10 * S)
    after = qpu.calibration()
    assert after.timestamp == 10 * S
    assert (after.gate_error, after.readout_error) != (before.gate_error, before.readout_error)
