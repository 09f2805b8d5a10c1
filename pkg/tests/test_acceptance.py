"""Acceptance suite: one test per acceptance criterion, each at its stated tolerance."""
import time

import numpy as np
import pytest

from conftest import direct_session
from qcsc.core import build_topology, path_latency
from qcsc.errors import ValidationError
from qcsc.qpu import Calibration, CircuitKind, CircuitSpec, ToyModel, emit_syndromes, solve_sector
from qcsc.qpu.model import sector_states, to_bitstring
from qcsc.scenarios import bundled_scenarios, load_scenario, parse_scenario, run_scenario, validate_scenario
from qcsc.scenarios.loader import read_json, resolve_scenario
from qcsc.scheduler.invariants import run_random_scenario
from qcsc.sim import Kernel, run_process
from qcsc.units import US
from qcsc.workloads import (
    ConfusionMatrix,
    apply_confusion,
    logical_error_closed_form,
    mitigate_vector,
    outer_decoder_loop,
    outer_decoder_process,
    sqd_run,
    syndrome_stream_decode,
)


def bundled_doc(name):
    return read_json(resolve_scenario(name), "scenario")


def with_params(name, **params):
    doc = bundled_doc(name)
    doc["workloads"][0]["params"].update(params)
    return doc


def test_criterion_01_sqd_oracle_equivalence():
    model = ToyModel(8, 1.0, 4)
    full = [to_bitstring(x, 8) for x in sector_states(8, 4)]
    shots = 200_000  # covers every sector state of the exact ground state
    t0 = time.perf_counter()
    k, _, session = direct_session(Calibration.uniform(16))
    circ = CircuitSpec(8, CircuitKind.GROUND_STATE, shots, 16, model)
    state = run_process(k, sqd_run(model, circ, shots, 70, 5, 1e-12, session, k.rng("sqd")))
    elapsed = time.perf_counter() - t0
    assert sorted(state.subspace) == sorted(full)
    assert abs(state.energy - solve_sector(model).energy) < 1e-9
    assert elapsed < 5.0


def test_criterion_02_sqd_under_noise():
    model = ToyModel(8, 1.0, 4)
    exact = solve_sector(model).energy
    k, _, session = direct_session(Calibration.uniform(16, gate_error=1e-2), seed=2024)
    circ = CircuitSpec(8, CircuitKind.GROUND_STATE, 2000, 16, model)
    state = run_process(k, sqd_run(model, circ, 2000, 50, 10, 1e-9, session, k.rng("sqd")))
    assert state.energy >= exact
    assert state.energy - exact <= 1e-2
    assert state.trace and all(it.energy >= exact for it in state.trace)


def test_criterion_03_closed_loop_convergence():
    report = run_scenario(load_scenario("closed_loop_sqd")).report
    w = report["workloads"]["vqe"]
    t = w["trace"]
    assert report["status"] == "ok"
    assert abs(t["energy"] - solve_sector(ToyModel(8, 1.0, 4)).energy) < 1e-3
    assert t["outer_iterations"] <= 20
    (job,) = [j for j in report["jobs"] if j["job"] in w["jobs"]]
    alloc = job["allocation"]
    assert alloc["qpu"] == "q0" and list(t["window"]) == [alloc["start"], alloc["end"]]
    lo, hi = alloc["start"], alloc["end"]
    assert t["phases"] and t["phases_inside_window"]
    assert all(lo <= a <= b <= hi for _, a, b in t["phases"])


LOOSE_OK = ["sqd_batch", "qec_offline"]
LOOSE_REJECTED = {"closed_loop_sqd": "CouplingInfeasible", "error_mitigation": "ResidencyViolation", "qec_outer_decoder": "CouplingInfeasible"}


def test_criterion_04_coupling_matrix():
    assert sorted(LOOSE_OK + list(LOOSE_REJECTED)) == bundled_scenarios()
    for name in LOOSE_OK:
        s = load_scenario(name, topology="loose")
        assert validate_scenario(s) == []
        assert run_scenario(s).report["status"] == "ok"
    for name, kind in LOOSE_REJECTED.items():
        loose = load_scenario(name, topology="loose")
        assert [d.kind for d in validate_scenario(loose)] == [kind]
        with pytest.raises(ValidationError):
            run_scenario(loose)
        tight = run_scenario(load_scenario(name, topology="tight")).report
        assert tight["status"] == "ok" and all(j["outcome"] == "Done" for j in tight["jobs"])


def test_criterion_05_outer_loop_deadlines():
    topo = build_topology(load_scenario("qec_outer_decoder").topology)
    assert path_latency(topo, "q0", "c0") == 10 * US
    for period, expected in ((500 * US, 0), (100 * US, 10_000)):
        closed = outer_decoder_loop(period, 100 * US, topo, "q0", "c0", 10_000)
        k = Kernel(0, topo)
        simulated = run_process(k, outer_decoder_process(k, "q0", "c0", period, 100 * US, 10_000))
        assert closed.misses == simulated.misses == expected
        doc = with_params("qec_outer_decoder", period=f"{period // 1000}us")
        trace = run_scenario(parse_scenario(doc)).report["workloads"]["outer"]["trace"]
        assert trace["batches"] == 10_000 and trace["misses"] == expected


def test_criterion_06_decoder_statistics():
    n, p = 100_000, 0.1
    expected = logical_error_closed_form(3, p)
    assert expected == pytest.approx(3 * p**2 * (1 - p) + p**3) and expected == pytest.approx(0.028)
    sigma = np.sqrt(expected * (1 - expected) / n)
    batches = emit_syndromes(1 * US, n, 3, p, np.random.default_rng(6))
    k = Kernel(0, build_topology(load_scenario("qec_offline").topology))
    r = run_process(k, syndrome_stream_decode(batches, "q0", "c0", k, chunk=10_000))
    assert r.batches == n
    assert abs(r.logical_error_rate - expected) <= 3 * sigma
    doc = with_params("qec_offline", rounds=n, chunk=10_000)
    t = run_scenario(parse_scenario(doc)).report["workloads"]["decode"]["trace"]
    assert t["batches"] == n and abs(t["logical_error_rate"] - expected) <= 3 * sigma


def test_criterion_07_scheduler_invariants():
    failures = []
    for seed in range(100):
        report = run_random_scenario(seed, jobs=200)
        assert report.jobs == 200
        if not report.ok:
            failures.append((seed, report))
    assert failures == []


def test_criterion_08_determinism():
    for name in bundled_scenarios():
        a = run_scenario(load_scenario(name))
        b = run_scenario(load_scenario(name))
        assert a.report_json() == b.report_json()
        assert a.trace == b.trace and a.trace
        assert a.metrics == b.metrics and a.metrics
        assert a.scheduler_log == b.scheduler_log


def test_criterion_09_mitigation_roundtrip():
    rng = np.random.default_rng(9)
    worst_err, worst_sum = 0.0, 0.0
    for _ in range(100):
        n = int(rng.integers(1, 7))
        mats = []
        while len(mats) < n:
            m = ConfusionMatrix.asymmetric(*rng.uniform(0.0, 0.5, size=2))
            if m.det > 0.1:
                mats.append(m)
        p = rng.dirichlet(np.ones(2**n))
        back = mitigate_vector(apply_confusion(p, mats), mats)
        worst_err = max(worst_err, float(np.max(np.abs(back - p))))
        worst_sum = max(worst_sum, abs(back.sum() - 1.0))
    assert worst_err < 1e-10
    assert worst_sum < 1e-12


def test_criterion_10_saturation_contrast():
    batch = run_scenario(load_scenario("sqd_batch", topology="tight")).report
    coupled = run_scenario(load_scenario("closed_loop_sqd", topology="tight")).report
    assert batch["topology"] == coupled["topology"] == "tight"
    s_batch = batch["workloads"]["sqd"]["qpu_saturation"]
    s_coupled = coupled["workloads"]["vqe"]["qpu_saturation"]
    assert s_batch is not None and s_coupled is not None
    assert s_coupled > s_batch
