import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import cpu_node, link, qpu_node
from qcsc.core import build_topology
from qcsc.errors import (
    AlreadyReleased,
    DeviceRejected,
    ModelTooLarge,
    NotCancellable,
    NotDone,
    ResourceHeld,
    ResourceInaccessible,
    TokenExpired,
    UnknownJob,
    UnknownResource,
    UnknownToken,
)
from qcsc.qpu import Calibration, CircuitKind, CircuitSpec, MockQpu, QpuTiming, SampleSet, ToyModel
from qcsc.qrmi import Action, JobState, Qrmi, trajectory_is_legal
from qcsc.sim import Kernel
from qcsc.units import MS, S, US


def system(n_qpus=2, qubits=24):
    ids = [f"q{i}" for i in range(n_qpus)]
    nodes = [qpu_node(i, qubits) for i in ids] + [cpu_node("c0")]
    topo = build_topology({"nodes": nodes, "links": [link(i, "c0", "5us") for i in ids]})
    k = Kernel(3, topo)
    qpus = [MockQpu(k, topo.node(i), Calibration.uniform(qubits), QpuTiming(1 * MS, 1 * US)) for i in ids]
    return k, qpus, Qrmi(k, qpus)


def circuit(sites=4, shots=10):
    return CircuitSpec(sites, CircuitKind.GROUND_STATE, shots, 0, ToyModel(sites, 1.0, sites // 2))


def test_list_resources():
    _, qpus, q = system()
    res = q.list_resources()
    assert [(r.resource_id, r.kind, r.qubits, r.accessible) for r in res] == [("q0", "QPU", 24, True), ("q1", "QPU", 24, True)]
    qpus[1].set_maintenance(True)
    assert [r.accessible for r in q.list_resources()] == [True, False]
    assert Qrmi(Kernel()).list_resources() == []


def test_acquire_and_release():
    k, qpus, q = system()
    k.run_until(5 * S)
    tok = q.acquire("q0", "alice", 10 * S)
    assert tok.expires_at == 15 * S
    with pytest.raises(ResourceHeld):
        q.acquire("q0", "bob", 1 * S)
    q.release(tok)
    q.acquire("q0", "bob", 1 * S)
    with pytest.raises(AlreadyReleased):
        q.release(tok)
    qpus[1].set_maintenance(True)
    with pytest.raises(ResourceInaccessible):
        q.acquire("q1", "alice", 1 * S)
    with pytest.raises(UnknownResource):
        q.acquire("q9", "alice", 1 * S)
    with pytest.raises(UnknownToken):
        q.release("tok-nope")


def test_expired_token():
    k, _, q = system()
    tok = q.acquire("q0", "alice", 1 * S)
    k.run_until(2 * S)
    with pytest.raises(TokenExpired):
        q.submit_job(tok, circuit())
    with pytest.raises(AlreadyReleased):
        q.release(tok)
    assert tok.released_at == 1 * S
    q.acquire("q0", "bob", 1 * S)


def test_submit_and_fetch():
    k, _, q = system()
    tok = q.acquire("q0", "alice", 10 * S)
    h = q.submit_job(tok, circuit(shots=25))
    assert h.state is JobState.QUEUED
    with pytest.raises(NotDone):
        q.job_lifecycle(h, Action.FETCH_RESULTS)
    k.run_until(1 * S)
    assert q.job_lifecycle(h, Action.STATUS) is JobState.DONE
    res = q.job_lifecycle(h, "FetchResults")
    assert isinstance(res, SampleSet) and res.shots == 25
    with pytest.raises(NotCancellable):
        q.job_lifecycle(h, Action.CANCEL)
    assert trajectory_is_legal(h.history)
    assert [s for _, s in h.history] == [JobState.QUEUED, JobState.RUNNING, JobState.DONE]


def test_cancel_queued():
    k, _, q = system()
    tok = q.acquire("q0", "alice", 10 * S)
    q.submit_job(tok, circuit())
    second = q.submit_job(tok, circuit())
    assert q.job_lifecycle(second, Action.CANCEL) is JobState.CANCELLED
    assert trajectory_is_legal(second.history)
    with pytest.raises(UnknownJob):
        q.job_lifecycle("q0-j99999", Action.STATUS)


def test_device_rejection_propagates():
    _, _, q = system(qubits=24)
    tok = q.acquire("q0", "alice", 10 * S)
    with pytest.raises(DeviceRejected) as info:
        q.submit_job(tok, circuit(sites=30))
    assert isinstance(info.value.__cause__, ModelTooLarge)


def test_expiry_cancels_inflight_jobs():
    k, _, q = system()
    tok = q.acquire("q0", "alice", 5 * MS)
    h = q.submit_job(tok, circuit(shots=1000))
    k.run_until(2 * S)
    assert q.job_lifecycle(h, Action.STATUS) is JobState.CANCELLED
    assert trajectory_is_legal(h.history)


def test_trajectory_checker_rejects_illegal():
    assert not trajectory_is_legal([(0, JobState.RUNNING)])
    assert not trajectory_is_legal([(0, JobState.QUEUED), (1, JobState.DONE)])
    assert not trajectory_is_legal([])


ops = st.lists(st.tuples(st.sampled_from(["acquire", "release", "advance"]), st.integers(0, 1), st.integers(1, 5)), max_size=40)


@given(ops)
def test_at_most_one_live_token_per_resource(script):
    k, _, q = system()
    live = {}
    for op, r, amount in script:
        rid = f"q{r}"
        if op == "acquire":
            try:
                live[rid] = q.acquire(rid, "h", amount * S)
            except ResourceHeld:
                pass
        elif op == "release" and rid in live:
            try:
                q.release(live[rid])
            except AlreadyReleased:
                pass
        else:
            k.run_until(k.now + amount * S)
        for res in ("q0", "q1"):
            n_live = sum(t.live(k.now) for t in q.tokens() if t.resource_id == res)
            assert n_live <= 1
