from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def qpu_node(id="q0", qubits=16, zone="z", overhead="0s"):
    return {"id": id, "kind": "QPU", "qpu_qubits": qubits, "residency_zone": zone, "service_overhead": overhead}


def cpu_node(id, cores=32, gpus=0, zone="z", kind="ScaleOutNode", overhead="0s"):
    return {"id": id, "kind": kind, "cpu_cores": cores, "gpu_units": gpus, "residency_zone": zone, "service_overhead": overhead}


def link(a, b, latency, bandwidth=1e10):
    return {"endpoints": [a, b], "latency": latency, "bandwidth": bandwidth}


def star(n_nodes=4, latency="5us", bandwidth=1e10, qpu_zone="z", node_zone="z", qubits=16):
    """One QPU linked to ``n_nodes`` scale-out nodes that are fully meshed."""
    ids = [f"c{i}" for i in range(n_nodes)]
    nodes = [qpu_node(qubits=qubits, zone=qpu_zone)] + [cpu_node(i, zone=node_zone) for i in ids]
    links = [link("q0", i, latency, bandwidth) for i in ids]
    links += [link(a, b, "5us") for k, a in enumerate(ids) for b in ids[k + 1 :]]
    return {"nodes": nodes, "links": links}


def direct_session(calibration=None, qubits=16, latency="5us", seed=0, window=None, timing=None):
    """Kernel, QRMI and an AllocationSession holding q0, with c0 as the data origin."""
    from qcsc.core import build_topology
    from qcsc.qpu import Calibration, MockQpu, QpuTiming
    from qcsc.qrmi import Qrmi
    from qcsc.sim import Kernel
    from qcsc.workloads import AllocationSession

    topo = build_topology(star(1, latency=latency, qubits=qubits))
    k = Kernel(seed, topo)
    cal = calibration or Calibration.uniform(qubits)
    qpu = MockQpu(k, topo.node("q0"), cal, timing or QpuTiming())
    qrmi = Qrmi(k, [qpu])
    token = qrmi.acquire("q0", "test", 10**15)
    return k, qrmi, AllocationSession(k, qrmi, token, "c0", window)
