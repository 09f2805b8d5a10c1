import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import star
from qcsc.core import build_topology
from qcsc.errors import CouplingInfeasible
from qcsc.qpu import emit_syndromes
from qcsc.qpu.device import SyndromeBatch
from qcsc.sim import Kernel, run_process
from qcsc.units import US
from qcsc.workloads import (
    ClassicalCost,
    logical_error_closed_form,
    majority_decode,
    outer_decoder_loop,
    outer_decoder_process,
    syndrome_stream_decode,
)
from qcsc.workloads.qec import batch_bytes


def test_majority_decode():
    assert majority_decode("000") == 0 and majority_decode("010") == 0
    assert majority_decode("110") == 1 and majority_decode("11111") == 1


@given(st.sampled_from([3, 5, 7, 9]), st.integers(0, 1), st.data())
def test_single_flip_corrected(d, logical, data):
    bits = [str(logical)] * d
    i = data.draw(st.integers(0, d - 1))
    bits[i] = str(1 - logical)
    assert majority_decode("".join(bits)) == logical


def test_closed_form():
    assert logical_error_closed_form(3, 0.1) == pytest.approx(3 * 0.01 * 0.9 + 0.001)
    assert logical_error_closed_form(3, 0.0) == 0.0
    assert logical_error_closed_form(5, 0.5) == pytest.approx(0.5)


@given(st.sampled_from([3, 5, 7]), st.floats(0.0, 0.49))
def test_closed_form_below_physical(d, p):
    assert logical_error_closed_form(d, p) <= p + 1e-15


def stream(batches, chunk=1000, latency="5us", cost=None):
    topo = build_topology(star(1, latency=latency))
    k = Kernel(0, topo)
    kwargs = {} if cost is None else {"cost": cost}
    return run_process(k, syndrome_stream_decode(batches, "q0", "c0", k, chunk, **kwargs))


def test_zero_noise_no_errors():
    batches = emit_syndromes(1 * US, 500, 3, 0.0, np.random.default_rng(0))
    r = stream(batches)
    assert r.errors == 0 and r.logical_error_rate == 0.0 and r.batches == 500


def test_stream_rate_within_three_sigma():
    n = 50_000
    batches = emit_syndromes(1 * US, n, 3, 0.1, np.random.default_rng(3))
    r = stream(batches, chunk=5000)
    p = logical_error_closed_form(3, 0.1)
    assert abs(r.logical_error_rate - p) <= 3 * np.sqrt(p * (1 - p) / n)


def test_stream_timing_and_bytes():
    batches = [SyndromeBatch(i, "010", 0) for i in range(10)]
    cost = ClassicalCost(base=1_000, per_unit={"batches": 100})
    r = stream(batches, chunk=4, cost=cost)
    assert r.transfer_bytes == 10 * batch_bytes(3) == 90
    # chunks of 4, 4, 2 decode back to back after the first arrives
    first = 5 * US + -(-4 * 9 * 10**9 // 10**10)  # serialization rounds up
    assert r.end - r.start == first + 3 * 1_000 + 10 * 100
    assert r.errors == 0


def test_empty_stream():
    r = stream([])
    assert r.batches == 0 and r.transfer_bytes == 0


def outer_topo(latency="10us"):
    return build_topology(star(1, latency=latency))


@pytest.mark.parametrize("period,misses", [(500 * US, 0), (100 * US, 10_000)])
def test_outer_loop_closed_form(period, misses):
    r = outer_decoder_loop(period, 100 * US, outer_topo(), "q0", "c0", 10_000)
    assert r.response_time == 2 * 10 * US + 100 * US
    assert r.misses == misses


@pytest.mark.parametrize("period,misses", [(500 * US, 0), (100 * US, 2_000)])
def test_outer_loop_process_matches_closed_form(period, misses):
    topo = outer_topo()
    k = Kernel(0, topo)
    r = run_process(k, outer_decoder_process(k, "q0", "c0", period, 100 * US, 2_000))
    assert r.misses == misses
    assert r.max_response == r.response_time == 120 * US


def test_outer_loop_boundary_is_not_a_miss():
    assert outer_decoder_loop(120 * US, 100 * US, outer_topo(), "q0", "c0", 10).misses == 0
    assert outer_decoder_loop(120 * US - 1, 100 * US, outer_topo(), "q0", "c0", 10).misses == 10


def test_outer_loop_on_slow_link_rejected():
    with pytest.raises(CouplingInfeasible):
        outer_decoder_loop(500 * US, 100 * US, outer_topo("1s"), "q0", "c0", 10)
    k = Kernel(0, outer_topo("1s"))
    with pytest.raises(CouplingInfeasible):
        run_process(k, outer_decoder_process(k, "q0", "c0", 500 * US, 100 * US, 10))
