import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcsc.errors import CounterRegression, EmptyWindow, InvalidName
from qcsc.telemetry import MetricsRegistry, busy_time, parse_text, qpu_saturation
from qcsc.units import MS, S


def test_counter_monotone():
    r = MetricsRegistry()
    for v in (0, 1, 2):
        r.observe("qpu.jobs_completed", "counter", {"device": "q0"}, v, v)
    with pytest.raises(CounterRegression):
        r.observe("qpu.jobs_completed", "counter", {"device": "q0"}, 1, 3)


def test_gauge_free():
    r = MetricsRegistry()
    for t, v in enumerate((0.003, 0.001, 0.004)):
        r.observe("qpu.gate_error", "gauge", {"device": "q0"}, v, t)
    assert r.get("qpu.gate_error", {"device": "q0"}).latest == (2, 0.004)


def test_invalid_name():
    with pytest.raises(InvalidName):
        MetricsRegistry().observe("Bad-Name", "gauge", None, 1, 0)


def test_export_format():
    r = MetricsRegistry()
    r.observe("qpu.gate_error", "gauge", {"device": "qpu0"}, 0.003, 1 * S)
    assert r.export_text() == '# TYPE qpu.gate_error gauge\nqpu.gate_error{device="qpu0"} 0.003 1000\n'
    assert MetricsRegistry().export_text() == ""


def test_inc():
    r = MetricsRegistry()
    r.inc("sched.jobs", None, 0)
    r.inc("sched.jobs", None, 5, 2)
    assert r.get("sched.jobs").latest == (5, 3)


@pytest.mark.parametrize(
    "intervals,window,expected",
    [([(0, 60 * S)], (0, 60 * S), 1.0), ([], (0, 60 * S), 0.0), ([(0, 30 * S)], (0, 60 * S), 0.5), ([(10, 20), (15, 30)], (0, 40), 0.5)],
)
def test_saturation(intervals, window, expected):
    assert qpu_saturation(intervals, window) == expected


def test_empty_window():
    with pytest.raises(EmptyWindow):
        qpu_saturation([], (5, 5))


names = st.from_regex(r"[a-z][a-z0-9_.]{0,12}", fullmatch=True)
label_values = st.text(alphabet="abcxyz019_-", min_size=1, max_size=6)
values = st.one_of(st.integers(-(10**9), 10**9), st.floats(-1e6, 1e6, allow_nan=False))


@given(st.lists(st.tuples(names, label_values, values, st.integers(0, 10**15)), max_size=20))
def test_export_parse_roundtrip(obs):
    r = MetricsRegistry()
    latest = {}
    for name, dev, value, t in obs:
        key = (name, (("device", dev),))
        r.observe(name, "gauge", {"device": dev}, value, t)
        latest[key] = (value, t)
    parsed = parse_text(r.export_text())
    assert set(parsed) == set(latest)
    for key, (value, t) in latest.items():
        kind, v, ts = parsed[key]
        assert kind == "gauge" and v == pytest.approx(float(value)) and ts == t // MS


intervals = st.lists(st.tuples(st.integers(0, 1000), st.integers(0, 1000)).map(sorted).map(tuple), max_size=15)


@given(intervals, st.integers(0, 1000), st.integers(1, 1000))
def test_saturation_bounded_and_matches_bitmap(iv, start, length):
    end = start + length
    sat = qpu_saturation(iv, (start, end))
    assert 0.0 <= sat <= 1.0
    covered = sum(any(a <= t < b for a, b in iv) for t in range(start, end))
    assert busy_time(iv, start, end) == covered
