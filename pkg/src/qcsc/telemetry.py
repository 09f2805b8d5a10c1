"""Metrics registry with virtual-time stamps and a text exposition format.

Exposition lines look like::

    # TYPE qpu.gate_error gauge
    qpu.gate_error{device="qpu0"} 0.003 1000

where the trailing field is the sample's virtual time in milliseconds.
"""
from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from qcsc.errors import CounterRegression, EmptyWindow, InvalidName
from qcsc.units import MS

_NAME_RE = re.compile(r"^[a-z0-9_.]+$")
_LINE_RE = re.compile(r"^([a-z0-9_.]+)(\{.*\})? (\S+) (-?\d+)$")
_LABEL_RE = re.compile(r'([a-zA-Z0-9_]+)="((?:[^"\\]|\\.)*)"')

QPU_METRICS = ("gate_error", "readout_error", "calibration_age", "queue_depth", "jobs_completed", "busy_seconds")


@dataclass
class Metric:
    name: str
    kind: str  # "counter" | "gauge"
    labels: tuple[tuple[str, str], ...]
    samples: list[tuple[int, float]] = field(default_factory=list)

    @property
    def latest(self) -> tuple[int, float]:
        return self.samples[-1]


def _label_key(labels: Mapping[str, str] | None) -> tuple[tuple[str, str], ...]:
    return tuple(sorted((str(k), str(v)) for k, v in (labels or {}).items()))


def format_value(value: float) -> str:
    if isinstance(value, int) or (isinstance(value, float) and value.is_integer() and abs(value) < 2**53):
        return str(int(value))
    return repr(float(value))


def format_labels(labels: Iterable[tuple[str, str]]) -> str:
    parts = [f'{k}="{v}"' for k, v in labels]
    return "{" + ",".join(parts) + "}" if parts else ""


class MetricsRegistry:
    def __init__(self):
        self._series: dict[tuple[str, tuple], Metric] = {}
        self._lock = threading.Lock()

    def observe(self, name: str, kind: str, labels: Mapping[str, str] | None, value: float, t: int) -> None:
        """Append ``(t, value)`` to the series; ``t`` is virtual ns."""
        if not _NAME_RE.match(name):
            raise InvalidName(f"metric name {name!r} must match [a-z0-9_.]+")
        kind = kind.lower()
        if kind not in ("counter", "gauge"):
            raise ValueError(f"unknown metric kind {kind!r}")
        key = (name, _label_key(labels))
        with self._lock:
            metric = self._series.get(key)
            if metric is None:
                metric = self._series[key] = Metric(name, kind, key[1])
            elif metric.kind != kind:
                raise ValueError(f"{name} already registered as {metric.kind}")
            if kind == "counter" and metric.samples and value < metric.latest[1]:
                raise CounterRegression(f"{name}: {value} < {metric.latest[1]}")
            metric.samples.append((t, value))

    def inc(self, name: str, labels: Mapping[str, str] | None, t: int, amount: float = 1) -> None:
        metric = self.get(name, labels)
        self.observe(name, "counter", labels, (metric.latest[1] if metric else 0) + amount, t)

    def get(self, name: str, labels: Mapping[str, str] | None = None) -> Metric | None:
        return self._series.get((name, _label_key(labels)))

    def series(self) -> list[Metric]:
        return [self._series[k] for k in sorted(self._series)]

    def names(self) -> set[str]:
        return {name for name, _ in self._series}

    def export_text(self) -> str:
        lines: list[str] = []
        last_name = None
        for metric in self.series():
            if metric.name != last_name:
                lines.append(f"# TYPE {metric.name} {metric.kind}")
                last_name = metric.name
            t, value = metric.latest
            lines.append(f"{metric.name}{format_labels(metric.labels)} {format_value(value)} {t // MS}")
        return "".join(line + "\n" for line in lines)

    def snapshot(self) -> dict[str, float]:
        return {
            f"{m.name}{format_labels(m.labels)}": m.latest[1] for m in self.series()
        }


def parse_text(text: str) -> dict[tuple[str, tuple[tuple[str, str], ...]], tuple[str, float, int]]:
    """Parse an exposition document into ``{(name, labels): (kind, value, timestamp_ms)}``."""
    kinds: dict[str, str] = {}
    out = {}
    for line in text.splitlines():
        if not line:
            continue
        if line.startswith("# TYPE "):
            _, _, name, kind = line.split(" ")
            kinds[name] = kind
            continue
        m = _LINE_RE.match(line)
        if not m:
            raise ValueError(f"bad exposition line: {line!r}")
        name, labels, value, ts = m.groups()
        key = (name, tuple(_LABEL_RE.findall(labels or "")))
        out[key] = (kinds.get(name, "untyped"), float(value), int(ts))
    return out


def busy_time(intervals: Iterable[tuple[int, int]], start: int, end: int) -> int:
    """Total length of the union of ``intervals`` clipped to [start, end)."""
    clipped = sorted((max(a, start), min(b, end)) for a, b in intervals if b > start and a < end)
    total, cur_a, cur_b = 0, None, None
    for a, b in clipped:
        if cur_b is None or a > cur_b:
            if cur_b is not None:
                total += cur_b - cur_a
            cur_a, cur_b = a, b
        else:
            cur_b = max(cur_b, b)
    if cur_b is not None:
        total += cur_b - cur_a
    return total


def qpu_saturation(intervals: Iterable[tuple[int, int]], window: tuple[int, int]) -> float:
    """Busy QPU time inside ``window`` divided by the window length."""
    start, end = window
    if end <= start:
        raise EmptyWindow(f"window [{start}, {end}) is empty")
    return busy_time(intervals, start, end) / (end - start)
