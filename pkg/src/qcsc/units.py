"""Virtual-time units.

All durations and timestamps inside the simulator are integer nanoseconds.
Scenario files may use strings such as ``"5us"`` or ``"1.5s"``; bare numbers
are read as seconds.
"""
from __future__ import annotations

import math
import re

NS = 1
US = 1_000
MS = 1_000_000
S = 1_000_000_000
MIN = 60 * S
H = 3600 * S

_SUFFIX = {"ns": NS, "us": US, "µs": US, "ms": MS, "s": S, "min": MIN, "h": H}
_DURATION_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(ns|us|µs|ms|s|min|h)?\s*$")


def parse_duration(value: str | int | float) -> int:
    """Return ``value`` as integer nanoseconds."""
    if isinstance(value, bool):
        raise ValueError(f"not a duration: {value!r}")
    if isinstance(value, (int, float)):
        return round(value * S)
    m = _DURATION_RE.match(value)
    if not m:
        raise ValueError(f"not a duration: {value!r}")
    number, suffix = m.groups()
    return round(float(number) * _SUFFIX[suffix or "s"])


def seconds(ns: int) -> float:
    return ns / S


def transfer_ns(size: int, bandwidth: float) -> int:
    """Serialization delay of ``size`` bytes at ``bandwidth`` bytes/s, rounded up."""
    if size <= 0:
        return 0
    return math.ceil(size * S / bandwidth - 1e-9)
