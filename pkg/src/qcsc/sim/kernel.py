"""Deterministic discrete-event kernel.

Events are ordered by ``(timestamp, sequence)``; the sequence number is
assigned at post time so two events at the same instant fire in post order.
On top of plain handler events the kernel runs generator *processes*: a
process yields a :class:`Signal` and is resumed (by an event) when that
signal fires.
"""
from __future__ import annotations

import hashlib
import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Generator, Iterable

import numpy as np

from qcsc.core.topology import Topology, transfer_time
from qcsc.errors import HandlerFailure, TimestampInPast

ProcessGen = Generator["Signal", Any, Any]


@dataclass(order=True)
class Event:
    timestamp: int
    sequence: int = field(default=-1)
    target: str = field(default="", compare=False)
    payload: Any = field(default=None, compare=False)

    @property
    def payload_kind(self) -> str:
        if isinstance(self.payload, dict):
            return str(self.payload.get("kind", "message"))
        if self.payload is None:
            return "none"
        return type(self.payload).__name__


@dataclass(frozen=True)
class RunStats:
    events_processed: int
    final_time: int


def rng_stream(seed: int, stream_id: str) -> np.random.Generator:
    """Independent generator for ``(seed, stream_id)``; stable across processes."""
    digest = hashlib.sha256(stream_id.encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *words]))


class Signal:
    """One-shot future. Processes wait on it by yielding it."""

    def __init__(self, kernel: "Kernel", name: str = "signal"):
        self.kernel = kernel
        self.name = name
        self.fired = False
        self.value: Any = None
        self.error: BaseException | None = None
        self._waiters: list[Callable[["Signal"], None]] = []

    def on_fire(self, callback: Callable[["Signal"], None]) -> None:
        if self.fired:
            callback(self)
        else:
            self._waiters.append(callback)

    def succeed(self, value: Any = None) -> None:
        self._fire(value, None)

    def fail(self, error: BaseException) -> None:
        self._fire(None, error)

    def _fire(self, value, error) -> None:
        if self.fired:
            raise RuntimeError(f"signal {self.name!r} fired twice")
        self.fired, self.value, self.error = True, value, error
        waiters, self._waiters = self._waiters, []
        for cb in waiters:
            cb(self)

    def __repr__(self) -> str:
        return f"<Signal {self.name} fired={self.fired}>"


class Interrupt(Exception):
    """Thrown into a process by :meth:`Process.interrupt`."""

    def __init__(self, cause: Any = None):
        super().__init__(cause)
        self.cause = cause


class Process(Signal):
    """A running generator; fires with its return value when it finishes."""

    def __init__(self, kernel: "Kernel", name: str, gen: ProcessGen):
        super().__init__(kernel, name)
        self._gen = gen
        self._waiting: Signal | None = None
        self.target = f"proc:{name}"

    def interrupt(self, cause: Any = None) -> None:
        if self.fired:
            return
        self._waiting = None
        self.kernel.post(Event(self.kernel.now, target=self.target, payload={"kind": "interrupt", "proc": self, "cause": cause}))

    def _resume(self, send: Any = None, throw: BaseException | None = None) -> None:
        try:
            target = self._gen.throw(throw) if throw is not None else self._gen.send(send)
        except StopIteration as stop:
            self.succeed(stop.value)
            return
        except BaseException as exc:  # noqa: BLE001 - surfaced to waiters
            self.fail(exc)
            return
        if not isinstance(target, Signal):
            self._gen.close()
            self.fail(TypeError(f"process {self.name!r} yielded {target!r}, expected a Signal"))
            return
        self._waiting = target
        target.on_fire(self._wake)

    def _wake(self, sig: Signal) -> None:
        if self._waiting is not sig:
            return  # interrupted while waiting
        self.kernel.post(Event(self.kernel.now, target=self.target, payload={"kind": "resume", "proc": self, "signal": sig}))


class Kernel:
    """Single virtual clock and an event queue; single-threaded by contract."""

    def __init__(self, seed: int = 0, topology: Topology | None = None, record_trace: bool = False):
        self.seed = seed
        self.topology = topology
        self.now = 0
        self._queue: list[Event] = []
        self._seq = itertools.count()
        self._handlers: dict[str, Callable[[Event], None]] = {}
        self._hooks: list[Callable[[Event], None]] = []
        self._rngs: dict[str, np.random.Generator] = {}
        self._stopped = False
        self.events_processed = 0
        self.trace: list[tuple[int, int, str, str]] | None = [] if record_trace else None

    # -- events -----------------------------------------------------------
    def register(self, handler_id: str, handler: Callable[[Event], None]) -> None:
        self._handlers[handler_id] = handler

    def add_hook(self, hook: Callable[[Event], None]) -> None:
        """Call ``hook(event)`` after every processed event."""
        self._hooks.append(hook)

    def post(self, event: Event) -> Event:
        if event.timestamp < self.now:
            raise TimestampInPast(f"event at {event.timestamp}ns is before now={self.now}ns")
        event.sequence = next(self._seq)
        heapq.heappush(self._queue, event)
        return event

    def schedule(self, delay: int, target: str, payload: Any = None) -> Event:
        return self.post(Event(self.now + int(delay), target=target, payload=payload))

    def stop(self) -> None:
        """End the current ``run_until`` after the event being processed."""
        self._stopped = True

    @property
    def pending(self) -> int:
        return len(self._queue)

    def peek(self) -> int | None:
        return self._queue[0].timestamp if self._queue else None

    def run_until(self, t_end: int | float) -> RunStats:
        """Process every event with timestamp <= ``t_end``.

        The clock ends at ``t_end`` for a finite horizon; with ``t_end=inf``
        (or after :meth:`stop`) it stays at the last processed event.
        """
        processed = 0
        self._stopped = False
        while self._queue and self._queue[0].timestamp <= t_end and not self._stopped:
            event = heapq.heappop(self._queue)
            assert event.timestamp >= self.now, "event timestamps must be non-decreasing"
            self.now = event.timestamp
            self._dispatch(event)
            processed += 1
            self.events_processed += 1
            if self.trace is not None:
                self.trace.append((event.timestamp, event.sequence, event.target, event.payload_kind))
            for hook in self._hooks:
                hook(event)
        if not self._stopped and t_end != float("inf") and t_end > self.now:
            self.now = int(t_end)
        return RunStats(processed, self.now)

    def run(self) -> RunStats:
        return self.run_until(float("inf"))

    def _dispatch(self, event: Event) -> None:
        payload = event.payload
        if isinstance(payload, dict) and "proc" in payload:
            proc: Process = payload["proc"]
            if proc.fired:
                return
            if payload["kind"] == "interrupt":
                proc._resume(throw=Interrupt(payload["cause"]))
            else:
                sig: Signal = payload["signal"]
                if payload["kind"] == "resume" and proc._waiting is not sig:
                    return
                if sig.error is not None:
                    proc._resume(throw=sig.error)
                else:
                    proc._resume(send=sig.value)
            return
        if isinstance(payload, dict) and "signal" in payload and event.target.startswith("timer:"):
            payload["signal"].succeed(payload.get("value"))
            return
        handler = self._handlers.get(event.target)
        if handler is None:
            raise HandlerFailure(event.target, event, KeyError("no handler registered"))
        try:
            handler(event)
        except HandlerFailure:
            raise
        except Exception as exc:
            raise HandlerFailure(event.target, event, exc) from exc

    def write_trace(self, path) -> None:
        with open(path, "w") as fh:
            fh.writelines(trace_lines(self.trace or []))

    # -- processes --------------------------------------------------------
    def signal(self, name: str = "signal") -> Signal:
        return Signal(self, name)

    def timeout(self, delay: int, value: Any = None, name: str = "timeout") -> Signal:
        """Signal that fires ``delay`` ns from now."""
        sig = Signal(self, name)
        self.post(Event(self.now + int(delay), target=f"timer:{name}", payload={"kind": "timer", "signal": sig, "value": value}))
        return sig

    def spawn(self, name: str, gen: ProcessGen) -> Process:
        proc = Process(self, name, gen)
        self.post(Event(self.now, target=proc.target, payload={"kind": "start", "proc": proc, "signal": _STARTED}))
        return proc

    def all_of(self, signals: Iterable[Signal], name: str = "all_of") -> Signal:
        """Signal firing with the list of values once every input has fired."""
        signals = list(signals)
        out = Signal(self, name)
        if not signals:
            out.succeed([])
            return out
        remaining = [len(signals)]

        def done(sig: Signal) -> None:
            if out.fired:
                return
            if sig.error is not None:
                out.fail(sig.error)
                return
            remaining[0] -= 1
            if remaining[0] == 0:
                out.succeed([s.value for s in signals])

        for s in signals:
            s.on_fire(done)
        return out

    # -- randomness and transfers -------------------------------------------
    def rng(self, stream_id: str) -> np.random.Generator:
        if stream_id not in self._rngs:
            self._rngs[stream_id] = rng_stream(self.seed, stream_id)
        return self._rngs[stream_id]

    def transfer(self, src: str, dst: str, size: int) -> int:
        """Delivery timestamp for ``size`` bytes sent now from ``src`` to ``dst``."""
        if self.topology is None:
            raise RuntimeError("kernel has no topology")
        return self.now + transfer_time(self.topology, src, dst, size)

    def send(self, src: str, dst: str, size: int, value: Any = None) -> Signal:
        """Signal that fires at the delivery time of a ``size``-byte transfer."""
        return self.timeout(self.transfer(src, dst, size) - self.now, value, name=f"xfer:{src}->{dst}")


class _Started(Signal):
    def __init__(self):
        self.fired = True
        self.value = None
        self.error = None
        self.name = "start"


_STARTED = _Started()


def run_process(kernel: Kernel, gen: ProcessGen, name: str = "main") -> Any:
    """Spawn ``gen``, run the kernel until it finishes, and return its value."""
    proc = kernel.spawn(name, gen)
    proc.on_fire(lambda _s: kernel.stop())
    kernel.run()
    if not proc.fired:
        raise RuntimeError(f"process {name!r} deadlocked (queue drained)")
    if proc.error is not None:
        raise proc.error
    return proc.value


def trace_lines(trace: Iterable[tuple[int, int, str, str]]) -> list[str]:
    return [f"{t},{seq},{target},{kind}\n" for t, seq, target, kind in trace]


class Mutex:
    """FIFO lock for serializing processes on one resource."""

    def __init__(self, kernel: Kernel, name: str):
        self.kernel = kernel
        self.name = name
        self.held = False
        self._waiters: list[Signal] = []

    def acquire(self) -> Signal:
        sig = self.kernel.signal(f"lock:{self.name}")
        if not self.held:
            self.held = True
            sig.succeed()
        else:
            self._waiters.append(sig)
        return sig

    def release(self) -> None:
        if self._waiters:
            self._waiters.pop(0).succeed()
        else:
            self.held = False
