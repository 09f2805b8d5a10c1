from qcsc.sim.kernel import (
    Event,
    Interrupt,
    Kernel,
    Mutex,
    Process,
    RunStats,
    Signal,
    rng_stream,
    run_process,
    trace_lines,
)

__all__ = [
    "Event",
    "Interrupt",
    "Kernel",
    "Mutex",
    "Process",
    "RunStats",
    "Signal",
    "rng_stream",
    "run_process",
    "trace_lines",
]
