"""Fairness and stability metrics over simulation traces.

Throughput fairness uses Jain's index over sliding one-second windows
of delivered throughput; convergence is the earliest instant from which
the index stays above a threshold for a sustained stretch.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Sequence

from .trace import FlowTrace

DEFAULT_WINDOW = 1000.0    # ms of throughput behind each fairness point
DEFAULT_GRID = 50.0        # ms between evaluation points
DEFAULT_SUSTAIN = 5000.0   # ms the index must stay above threshold
DEFAULT_THRESHOLD = 0.9


def jain_index(values: Sequence[float]) -> float | None:
    """Jain's fairness index: (sum x)^2 / (n * sum x^2), in (0, 1].

    1 means perfectly equal shares, 1/n a single hog.  Undefined (None)
    for an empty set or all-zero shares.
    """
    if any(v < 0 for v in values):
        raise ValueError("shares must be non-negative")
    if not values:
        return None
    square_sum = math.fsum(v * v for v in values)
    if square_sum == 0.0:
        return None
    total = math.fsum(values)
    return total * total / (len(values) * square_sum)


def _row_spacing(trace: FlowTrace) -> float:
    rows = trace.rows
    if len(rows) >= 2:
        return rows[1].time - rows[0].time
    return DEFAULT_GRID


def window_throughput(trace: FlowTrace, t: float, window: float) -> float:
    """Mean delivered rate (packets/ms) over (t - window, t]."""
    spacing = _row_spacing(trace)
    delivered = math.fsum(
        row.throughput * spacing for row in trace.rows if t - window < row.time <= t
    )
    return delivered / window


def jain_series(
    traces: Sequence[FlowTrace],
    duration: float,
    window: float = DEFAULT_WINDOW,
    grid: float = DEFAULT_GRID,
    starts: Sequence[float] | None = None,
) -> list[tuple[float, float | None]]:
    """Jain index of windowed throughputs at each grid point.

    A flow joins the index once it has started (``starts`` gives the
    start times; by default a flow counts from just before its first
    trace row).  Points where fewer than two flows are active, or all
    active flows delivered nothing, carry None.
    """
    if starts is None:
        starts = [
            (trace.rows[0].time - _row_spacing(trace)) if trace.rows else math.inf
            for trace in traces
        ]
    series: list[tuple[float, float | None]] = []
    steps = int(duration // grid)
    for i in range(1, steps + 1):
        t = i * grid
        shares = [
            window_throughput(trace, t, window)
            for trace, start in zip(traces, starts)
            if start <= t
        ]
        series.append((t, jain_index(shares) if len(shares) >= 2 else None))
    return series


def convergence_time(
    traces: Sequence[FlowTrace],
    duration: float,
    after: float = 0.0,
    threshold: float = DEFAULT_THRESHOLD,
    sustain: float = DEFAULT_SUSTAIN,
    window: float = DEFAULT_WINDOW,
    grid: float = DEFAULT_GRID,
    starts: Sequence[float] | None = None,
) -> float | None:
    """Earliest time >= ``after`` from which the fairness index stays
    above ``threshold`` for at least ``sustain`` ms.  None if that never
    happens within the trace (including when flows stay starved)."""
    series = jain_series(traces, duration, window, grid, starts)
    needed = int(sustain // grid) + 1
    run_start: float | None = None
    run_len = 0
    for t, value in series:
        if t < after:
            continue
        if value is not None and value > threshold:
            if run_start is None:
                run_start = t
                run_len = 0
            run_len += 1
            if run_len >= needed:
                return run_start
        else:
            run_start = None
            run_len = 0
    return None


def stability(traces: Sequence[FlowTrace], t0: float) -> float | None:
    """Mean per-flow standard deviation of epoch throughput after t0.

    Lower is steadier.  None when no flow has rows after t0.
    """
    devs = []
    for trace in traces:
        values = [row.throughput for row in trace.rows if row.time > t0]
        if values:
            devs.append(statistics.pstdev(values))
    if not devs:
        return None
    return math.fsum(devs) / len(devs)


def mean_throughput(trace: FlowTrace, t0: float, t1: float) -> float:
    """Mean delivered rate over rows in (t0, t1], packets/ms."""
    rows = trace.rows_between(t0, t1)
    if not rows:
        return 0.0
    return math.fsum(row.throughput for row in rows) / len(rows)


def mean_rtt(trace: FlowTrace, t0: float, t1: float) -> float | None:
    rows = trace.rows_between(t0, t1)
    if not rows:
        return None
    return math.fsum(row.rtt for row in rows) / len(rows)


def utilization(traces: Sequence[FlowTrace], capacity: float, t0: float, t1: float) -> float:
    """Packets delivered in (t0, t1] as a fraction of what capacity allows.

    Integrates each flow's delivered packets over the window, so flows
    active for only part of it contribute only what they delivered.
    """
    if capacity <= 0:
        raise ValueError(f"capacity must be positive, got {capacity}")
    if t1 <= t0:
        raise ValueError(f"window must be non-empty, got ({t0}, {t1}]")
    delivered = 0.0
    for trace in traces:
        spacing = _row_spacing(trace)
        delivered += math.fsum(row.throughput * spacing for row in trace.rows_between(t0, t1))
    return delivered / (capacity * (t1 - t0))


@dataclass(frozen=True)
class FairnessReport:
    """Fairness summary of one multi-flow run."""

    convergence_time: float | None     # absolute ms, None if never converged
    stability: float | None            # mean per-flow throughput stddev after convergence
    mean_jain: float | None            # mean index after `after`
    per_flow_throughput: tuple[float, ...]  # mean delivered rate after `after`


def fairness_report(
    traces: Sequence[FlowTrace],
    duration: float,
    after: float = 0.0,
    threshold: float = DEFAULT_THRESHOLD,
    sustain: float = DEFAULT_SUSTAIN,
    window: float = DEFAULT_WINDOW,
    grid: float = DEFAULT_GRID,
    starts: Sequence[float] | None = None,
) -> FairnessReport:
    converged = convergence_time(traces, duration, after, threshold, sustain, window, grid, starts)
    series = jain_series(traces, duration, window, grid, starts)
    values = [v for t, v in series if t >= after and v is not None]
    return FairnessReport(
        convergence_time=converged,
        stability=stability(traces, converged) if converged is not None else None,
        mean_jain=(math.fsum(values) / len(values)) if values else None,
        per_flow_throughput=tuple(mean_throughput(trace, after, duration) for trace in traces),
    )
