"""Per-flow simulation traces and their CSV representation.

One row per finished sender epoch.  CSV columns::

    time_ms, flow_id, send_rate, throughput, rtt_ms, queue_pkts, drops

``send_rate`` is the rate actually emitted over the epoch and
``throughput`` the delivered rate (both packets/ms); ``rtt_ms`` is the
epoch's mean RTT (the last known value is carried over epochs with no
ACKs so every row stays finite); ``queue_pkts`` is the mean bottleneck
occupancy seen by this flow's packets on arrival; ``drops`` counts this
flow's packets lost during the epoch.  Rows are sorted by
``(time_ms, flow_id)`` and numbers use fixed formats, so equal runs
produce byte-identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

CSV_COLUMNS = ("time_ms", "flow_id", "send_rate", "throughput", "rtt_ms", "queue_pkts", "drops")


@dataclass(frozen=True)
class TraceRow:
    time: float        # epoch window end, ms
    send_rate: float   # packets/ms emitted during the epoch
    throughput: float  # packets/ms delivered
    rtt: float         # mean RTT of the epoch's ACKs, ms
    queue: float       # mean occupancy at this flow's arrivals, packets
    drops: int         # this flow's losses during the epoch


@dataclass
class FlowTotals:
    sent: int = 0
    delivered: int = 0
    dropped_overflow: int = 0
    dropped_random: int = 0
    in_flight: int = 0  # unresolved at the end of the run


@dataclass
class FlowTrace:
    flow_id: int
    kind: str
    rows: list[TraceRow] = field(default_factory=list)
    totals: FlowTotals = field(default_factory=FlowTotals)

    def rows_between(self, t0: float, t1: float) -> list[TraceRow]:
        """Rows with t0 < time <= t1."""
        return [row for row in self.rows if t0 < row.time <= t1]


def _format_row(flow_id: int, row: TraceRow) -> list[str]:
    return [
        f"{row.time:.3f}",
        str(flow_id),
        f"{row.send_rate:.6f}",
        f"{row.throughput:.6f}",
        f"{row.rtt:.6f}",
        f"{row.queue:.3f}",
        str(row.drops),
    ]


def write_trace_csv(traces: Iterable[FlowTrace], path: str | Path) -> None:
    """Write all flows' rows into one CSV, deterministically ordered."""
    keyed = []
    for trace in traces:
        for row in trace.rows:
            keyed.append((row.time, trace.flow_id, row))
    keyed.sort(key=lambda item: (item[0], item[1]))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for _, flow_id, row in keyed:
            writer.writerow(_format_row(flow_id, row))


def read_trace_csv(path: str | Path) -> dict[int, list[TraceRow]]:
    """Read a trace CSV back into per-flow, time-ordered rows."""
    per_flow: dict[int, list[TraceRow]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [col for col in CSV_COLUMNS if col not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"trace is missing columns: {', '.join(missing)}")
        for entry in reader:
            row = TraceRow(
                time=float(entry["time_ms"]),
                send_rate=float(entry["send_rate"]),
                throughput=float(entry["throughput"]),
                rtt=float(entry["rtt_ms"]),
                queue=float(entry["queue_pkts"]),
                drops=int(entry["drops"]),
            )
            per_flow.setdefault(int(entry["flow_id"]), []).append(row)
    for rows in per_flow.values():
        rows.sort(key=lambda row: row.time)
    return per_flow
