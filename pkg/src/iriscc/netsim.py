"""Deterministic discrete-event simulation of flows over one bottleneck.

Topology: every flow paces packets into a shared drop-tail FIFO queue
served at the link capacity; delivered packets are acknowledged over an
ideal reverse path (no queueing, no loss).  Serialization occupies the
server but is not added to a packet's own latency, so an unqueued
packet measures exactly its two-way propagation delay.

Event kinds are processed in a fixed order at equal timestamps
(arrivals, departures, deliveries, ACKs, epoch timers, bandwidth
changes), with flow id and packet id as further tie-breakers, and the
only randomness is a seeded Bernoulli draw per arrival for random loss
— so a scenario is a pure function of its description and seed, and
equal seeds give byte-identical traces.  Delivery and ACK happen at
known offsets from the start of service (the reverse path is ideal), so
both are folded into the ACK event.

Time is ms, rates are packets/ms throughout.
"""

from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum

from .baselines import AimdController, ConstantRateController, VegasController
from .controller import IrisController, IrisParams, TargetMode
from .feedback import EpochFeedback, RateController
from .scenario import FlowSpec, LinkConfig, Scenario, ScenarioError
from .trace import FlowTotals, FlowTrace, TraceRow
from .units import mbps_to_pkts_per_ms

_MAX_EMISSIONS_PER_EPOCH = 1_000_000  # guard against runaway controllers


class EventKind(IntEnum):
    """Event ordering at equal timestamps follows these values."""

    PACKET_ARRIVE_QUEUE = 0
    PACKET_DEPART_QUEUE = 1
    PACKET_DELIVERED = 2   # folded into ACK_DELIVERED (ideal reverse path)
    ACK_DELIVERED = 3
    EPOCH_TIMER = 4
    BANDWIDTH_CHANGE = 5


class EnqueueResult(Enum):
    QUEUED = "queued"
    DROPPED_RANDOM = "dropped_random"
    DROPPED_OVERFLOW = "dropped_overflow"


def estimate_receiving_rate(send_rate: float, epoch_len: float,
                            t_last_ack: float, t_prev_ack: float) -> float:
    """Receiving rate from the spacing of two epochs' final ACKs.

    The packets sent during an epoch (``send_rate * epoch_len`` of
    them) finished arriving at ``t_last_ack``; the previous epoch's
    finished at ``t_prev_ack``.  Their count over that span is the rate
    at which the receiver is actually getting packets.
    """
    if not t_last_ack > t_prev_ack:
        raise ValueError(f"ACK times must increase: {t_last_ack} after {t_prev_ack}")
    return send_rate * epoch_len / (t_last_ack - t_prev_ack)


class BottleneckQueue:
    """Drop-tail FIFO with one server at the scheduled link capacity.

    Capacity changes take effect per packet when it starts service;
    a packet already being transmitted keeps its departure time.
    """

    def __init__(self, link: LinkConfig, rng: random.Random):
        self.rate = link.bandwidth_schedule[0][1]
        self.capacity = link.queue_capacity
        self.random_loss = link.random_loss
        self._rng = rng
        self.waiting: deque = deque()
        self.in_service: tuple | None = None

    @property
    def occupancy(self) -> int:
        return len(self.waiting) + (1 if self.in_service is not None else 0)

    def set_rate(self, rate: float) -> None:
        self.rate = rate

    def enqueue(self, now: float, payload: tuple) -> tuple[EnqueueResult, float | None, float | None]:
        """Admit or drop an arriving packet.

        Random loss is decided first (one seeded draw per arrival),
        then drop-tail against the occupancy bound.  Returns the result
        plus (service_start, service_end) when the packet went straight
        into service, else Nones.
        """
        if self.random_loss > 0.0 and self._rng.random() < self.random_loss:
            return EnqueueResult.DROPPED_RANDOM, None, None
        if self.occupancy >= self.capacity:
            return EnqueueResult.DROPPED_OVERFLOW, None, None
        if self.in_service is None:
            self.in_service = payload
            return EnqueueResult.QUEUED, now, now + 1.0 / self.rate
        self.waiting.append(payload)
        return EnqueueResult.QUEUED, None, None

    def complete(self, now: float) -> tuple[tuple, float, float] | None:
        """Finish the current transmission; start the next, if any.

        Returns (payload, service_start, service_end) for the packet
        that begins service now, or None when the queue went idle.
        """
        self.in_service = None
        if not self.waiting:
            return None
        payload = self.waiting.popleft()
        self.in_service = payload
        return payload, now, now + 1.0 / self.rate


@dataclass
class _EpochAccum:
    """Running tallies for one sender epoch until all packets resolve."""

    rate_applied: float
    planned: int = 0
    resolved: int = 0
    acked: int = 0
    dropped: int = 0
    rtt_sum: float = 0.0
    last_ack: float | None = None
    occ_sum: float = 0.0
    occ_n: int = 0


@dataclass
class _FlowRuntime:
    flow_id: int
    spec: FlowSpec
    controller: RateController
    prop_delay: float
    epoch_len: float
    rate: float
    last_emit: float | None = None
    packet_seq: int = 0
    closed_upto: int = -1                 # highest epoch index whose window ended
    accums: dict = field(default_factory=dict)      # epoch index -> _EpochAccum
    finalized: dict = field(default_factory=dict)   # epoch index -> EpochFeedback
    next_release: int = 0
    last_meas_ack: float | None = None    # last ACK time of the last measured epoch
    prev_mean_rtt: float | None = None
    prev_recv: float | None = None
    trace_rtt: float | None = None        # carried into rows for unmeasured epochs
    occ_by_epoch: dict = field(default_factory=dict)  # epoch index -> mean occupancy
    trace: FlowTrace = None  # type: ignore[assignment]

    @property
    def rtprop(self) -> float:
        return 2.0 * self.prop_delay

    def window_start(self, index: int) -> float:
        return self.spec.start_time + index * self.epoch_len


def _constant_controller(params: dict, prefix: str, packet_bytes: int) -> ConstantRateController:
    raw = dict(params)
    epoch_len = raw.pop("epoch_len", 50.0)
    has_rate = "rate" in raw
    has_mbps = "rate_mbps" in raw
    if has_rate == has_mbps:
        raise ScenarioError(prefix, "give exactly one of rate (packets/ms) or rate_mbps")
    rate = raw.pop("rate") if has_rate else mbps_to_pkts_per_ms(raw.pop("rate_mbps"), packet_bytes)
    if raw:
        raise ScenarioError(f"{prefix}.{sorted(raw)[0]}", "unknown parameter")
    try:
        return ConstantRateController(rate=rate, epoch_len=epoch_len)
    except ValueError as exc:
        raise ScenarioError(prefix, str(exc)) from exc


def _kwargs_controller(cls, params: dict, allowed: set[str], prefix: str):
    unknown = set(params) - allowed
    if unknown:
        raise ScenarioError(f"{prefix}.{sorted(unknown)[0]}", "unknown parameter")
    try:
        return cls(**params)
    except ValueError as exc:
        raise ScenarioError(prefix, str(exc)) from exc


def _iris_controller(params: dict, prefix: str) -> IrisController:
    raw = dict(params)
    if "target_mode" in raw:
        mode = raw["target_mode"]
        try:
            raw["target_mode"] = TargetMode(mode)
        except ValueError:
            raise ScenarioError(f"{prefix}.target_mode", f"expected 'min' or 'median', got {mode!r}") from None
    allowed = set(IrisParams.__dataclass_fields__)
    unknown = set(raw) - allowed
    if unknown:
        raise ScenarioError(f"{prefix}.{sorted(unknown)[0]}", "unknown parameter")
    try:
        return IrisController(IrisParams(**raw))
    except ValueError as exc:
        raise ScenarioError(prefix, str(exc)) from exc


def build_controller(spec: FlowSpec, flow_index: int, packet_bytes: int) -> RateController:
    prefix = f"flows[{flow_index}].params"
    if spec.controller == "iris":
        return _iris_controller(spec.params, prefix)
    if spec.controller == "aimd":
        return _kwargs_controller(
            AimdController, spec.params,
            {"epoch_len", "initial_cwnd", "initial_ssthresh", "initial_rtt"}, prefix)
    if spec.controller == "vegas":
        return _kwargs_controller(
            VegasController, spec.params,
            {"epoch_len", "alpha", "beta", "initial_cwnd", "initial_rtt"}, prefix)
    if spec.controller == "constant":
        return _constant_controller(spec.params, prefix, packet_bytes)
    raise ScenarioError(f"flows[{flow_index}].controller", f"unknown controller {spec.controller!r}")


class Simulation:
    """One scenario run; keeps controllers accessible for inspection."""

    def __init__(self, scenario: Scenario):
        scenario.validate()
        self.scenario = scenario
        self._rng = random.Random(scenario.link.seed)
        self.queue = BottleneckQueue(scenario.link, self._rng)
        self._heap: list = []
        self.flows: list[_FlowRuntime] = []
        for i, spec in enumerate(scenario.flows):
            controller = build_controller(spec, i, scenario.link.packet_bytes)
            flow = _FlowRuntime(
                flow_id=i,
                spec=spec,
                controller=controller,
                prop_delay=spec.prop_delay if spec.prop_delay is not None else scenario.link.prop_delay,
                epoch_len=controller.epoch_len,
                rate=controller.start_rate(),
            )
            flow.trace = FlowTrace(flow_id=i, kind=spec.controller, totals=FlowTotals())
            self.flows.append(flow)
            if spec.start_time <= scenario.duration:
                self._push(spec.start_time, EventKind.EPOCH_TIMER, i, 0)
        for seq, (t, rate) in enumerate(scenario.link.bandwidth_schedule[1:]):
            self._push(t, EventKind.BANDWIDTH_CHANGE, -1, seq, rate)
        self._ran = False

    @property
    def controllers(self) -> list[RateController]:
        return [flow.controller for flow in self.flows]

    def _push(self, time: float, kind: EventKind, flow_id: int, packet_id: int, *payload) -> None:
        heapq.heappush(self._heap, (time, int(kind), flow_id, packet_id, *payload))

    # -- event handlers -----------------------------------------------------

    def _start_service(self, started: tuple[tuple, float, float] | None) -> None:
        if started is None:
            return
        (flow_id, packet_id, epoch_idx, send_time), service_start, service_end = started
        self._push(service_end, EventKind.PACKET_DEPART_QUEUE, flow_id, packet_id)
        flow = self.flows[flow_id]
        self._push(service_start + flow.rtprop, EventKind.ACK_DELIVERED,
                   flow_id, packet_id, epoch_idx, send_time)

    def _on_arrive(self, now: float, flow_id: int, packet_id: int, epoch_idx: int) -> None:
        flow = self.flows[flow_id]
        acc: _EpochAccum = flow.accums[epoch_idx]
        acc.occ_sum += self.queue.occupancy
        acc.occ_n += 1
        flow.trace.totals.sent += 1
        payload = (flow_id, packet_id, epoch_idx, now)
        result, service_start, service_end = self.queue.enqueue(now, payload)
        if result is EnqueueResult.QUEUED:
            flow.trace.totals.in_flight += 1
            if service_start is not None:
                self._start_service((payload, service_start, service_end))
            return
        if result is EnqueueResult.DROPPED_RANDOM:
            flow.trace.totals.dropped_random += 1
        else:
            flow.trace.totals.dropped_overflow += 1
        acc.dropped += 1
        acc.resolved += 1
        self._try_finalize(flow, epoch_idx)

    def _on_depart(self, now: float) -> None:
        self._start_service(self.queue.complete(now))

    def _on_ack(self, now: float, flow_id: int, epoch_idx: int, send_time: float) -> None:
        flow = self.flows[flow_id]
        acc: _EpochAccum = flow.accums[epoch_idx]
        acc.acked += 1
        acc.resolved += 1
        acc.rtt_sum += now - send_time
        acc.last_ack = now
        flow.trace.totals.delivered += 1
        flow.trace.totals.in_flight -= 1
        self._try_finalize(flow, epoch_idx)

    def _on_timer(self, now: float, flow_id: int, epoch_idx: int) -> None:
        flow = self.flows[flow_id]
        if epoch_idx > 0:
            flow.closed_upto = epoch_idx - 1
            self._try_finalize(flow, epoch_idx - 1)
        self._release(flow, now)
        interval = 1.0 / flow.rate
        acc = _EpochAccum(rate_applied=flow.rate)
        flow.accums[epoch_idx] = acc
        window_end = now + flow.epoch_len
        next_emit = now if flow.last_emit is None else max(now, flow.last_emit + interval)
        while next_emit < window_end:
            if acc.planned >= _MAX_EMISSIONS_PER_EPOCH:
                raise RuntimeError(f"flow {flow_id} emission rate exploded ({flow.rate}/ms)")
            self._push(next_emit, EventKind.PACKET_ARRIVE_QUEUE, flow_id, flow.packet_seq, epoch_idx)
            flow.packet_seq += 1
            acc.planned += 1
            flow.last_emit = next_emit
            next_emit += interval
        if window_end <= self.scenario.duration:
            self._push(window_end, EventKind.EPOCH_TIMER, flow_id, epoch_idx + 1)

    # -- epoch accounting ---------------------------------------------------

    def _try_finalize(self, flow: _FlowRuntime, epoch_idx: int) -> None:
        acc = flow.accums.get(epoch_idx)
        if acc is None or epoch_idx > flow.closed_upto or acc.resolved < acc.planned:
            return
        del flow.accums[epoch_idx]
        send_rate = acc.planned / flow.epoch_len
        if acc.acked > 0:
            mean_rtt = acc.rtt_sum / acc.acked
            assert acc.last_ack is not None
            if flow.last_meas_ack is None or acc.last_ack <= flow.last_meas_ack:
                recv = send_rate
            else:
                recv = estimate_receiving_rate(send_rate, flow.epoch_len,
                                               acc.last_ack, flow.last_meas_ack)
            delta = None if flow.prev_mean_rtt is None else mean_rtt - flow.prev_mean_rtt
            flow.last_meas_ack = acc.last_ack
            flow.prev_mean_rtt = mean_rtt
            flow.prev_recv = recv
            measured = True
        else:
            mean_rtt = None
            delta = None
            recv = flow.prev_recv if flow.prev_recv is not None else 0.0
            measured = False
        start = flow.window_start(epoch_idx)
        flow.finalized[epoch_idx] = EpochFeedback(
            index=epoch_idx,
            start=start,
            end=start + flow.epoch_len,
            rate_applied=acc.rate_applied,
            send_rate=send_rate,
            sent=acc.planned,
            acked=acc.acked,
            dropped=acc.dropped,
            recv_rate=recv,
            mean_rtt=mean_rtt,
            last_ack=acc.last_ack,
            delta_rtt=delta,
            measured=measured,
        )
        flow.occ_by_epoch[epoch_idx] = acc.occ_sum / acc.occ_n if acc.occ_n else 0.0

    def _release(self, flow: _FlowRuntime, now: float, decide: bool = True) -> None:
        """Hand finalized epochs to the controller in index order."""
        while flow.next_release in flow.finalized:
            fb = flow.finalized.pop(flow.next_release)
            flow.next_release += 1
            if decide:
                flow.rate = flow.controller.on_epoch(fb, now)
                if not flow.rate > 0:
                    raise RuntimeError(f"controller returned a non-positive rate: {flow.rate}")
            if fb.measured:
                flow.trace_rtt = fb.mean_rtt
            rtt_for_row = flow.trace_rtt if flow.trace_rtt is not None else flow.rtprop
            occ = flow.occ_by_epoch.pop(fb.index, 0.0)
            flow.trace.rows.append(TraceRow(
                time=fb.end,
                send_rate=fb.send_rate,
                throughput=fb.acked / flow.epoch_len,
                rtt=rtt_for_row,
                queue=occ,
                drops=fb.dropped,
            ))

    # -- main loop ----------------------------------------------------------

    def run(self) -> list[FlowTrace]:
        if self._ran:
            raise RuntimeError("a Simulation can only run once")
        self._ran = True
        duration = self.scenario.duration
        heap = self._heap
        while heap:
            event = heapq.heappop(heap)
            now = event[0]
            if now > duration:
                break
            kind = event[1]
            if kind == EventKind.PACKET_ARRIVE_QUEUE:
                self._on_arrive(now, event[2], event[3], event[4])
            elif kind == EventKind.PACKET_DEPART_QUEUE:
                self._on_depart(now)
            elif kind == EventKind.ACK_DELIVERED:
                self._on_ack(now, event[2], event[4], event[5])
            elif kind == EventKind.EPOCH_TIMER:
                self._on_timer(now, event[2], event[3])
            elif kind == EventKind.BANDWIDTH_CHANGE:
                self.queue.set_rate(event[4])
        for flow in self.flows:
            self._release(flow, duration, decide=False)
        return [flow.trace for flow in self.flows]


def run_scenario(scenario: Scenario) -> list[FlowTrace]:
    """Simulate a scenario and return one trace per flow."""
    return Simulation(scenario).run()
