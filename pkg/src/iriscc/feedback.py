"""Per-epoch feedback handed from the simulator to rate controllers.

Controllers never see individual packets.  Once per epoch the simulator
aggregates what happened to that epoch's packets (ACK timings, losses,
mean RTT, estimated receiving rate) into an :class:`EpochFeedback` and
asks the controller for the rate to use next.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable


@dataclass(frozen=True)
class EpochFeedback:
    """Measurement summary for one finished sender epoch.

    ``measured`` is False when no ACK came back (nothing was sent, or
    every packet was lost); ``mean_rtt``, ``last_ack`` and ``delta_rtt``
    are then None and ``recv_rate`` repeats the last known estimate.
    """

    index: int
    start: float            # epoch window start, ms
    end: float              # epoch window end, ms
    rate_applied: float     # pacing rate the sender used, packets/ms
    send_rate: float        # actually emitted packets / epoch length
    sent: int
    acked: int
    dropped: int
    recv_rate: float        # estimated receiving rate, packets/ms
    mean_rtt: float | None  # mean RTT over this epoch's ACKed packets, ms
    last_ack: float | None  # arrival time of the epoch's last ACK, ms
    delta_rtt: float | None # mean_rtt minus previous measured epoch's, ms
    measured: bool

    @property
    def loss_rate(self) -> float:
        return self.dropped / self.sent if self.sent else 0.0


@runtime_checkable
class RateController(Protocol):
    """What the simulator needs from any congestion controller."""

    kind: str
    epoch_len: float

    def start_rate(self) -> float:
        """Initial pacing rate in packets/ms, before any feedback."""
        ...

    def on_epoch(self, feedback: EpochFeedback, now: float) -> float:
        """Consume one epoch's feedback, return the next pacing rate."""
        ...
