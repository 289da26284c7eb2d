"""Unit conversions between wire bandwidth and packet-based rates.

All internal rates are packets per millisecond and all times are
milliseconds.  Bandwidth given in bits per second is converted at the
boundary using a fixed packet size (1200 bytes by default, a typical
MTU-sized payload).
"""

from __future__ import annotations

DEFAULT_PACKET_BYTES = 1200


def bps_to_pkts_per_ms(bits_per_sec: float, packet_bytes: int = DEFAULT_PACKET_BYTES) -> float:
    """Convert a bandwidth in bits/s to packets/ms for a fixed packet size."""
    if packet_bytes <= 0:
        raise ValueError(f"packet_bytes must be positive, got {packet_bytes}")
    return bits_per_sec / (8.0 * packet_bytes * 1000.0)


def mbps_to_pkts_per_ms(mbps: float, packet_bytes: int = DEFAULT_PACKET_BYTES) -> float:
    return bps_to_pkts_per_ms(mbps * 1e6, packet_bytes)


def kbps_to_pkts_per_ms(kbps: float, packet_bytes: int = DEFAULT_PACKET_BYTES) -> float:
    return bps_to_pkts_per_ms(kbps * 1e3, packet_bytes)


def pkts_per_ms_to_mbps(rate: float, packet_bytes: int = DEFAULT_PACKET_BYTES) -> float:
    return rate * 8.0 * packet_bytes * 1000.0 / 1e6
