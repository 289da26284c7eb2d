"""Bandwidth/packet-rate conversions."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from iriscc.units import (
    DEFAULT_PACKET_BYTES,
    bps_to_pkts_per_ms,
    kbps_to_pkts_per_ms,
    mbps_to_pkts_per_ms,
    pkts_per_ms_to_mbps,
)


def test_default_packet_size():
    assert DEFAULT_PACKET_BYTES == 1200


def test_twenty_mbps_default_packets():
    # 20e6 bit/s over 9600-bit packets = 2083.33 pkt/s = 2.0833 pkt/ms.
    assert mbps_to_pkts_per_ms(20.0) == pytest.approx(2.0833333333333335, abs=0.0)


def test_hundred_kbps_default_packets():
    # 1e5 / 9600 / 1000: the canonical probing floor used by cold start.
    assert kbps_to_pkts_per_ms(100.0) == pytest.approx(0.010416666666666666, abs=0.0)


def test_round_packet_size():
    # 9.6 Mbps over 1000-byte (8000-bit) packets is exactly 1.2 pkt/ms.
    assert mbps_to_pkts_per_ms(9.6, packet_bytes=1000) == 1.2


def test_bps_mbps_kbps_consistency():
    assert bps_to_pkts_per_ms(5e6) == mbps_to_pkts_per_ms(5.0)
    assert bps_to_pkts_per_ms(5e3) == kbps_to_pkts_per_ms(5.0)


def test_zero_bandwidth():
    assert mbps_to_pkts_per_ms(0.0) == 0.0


@pytest.mark.parametrize("bad", [0, -1, -1200])
def test_nonpositive_packet_bytes_rejected(bad):
    with pytest.raises(ValueError):
        bps_to_pkts_per_ms(1e6, packet_bytes=bad)


@given(
    mbps=st.floats(min_value=1e-3, max_value=1e5),
    packet_bytes=st.integers(min_value=64, max_value=9000),
)
def test_mbps_round_trip(mbps, packet_bytes):
    rate = mbps_to_pkts_per_ms(mbps, packet_bytes)
    assert pkts_per_ms_to_mbps(rate, packet_bytes) == pytest.approx(mbps, rel=1e-12)
