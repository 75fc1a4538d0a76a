"""Wire-level constants and unit conversions shared across the package.

All internal rates are bytes per second and all times are seconds.
Megabit-per-second values appear only at configuration and reporting
boundaries.
"""
from __future__ import annotations

# One delivery opportunity in a packet-opportunity trace carries one
# MTU-sized payload.
PACKET_PAYLOAD_BYTES = 1500

BYTES_PER_S_PER_MBPS = 125000.0  # 1e6 bits / 8


def mbps_to_bytes_per_s(mbps: float) -> float:
    return mbps * BYTES_PER_S_PER_MBPS


def bytes_per_s_to_mbps(rate: float) -> float:
    return rate / BYTES_PER_S_PER_MBPS
