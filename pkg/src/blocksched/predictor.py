"""Sender-side bandwidth estimation from packet timings.

Two estimators run side by side. The instantaneous estimator divides a
packet's size by its sending latency, the gap between entering the
selection queue and actually leaving the sender; it reacts fast but is
noisy. The smoothed estimator waits for a packet's acknowledgement or
loss signal and divides the bytes of every packet sent inside the
response window by the window width, which averages over roughly one
round trip.

The smoothed estimate drives regime classification against two
thresholds L < H (configured in Mbps): below L the link is scarce, above
H it is plentiful, in between it is moderate. The scheduler switches
comparison keys per regime. The instantaneous estimate is kept for
logging and diagnostics.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import ConfigurationError, DegenerateIntervalError, DegenerateLatencyError
from .units import mbps_to_bytes_per_s


class Regime(enum.IntEnum):
    LOW = 0
    MID = 1
    HIGH = 2


@dataclass(frozen=True)
class Thresholds:
    """Regime boundaries in bytes/s; build from Mbps via from_mbps."""

    low: float
    high: float

    def __post_init__(self) -> None:
        if not 0 < self.low < self.high:
            raise ConfigurationError("need 0 < low < high, got %r, %r" % (self.low, self.high))

    @classmethod
    def from_mbps(cls, low_mbps: float, high_mbps: float) -> "Thresholds":
        return cls(low=mbps_to_bytes_per_s(low_mbps), high=mbps_to_bytes_per_s(high_mbps))


def instantaneous_throughput(size_bytes: float, enqueue_time: float, send_time: float) -> float:
    """Packet size over sending latency; zero latency carries no signal."""
    if size_bytes < 0:
        raise ValueError("size_bytes must be non-negative, got %r" % size_bytes)
    latency = send_time - enqueue_time
    if latency <= 0:
        raise DegenerateLatencyError(
            "sending latency %r is not positive (enqueue %r, send %r)" % (latency, enqueue_time, send_time)
        )
    return size_bytes / latency


class InflightLedger:
    """Bytes currently on the wire, keyed by packet id, with send times.

    Entries are added when a packet leaves the sender and removed when its
    acknowledgement or loss signal returns.
    """

    def __init__(self) -> None:
        self._entries: dict = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, packet_id) -> bool:
        return packet_id in self._entries

    def add(self, packet_id, size_bytes: int, send_time: float) -> None:
        if packet_id in self._entries:
            raise KeyError("packet %r already inflight" % (packet_id,))
        self._entries[packet_id] = (size_bytes, send_time)

    def remove(self, packet_id) -> None:
        del self._entries[packet_id]

    def bytes_sent_since(self, window_start: float) -> int:
        """Total inflight bytes whose send time falls at or after window_start."""
        return sum(size for size, sent in self._entries.values() if sent >= window_start)


def smoothed_throughput(ledger: InflightLedger, window_start: float, window_end: float) -> float:
    """Inflight bytes sent within [window_start, window_end] over the window
    width. Call before removing the packet whose response defined the
    window, so its own bytes count."""
    width = window_end - window_start
    if width <= 0:
        raise DegenerateIntervalError(
            "response window [%r, %r] has non-positive width" % (window_start, window_end)
        )
    return ledger.bytes_sent_since(window_start) / width


def classify_regime(throughput: float, thresholds: Thresholds) -> Regime:
    if throughput < thresholds.low:
        return Regime.LOW
    if throughput > thresholds.high:
        return Regime.HIGH
    return Regime.MID


@dataclass(frozen=True)
class BandwidthEstimate:
    """Snapshot of both estimators at one instant."""

    time_s: float
    instantaneous: float
    smoothed: float
    regime: Regime


class BandwidthPredictor:
    """Stateful wrapper the simulation feeds send and response events.

    Until the first sample each estimate defaults to the low threshold, a
    deliberately conservative starting point.
    """

    def __init__(self, thresholds: Thresholds) -> None:
        self.thresholds = thresholds
        self.instantaneous = thresholds.low
        self.smoothed = thresholds.low
        self.sample_count = 0

    def observe_send(self, size_bytes: int, enqueue_time: float, send_time: float) -> float | None:
        """Update the instantaneous estimate; returns the new sample, or
        None when the latency was degenerate and the old estimate stands."""
        try:
            sample = instantaneous_throughput(size_bytes, enqueue_time, send_time)
        except DegenerateLatencyError:
            return None
        self.instantaneous = sample
        return sample

    def observe_response(self, ledger: InflightLedger, send_time: float, response_time: float) -> float:
        """Update the smoothed estimate from one acknowledgement or loss
        signal; the measured packet must still be in the ledger."""
        sample = smoothed_throughput(ledger, send_time, response_time)
        self.smoothed = sample
        self.sample_count += 1
        return sample

    @property
    def regime(self) -> Regime:
        return classify_regime(self.smoothed, self.thresholds)

    def snapshot(self, time_s: float) -> BandwidthEstimate:
        return BandwidthEstimate(time_s=time_s, instantaneous=self.instantaneous,
                                 smoothed=self.smoothed, regime=self.regime)
