"""Session quality metrics.

A block counts as delivered on time when its client-side completion
time F satisfies F - E <= D, with E its arrival at the sender and D its
deadline window. The session delivery ratio averages that indicator
over all blocks. Channel utilization divides bytes the client actually
received by the bytes the capacity trace offered over the session
window; effective utilization restricts the numerator to the original
bytes of on-time blocks, so retransmitted copies and late stragglers do
not count. Session QoE is delivery_ratio + alpha * utilization with
alpha weighting efficiency against timeliness.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConfigurationError
from .linksim import SimulationResult
from .traces import LinkTrace

DEFAULT_ALPHA = 0.85


def delivery_indicator(arrival_time: float, completion_time: float | None, deadline_s: float) -> int:
    """1 when the block finished inside its window, else 0."""
    if deadline_s <= 0:
        raise ValueError("deadline_s must be positive, got %r" % deadline_s)
    if completion_time is None:
        return 0
    if completion_time < arrival_time:
        raise ValueError("completion %r precedes arrival %r" % (completion_time, arrival_time))
    return 1 if completion_time - arrival_time <= deadline_s else 0


def channel_utilization(received_bytes: float, offered_bytes: float) -> float:
    """Received bytes over offered capacity bytes, clamped to [0, 1]."""
    if offered_bytes <= 0:
        raise ValueError("offered_bytes must be positive, got %r" % offered_bytes)
    if received_bytes < 0:
        raise ValueError("received_bytes must be non-negative, got %r" % received_bytes)
    return min(1.0, received_bytes / offered_bytes)


def effective_utilization(on_time_block_bytes: float, offered_bytes: float) -> float:
    """Original bytes of on-time blocks over offered capacity bytes."""
    return channel_utilization(on_time_block_bytes, offered_bytes)


def session_qoe(delivery_ratio: float, utilization: float, alpha: float = DEFAULT_ALPHA) -> float:
    if not 0.0 <= delivery_ratio <= 1.0:
        raise ValueError("delivery_ratio must be in [0, 1], got %r" % delivery_ratio)
    if not 0.0 <= utilization <= 1.0:
        raise ValueError("utilization must be in [0, 1], got %r" % utilization)
    if alpha < 0:
        raise ValueError("alpha must be non-negative, got %r" % alpha)
    return delivery_ratio + alpha * utilization


@dataclass(frozen=True)
class BlockOutcome:
    block_id: tuple
    element_id: int
    arrival_time: float
    completion_time: float | None
    deadline_s: float
    total_bytes: int
    on_time: int


@dataclass(frozen=True)
class QoEReport:
    """Per-session metrics plus the per-block outcomes they came from."""

    scenario_name: str
    trace_tag: str
    scheduler_name: str
    seed: int
    alpha: float
    block_count: int
    on_time_count: int
    delivery_ratio: float
    utilization: float
    effective_util: float
    qoe: float
    delivered_bytes: int
    offered_bytes: float
    end_time: float
    outcomes: tuple

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario_name,
            "trace": self.trace_tag,
            "scheduler": self.scheduler_name,
            "seed": self.seed,
            "alpha": self.alpha,
            "block_count": self.block_count,
            "on_time_count": self.on_time_count,
            "delivery_ratio": self.delivery_ratio,
            "utilization": self.utilization,
            "effective_utilization": self.effective_util,
            "qoe": self.qoe,
            "delivered_bytes": self.delivered_bytes,
            "offered_bytes": self.offered_bytes,
            "end_time": self.end_time,
            "blocks": [
                {
                    "block_id": list(o.block_id),
                    "element_id": o.element_id,
                    "arrival_time": o.arrival_time,
                    "completion_time": o.completion_time,
                    "deadline_s": o.deadline_s,
                    "total_bytes": o.total_bytes,
                    "on_time": o.on_time,
                }
                for o in self.outcomes
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def session_window_end(result: SimulationResult) -> float:
    """The session window runs from 0 to the later of the configured
    duration and the last simulated event."""
    return max(result.duration_s, result.end_time)


def build_report(result: SimulationResult, trace: LinkTrace, alpha: float = DEFAULT_ALPHA) -> QoEReport:
    if alpha < 0:
        raise ConfigurationError("alpha must be non-negative, got %r" % alpha)
    if not result.blocks:
        raise ConfigurationError("run produced no blocks; nothing to score")
    outcomes = []
    on_time_bytes = 0
    on_time_count = 0
    for block in result.blocks:
        flag = delivery_indicator(block.arrival_time, block.completion_time, block.deadline_s)
        if flag:
            on_time_bytes += block.total_bytes
            on_time_count += 1
        outcomes.append(BlockOutcome(
            block_id=block.block_id,
            element_id=block.element_id,
            arrival_time=block.arrival_time,
            completion_time=block.completion_time,
            deadline_s=block.deadline_s,
            total_bytes=block.total_bytes,
            on_time=flag,
        ))
    window_end = session_window_end(result)
    offered = trace.integrate_capacity(0.0, window_end)
    delivered = result.counters["delivered_bytes"]
    util = channel_utilization(delivered, offered)
    eff = effective_utilization(on_time_bytes, offered)
    ratio = on_time_count / len(outcomes)
    return QoEReport(
        scenario_name=result.scenario_name,
        trace_tag=result.trace_tag,
        scheduler_name=result.scheduler_name,
        seed=result.seed,
        alpha=alpha,
        block_count=len(outcomes),
        on_time_count=on_time_count,
        delivery_ratio=ratio,
        utilization=util,
        effective_util=eff,
        qoe=session_qoe(ratio, util, alpha),
        delivered_bytes=delivered,
        offered_bytes=offered,
        end_time=result.end_time,
        outcomes=tuple(outcomes),
    )
