"""Event-driven sender over a capacity-limited link.

The link transmits one packet at a time; how long a packet occupies the
link comes from integrating the capacity trace. A depth-1 selection
queue sits in front of the wire: while one packet transmits, the policy
has already chosen the next one, so a packet's sending latency (time
from entering the selection queue to leaving the sender) reflects how
long the previous packet took, which is exactly what the instantaneous
bandwidth estimator wants to see.

Receiver feedback is modeled with a fixed round trip: a delivered packet
reaches the client one propagation delay after it leaves the wire and
its acknowledgement returns one propagation delay later; a lost packet
never reaches the client and its loss signal reaches the sender one full
round trip after the send. Acknowledgements and loss signals are never
lost themselves. Loss draws come from a dedicated seeded stream indexed
by send order, so a run is a pure function of its configuration.

Event kinds at equal timestamps process in a fixed order:
send_opportunity, packet_delivered, ack, loss_signal, block_arrival.
"""
from __future__ import annotations

import enum
import heapq
import random
from dataclasses import dataclass, field

from .errors import ConfigurationError, SimulationInvariantError
from .model import (
    Block,
    BlockAwaitingQueue,
    Packet,
    PacketState,
    ScenarioConfig,
    SimClock,
    enqueue_block,
    generate_blocks,
    mark_block_complete,
)
from .predictor import BandwidthPredictor, InflightLedger, Thresholds
from .schedulers import (
    Scheduler,
    SchedulerDecision,
    SchedulingContext,
    compute_block_stats,
    filter_expired,
)
from .traces import LinkTrace
from .units import PACKET_PAYLOAD_BYTES

_LOSS_STREAM_OFFSET = 0x1F3A9C


class EventKind(enum.IntEnum):
    SEND_OPPORTUNITY = 0
    PACKET_DELIVERED = 1
    ACK = 2
    LOSS_SIGNAL = 3
    BLOCK_ARRIVAL = 4


@dataclass
class SimulationResult:
    """Everything one run produced, enough to recompute every metric."""

    scenario_name: str
    trace_tag: str
    scheduler_name: str
    duration_s: float
    end_time: float
    seed: int
    rtt_s: float
    loss_rate: float
    threshold_low: float  # bytes/s
    threshold_high: float  # bytes/s
    payload_bytes: int
    blocks: list[Block]
    events: list[tuple]
    decisions: list[tuple]
    counters: dict


class Simulation:
    """One run of one scheduler over one trace and scenario."""

    def __init__(self, trace: LinkTrace, scenario: ScenarioConfig, scheduler: Scheduler, *,
                 duration_s: float, seed: int = 0, rtt_s: float = 0.08,
                 loss_rate: float = 0.005, thresholds: Thresholds,
                 payload_bytes: int = PACKET_PAYLOAD_BYTES,
                 forced_loss_sends=()) -> None:
        if duration_s <= 0:
            raise ConfigurationError("duration_s must be positive, got %r" % duration_s)
        if rtt_s <= 0:
            raise ConfigurationError("rtt_s must be positive, got %r" % rtt_s)
        if not 0.0 <= loss_rate < 1.0:
            raise ConfigurationError("loss_rate must be in [0, 1), got %r" % loss_rate)
        self.trace = trace
        self.scenario = scenario
        self.scheduler = scheduler
        self.duration_s = duration_s
        self.seed = seed
        self.rtt_s = rtt_s
        self.one_way_delay_s = rtt_s / 2.0
        self.loss_rate = loss_rate
        self.thresholds = thresholds
        self.payload_bytes = payload_bytes
        self.forced_loss_sends = frozenset(forced_loss_sends)

        self.clock = SimClock()
        self.queue = BlockAwaitingQueue()
        self.predictor = BandwidthPredictor(thresholds)
        self.ledger = InflightLedger()
        self.blocks = generate_blocks(scenario, duration_s, seed, payload_bytes)
        self.blocks_by_id = {b.block_id: b for b in self.blocks}
        self._loss_rng = random.Random(_LOSS_STREAM_OFFSET + seed)
        self._heap: list[tuple] = []
        self._seq = 0
        self._slot: Packet | None = None
        self._opportunity_pending = False
        self._send_index = 0
        self.events: list[tuple] = []
        self.decisions: list[tuple] = []
        self.counters = {
            "sends": 0,
            "retransmission_sends": 0,
            "loss_signals": 0,
            "delivered_packets": 0,
            "delivered_bytes": 0,
            "blocks_completed": 0,
            "blocks_expired": 0,
            "slot_discards": 0,
        }
        self._finished = False
        for block in self.blocks:
            self._push(block.arrival_time, EventKind.BLOCK_ARRIVAL, block)

    # -- event plumbing ------------------------------------------------

    def _push(self, time_s: float, kind: EventKind, payload) -> None:
        heapq.heappush(self._heap, (time_s, int(kind), self._seq, payload))
        self._seq += 1

    def advance(self):
        """Process the earliest pending event; returns (time, kind) or None
        when the heap is empty. Events may never run behind the clock."""
        if not self._heap:
            return None
        time_s, kind, _, payload = heapq.heappop(self._heap)
        if time_s < self.clock.now:
            raise SimulationInvariantError(
                "event at %r behind clock %r (kind %d)" % (time_s, self.clock.now, kind)
            )
        self.clock.advance(time_s)
        if kind == EventKind.SEND_OPPORTUNITY:
            self._on_send_opportunity(time_s)
        elif kind == EventKind.PACKET_DELIVERED:
            self._on_packet_delivered(time_s, payload)
        elif kind == EventKind.ACK:
            self._on_ack(time_s, payload)
        elif kind == EventKind.LOSS_SIGNAL:
            self._on_loss_signal(time_s, payload)
        elif kind == EventKind.BLOCK_ARRIVAL:
            self._on_block_arrival(time_s, payload)
        else:
            raise SimulationInvariantError("unknown event kind %r" % kind)
        return time_s, EventKind(kind)

    def run(self) -> SimulationResult:
        if self._finished:
            raise SimulationInvariantError("simulation already ran")
        while self.advance() is not None:
            pass
        self._finalize()
        self._finished = True
        return SimulationResult(
            scenario_name=self.scenario.name,
            trace_tag=self.trace.source_tag,
            scheduler_name=self.scheduler.name,
            duration_s=self.duration_s,
            end_time=self.clock.now,
            seed=self.seed,
            rtt_s=self.rtt_s,
            loss_rate=self.loss_rate,
            threshold_low=self.thresholds.low,
            threshold_high=self.thresholds.high,
            payload_bytes=self.payload_bytes,
            blocks=self.blocks,
            events=self.events,
            decisions=self.decisions,
            counters=self.counters,
        )

    def _ensure_opportunity(self, time_s: float) -> None:
        if not self._opportunity_pending:
            self._push(time_s, EventKind.SEND_OPPORTUNITY, None)
            self._opportunity_pending = True

    # -- handlers ------------------------------------------------------

    def _on_block_arrival(self, t: float, block: Block) -> None:
        enqueue_block(self.queue, block)
        self.events.append(("block_arrival", t, block.block_id))
        self._ensure_opportunity(t)

    def _record_expiry(self, block: Block, t: float) -> None:
        self.counters["blocks_expired"] += 1
        self.events.append(("block_expired", t, block.block_id))
        self.scheduler.note_block_resolved(block.element_id, False)

    def _decide(self, t: float) -> Block | None:
        eligible = [b for b in self.queue if b.has_sendable()]
        regime = self.predictor.regime
        smoothed = self.predictor.smoothed
        if not eligible:
            self.decisions.append((t, None, "none_eligible", int(regime), None, smoothed, 0))
            return None
        stats = [compute_block_stats(b, t) for b in eligible]
        retx = [b.retransmission_pending() for b in eligible]
        ctx = SchedulingContext(now=t, blocks=eligible, stats=stats, retransmission=retx,
                                regime=regime, smoothed_bw=smoothed)
        decision: SchedulerDecision = self.scheduler.select(ctx)
        self.decisions.append((t, decision.selected, decision.reason.value, int(regime),
                               decision.score, smoothed, len(eligible)))
        if decision.selected is None:
            return None
        block = self.queue.get(decision.selected)
        if block is None or not block.has_sendable():
            raise SimulationInvariantError(
                "scheduler %s selected ineligible block %r" % (self.scheduler.name, decision.selected)
            )
        return block

    def _fill_slot(self, t: float) -> None:
        block = self._decide(t)
        if block is None:
            return
        packet = block.pending.popleft()
        packet.state = PacketState.IN_SELECTION_QUEUE
        packet.enqueue_time = t
        self._slot = packet

    def _on_send_opportunity(self, t: float) -> None:
        self._opportunity_pending = False
        for block in filter_expired(self.queue, t):
            self._record_expiry(block, t)
        slot = self._slot
        if slot is not None:
            # the queue filter above marks the slot packet's block too; a
            # chosen-but-unsent packet of an expired block must not burn
            # capacity
            block = self.blocks_by_id[slot.block_id]
            if block.expired:
                slot.state = PacketState.EXPIRED_DISCARDED
                self.counters["slot_discards"] += 1
                self.events.append(("slot_discard", t, slot.packet_id))
                self._slot = slot = None
        if slot is None:
            self._fill_slot(t)
            slot = self._slot
        if slot is None:
            return  # nothing to send, link goes idle
        # transmit
        self._slot = None
        packet = slot
        packet.send_time = t
        packet.send_count += 1
        is_retx = packet.send_count > 1
        if is_retx:
            packet.retransmission_count += 1
            self.counters["retransmission_sends"] += 1
        packet.state = PacketState.INFLIGHT
        thr = self.predictor.observe_send(packet.size_bytes, packet.enqueue_time, t)
        self.ledger.add(packet.packet_id, packet.size_bytes, t)
        draw = self._loss_rng.random()
        lost = (self._send_index in self.forced_loss_sends) or draw < self.loss_rate
        self._send_index += 1
        self.counters["sends"] += 1
        end = self.trace.time_to_send(t, packet.size_bytes)
        if lost:
            self._push(t + self.rtt_s, EventKind.LOSS_SIGNAL, packet)
        else:
            self._push(end + self.one_way_delay_s, EventKind.PACKET_DELIVERED, packet)
        self.events.append(("send", t, packet.packet_id, packet.size_bytes, is_retx, thr))
        self._fill_slot(t)
        self._push(end, EventKind.SEND_OPPORTUNITY, None)
        self._opportunity_pending = True

    def _on_packet_delivered(self, t: float, packet: Packet) -> None:
        if packet.client_receive_time is not None:
            raise SimulationInvariantError("packet %r delivered twice" % (packet.packet_id,))
        packet.client_receive_time = t
        self.counters["delivered_packets"] += 1
        self.counters["delivered_bytes"] += packet.size_bytes
        self.events.append(("delivered", t, packet.packet_id, packet.size_bytes))
        block = self.blocks_by_id[packet.block_id]
        block.received_packets += 1
        if not block.expired and block.completion_time is None and block.is_fully_received():
            finish = mark_block_complete(block, self.queue)
            on_time = finish - block.arrival_time <= block.deadline_s
            self.counters["blocks_completed"] += 1
            self.events.append(("block_complete", finish, block.block_id, on_time))
            self.scheduler.note_block_resolved(block.element_id, on_time)
        self._push(t + self.one_way_delay_s, EventKind.ACK, packet)

    def _on_ack(self, t: float, packet: Packet) -> None:
        sample = self.predictor.observe_response(self.ledger, packet.send_time, t)
        self.ledger.remove(packet.packet_id)
        packet.state = PacketState.DELIVERED
        packet.response_time = t
        block = self.blocks_by_id[packet.block_id]
        block.acked_packets += 1
        block.acked_bytes += packet.size_bytes
        self.events.append(("ack", t, packet.packet_id, sample))

    def _on_loss_signal(self, t: float, packet: Packet) -> None:
        sample = self.predictor.observe_response(self.ledger, packet.send_time, t)
        self.ledger.remove(packet.packet_id)
        packet.response_time = t
        self.counters["loss_signals"] += 1
        block = self.blocks_by_id[packet.block_id]
        if block.expired:
            packet.state = PacketState.EXPIRED_DISCARDED
            requeued = False
        else:
            packet.state = PacketState.LOST_PENDING_RETX
            block.pending.appendleft(packet)
            requeued = True
            self._ensure_opportunity(t)
        self.events.append(("loss", t, packet.packet_id, sample, requeued))

    # -- termination ---------------------------------------------------

    def _finalize(self) -> None:
        now = self.clock.now
        if self._slot is not None:
            raise SimulationInvariantError("selection queue still holds %r after drain"
                                           % (self._slot.packet_id,))
        for block in list(self.queue):
            if now - block.arrival_time > block.deadline_s:
                block.expired = True
                for p in block.pending:
                    p.state = PacketState.EXPIRED_DISCARDED
                block.pending.clear()
                self.queue.remove(block)
                self._record_expiry(block, now)
            else:
                raise SimulationInvariantError(
                    "block %r unresolved after drain at %r" % (block.block_id, now)
                )
        if len(self.ledger) != 0:
            raise SimulationInvariantError("inflight ledger not empty after drain")
        terminal = (PacketState.DELIVERED, PacketState.EXPIRED_DISCARDED)
        for block in self.blocks:
            resolved = block.completion_time is not None or block.expired
            if not resolved:
                raise SimulationInvariantError("block %r neither complete nor expired" % (block.block_id,))
            for packet in block.packets:
                if packet.state not in terminal:
                    raise SimulationInvariantError(
                        "packet %r ended in state %s" % (packet.packet_id, packet.state.value)
                    )
        if self.counters["sends"] != self.counters["delivered_packets"] + self.counters["loss_signals"]:
            raise SimulationInvariantError("send/response accounting mismatch: %r" % (self.counters,))


def run_simulation(trace: LinkTrace, scenario: ScenarioConfig, scheduler: Scheduler, *,
                   duration_s: float, seed: int = 0, rtt_s: float = 0.08,
                   loss_rate: float = 0.005, thresholds: Thresholds,
                   payload_bytes: int = PACKET_PAYLOAD_BYTES,
                   forced_loss_sends=()) -> SimulationResult:
    sim = Simulation(trace, scenario, scheduler, duration_s=duration_s, seed=seed,
                     rtt_s=rtt_s, loss_rate=loss_rate, thresholds=thresholds,
                     payload_bytes=payload_bytes, forced_loss_sends=forced_loss_sends)
    return sim.run()


def event_dicts(result: SimulationResult):
    """Yield event-log records as JSON-ready dicts with stable keys."""
    for ev in result.events:
        kind = ev[0]
        if kind == "send":
            yield {"kind": kind, "t": ev[1], "packet_id": list(ev[2][0]) + [ev[2][1]],
                   "size": ev[3], "retransmission": ev[4], "thr_instant": ev[5]}
        elif kind in ("delivered",):
            yield {"kind": kind, "t": ev[1], "packet_id": list(ev[2][0]) + [ev[2][1]], "size": ev[3]}
        elif kind == "ack":
            yield {"kind": kind, "t": ev[1], "packet_id": list(ev[2][0]) + [ev[2][1]], "thr_smoothed": ev[3]}
        elif kind == "loss":
            yield {"kind": kind, "t": ev[1], "packet_id": list(ev[2][0]) + [ev[2][1]],
                   "thr_smoothed": ev[3], "requeued": ev[4]}
        elif kind == "slot_discard":
            yield {"kind": kind, "t": ev[1], "packet_id": list(ev[2][0]) + [ev[2][1]]}
        elif kind == "block_complete":
            yield {"kind": kind, "t": ev[1], "block_id": list(ev[2]), "on_time": ev[3]}
        else:  # block_arrival, block_expired
            yield {"kind": kind, "t": ev[1], "block_id": list(ev[2])}


def decision_dicts(result: SimulationResult):
    for t, selected, reason, regime, score, smoothed, n_eligible in result.decisions:
        yield {"t": t, "selected": list(selected) if selected else None, "reason": reason,
               "regime": regime, "score": score, "smoothed_bw": smoothed, "eligible": n_eligible}
