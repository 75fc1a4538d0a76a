"""Content model: media elements, blocks, packets, and the sender queue.

A session streams K media element classes. Element k emits one block per
period; block v of element k arrives at the sender at its generation time
E, carries a priority P (larger means more important), and must be fully
received by the client within a deadline window D seconds after E to
count as delivered on time.

Blocks are split into MTU-sized packets. Packet state tracks the sender's
view (a packet is "delivered" once its acknowledgement returned); the
client-side receive time is recorded separately because block completion
is judged at the client.
"""
from __future__ import annotations

import enum
import json
import math
import random
from collections import deque
from dataclasses import dataclass, field

from .errors import ConfigurationError, DuplicateBlockError, IllegalStateError, SimulationInvariantError
from .units import PACKET_PAYLOAD_BYTES

# Block ids are (element_id, block_index); packet ids add a packet index.
BlockId = tuple[int, int]
PacketId = tuple[BlockId, int]


@dataclass(frozen=True)
class MediaElement:
    """One content class: its priority, deadline window, and arrival process."""

    element_id: int
    priority: int
    deadline_s: float
    block_size_bytes: int
    period_s: float


@dataclass
class ScenarioConfig:
    """A named set of media elements describing one workload."""

    name: str
    elements: list[MediaElement]

    def validate(self, payload_bytes: int = PACKET_PAYLOAD_BYTES) -> None:
        if not self.elements:
            raise ConfigurationError("scenario %r has no elements" % self.name)
        ids = [e.element_id for e in self.elements]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("scenario %r repeats an element_id" % self.name)
        for e in self.elements:
            if e.deadline_s <= 0:
                raise ConfigurationError(
                    "element %d: deadline_s must be positive, got %r" % (e.element_id, e.deadline_s)
                )
            if e.period_s <= 0:
                raise ConfigurationError(
                    "element %d: period_s must be positive, got %r" % (e.element_id, e.period_s)
                )
            if e.block_size_bytes < payload_bytes:
                raise ConfigurationError(
                    "element %d: block_size_bytes %d is smaller than one packet payload (%d)"
                    % (e.element_id, e.block_size_bytes, payload_bytes)
                )
        # priorities must form a contiguous ladder starting at 0 so that the
        # (1 + P) weighting is comparable across scenarios
        prios = sorted(e.priority for e in self.elements)
        if prios != list(range(len(prios))):
            raise ConfigurationError(
                "scenario %r: priorities %r must be exactly 0..K-1" % (self.name, prios)
            )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "elements": [
                {
                    "element_id": e.element_id,
                    "priority": e.priority,
                    "deadline_s": e.deadline_s,
                    "block_size_bytes": e.block_size_bytes,
                    "period_s": e.period_s,
                }
                for e in self.elements
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        try:
            elements = [
                MediaElement(
                    element_id=int(item["element_id"]),
                    priority=int(item["priority"]),
                    deadline_s=float(item["deadline_s"]),
                    block_size_bytes=int(item["block_size_bytes"]),
                    period_s=float(item["period_s"]),
                )
                for item in data["elements"]
            ]
            cfg = cls(name=str(data["name"]), elements=elements)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError("malformed scenario config: %s" % exc) from exc
        cfg.validate()
        return cfg


def load_scenario(path: str) -> ScenarioConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigurationError("cannot read scenario file %s: %s" % (path, exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError("scenario file %s is not valid JSON: %s" % (path, exc)) from exc
    return ScenarioConfig.from_dict(data)


def save_scenario(cfg: ScenarioConfig, path: str) -> None:
    cfg.validate()
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


class PacketState(enum.Enum):
    WAITING = "waiting"
    IN_SELECTION_QUEUE = "in_selection_queue"
    INFLIGHT = "inflight"
    DELIVERED = "delivered"
    LOST_PENDING_RETX = "lost_pending_retx"
    EXPIRED_DISCARDED = "expired_discarded"


@dataclass
class Packet:
    """One transmission unit of a block.

    send_time / response_time reflect the most recent transmission.
    client_receive_time is set when the copy reaches the client, which can
    precede the sender-side acknowledgement by one propagation delay.
    """

    packet_id: PacketId
    size_bytes: int
    state: PacketState = PacketState.WAITING
    enqueue_time: float | None = None
    send_time: float | None = None
    response_time: float | None = None
    client_receive_time: float | None = None
    send_count: int = 0
    retransmission_count: int = 0

    @property
    def block_id(self) -> BlockId:
        return self.packet_id[0]


def build_packets(block_id: BlockId, total_bytes: int, payload_bytes: int = PACKET_PAYLOAD_BYTES) -> list[Packet]:
    """Split total_bytes into full payloads plus one smaller tail packet."""
    if total_bytes < payload_bytes:
        raise ConfigurationError(
            "block %r: %d bytes is smaller than one packet payload" % (block_id, total_bytes)
        )
    sizes = [payload_bytes] * (total_bytes // payload_bytes)
    tail = total_bytes % payload_bytes
    if tail:
        sizes.append(tail)
    return [Packet(packet_id=(block_id, i), size_bytes=size) for i, size in enumerate(sizes)]


@dataclass
class Block:
    """One deadline-constrained unit of content."""

    block_id: BlockId
    element_id: int
    index: int
    arrival_time: float  # E
    deadline_s: float  # D
    priority: int  # P
    total_bytes: int
    packets: list[Packet]
    completion_time: float | None = None  # F, client-side
    expired: bool = False
    pending: deque[Packet] = field(default_factory=deque)
    acked_packets: int = 0
    acked_bytes: int = 0
    received_packets: int = 0

    def __post_init__(self) -> None:
        if not self.pending:
            self.pending = deque(self.packets)

    @property
    def packet_count(self) -> int:
        return len(self.packets)

    @property
    def unacked_bytes(self) -> int:
        return self.total_bytes - self.acked_bytes

    @property
    def unacked_packets(self) -> int:
        return self.packet_count - self.acked_packets

    @property
    def expiry_time(self) -> float:
        return self.arrival_time + self.deadline_s

    def has_sendable(self) -> bool:
        return bool(self.pending) and not self.expired

    def retransmission_pending(self) -> bool:
        return bool(self.pending) and self.pending[0].state is PacketState.LOST_PENDING_RETX

    def is_fully_received(self) -> bool:
        return self.received_packets == self.packet_count


def make_block(element: MediaElement, index: int, arrival_time: float,
               payload_bytes: int = PACKET_PAYLOAD_BYTES) -> Block:
    block_id: BlockId = (element.element_id, index)
    return Block(
        block_id=block_id,
        element_id=element.element_id,
        index=index,
        arrival_time=arrival_time,
        deadline_s=element.deadline_s,
        priority=element.priority,
        total_bytes=element.block_size_bytes,
        packets=build_packets(block_id, element.block_size_bytes, payload_bytes),
    )


def generate_blocks(scenario: ScenarioConfig, duration_s: float, seed: int,
                    payload_bytes: int = PACKET_PAYLOAD_BYTES) -> list[Block]:
    """Produce the arrival schedule for one session.

    Each element emits blocks periodically starting from a seeded phase
    offset in [0, period). Arrivals strictly before duration_s are kept.
    The result is sorted by (arrival time, element id, block index) and is
    a pure function of (scenario, duration_s, seed).
    """
    scenario.validate(payload_bytes)
    if duration_s < 0:
        raise ConfigurationError("duration_s must be non-negative, got %r" % duration_s)
    rng = random.Random(seed)
    blocks: list[Block] = []
    for element in scenario.elements:
        phase = rng.random() * element.period_s
        if phase >= element.period_s:  # guard the half-open interval
            phase = 0.0
        index = 0
        while True:
            arrival = phase + index * element.period_s
            if arrival >= duration_s:
                break
            blocks.append(make_block(element, index, arrival, payload_bytes))
            index += 1
    blocks.sort(key=lambda b: (b.arrival_time, b.element_id, b.index))
    return blocks


class BlockAwaitingQueue:
    """Sender-side queue of blocks that still have undelivered packets.

    Iteration order is arrival order. Membership is tracked by block id;
    enqueueing the same id twice is an error.
    """

    def __init__(self) -> None:
        self._blocks: list[Block] = []
        self._ids: dict[BlockId, Block] = {}

    def __len__(self) -> int:
        return len(self._blocks)

    def __iter__(self):
        return iter(self._blocks)

    def __contains__(self, block_id: BlockId) -> bool:
        return block_id in self._ids

    def get(self, block_id: BlockId) -> Block | None:
        return self._ids.get(block_id)

    def enqueue(self, block: Block) -> None:
        if block.block_id in self._ids:
            raise DuplicateBlockError("block %r already enqueued" % (block.block_id,))
        if block.completion_time is not None or block.is_fully_received():
            raise IllegalStateError("block %r has no undelivered packets" % (block.block_id,))
        if block.expired:
            raise IllegalStateError("block %r already expired" % (block.block_id,))
        self._blocks.append(block)
        self._ids[block.block_id] = block

    def remove(self, block: Block) -> None:
        if block.block_id not in self._ids:
            raise IllegalStateError("block %r not in queue" % (block.block_id,))
        del self._ids[block.block_id]
        self._blocks.remove(block)


def enqueue_block(queue: BlockAwaitingQueue, block: Block) -> None:
    queue.enqueue(block)


def mark_block_complete(block: Block, queue: BlockAwaitingQueue | None = None) -> float:
    """Finalize a block whose packets have all reached the client.

    Sets the completion time F to the latest client receive time, removes
    the block from the queue when one is given, and returns F.
    """
    if block.completion_time is not None:
        raise IllegalStateError("block %r already complete" % (block.block_id,))
    if block.expired:
        raise IllegalStateError("block %r expired, cannot complete" % (block.block_id,))
    receive_times = []
    for packet in block.packets:
        if packet.client_receive_time is None:
            raise IllegalStateError(
                "block %r: packet %r not yet received by client" % (block.block_id, packet.packet_id)
            )
        receive_times.append(packet.client_receive_time)
    finish = max(receive_times)
    if finish < block.arrival_time or math.isnan(finish):
        raise SimulationInvariantError(
            "block %r finished at %r before its arrival %r" % (block.block_id, finish, block.arrival_time)
        )
    block.completion_time = finish
    if queue is not None and block.block_id in queue:
        queue.remove(block)
    return finish


class SimClock:
    """Monotone simulation clock; moving backwards is a fatal error."""

    def __init__(self, now: float = 0.0) -> None:
        self.now = now

    def advance(self, to: float) -> None:
        if to < self.now:
            raise SimulationInvariantError("clock regression: %r -> %r" % (self.now, to))
        self.now = to
