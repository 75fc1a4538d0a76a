"""Block selection policies.

All policies see the same view: the queue of live blocks in arrival
order, already stripped of expired blocks, restricted to blocks that
have a packet ready to send. They return the id of the block whose head
packet should enter the selection queue next.

The proposed policy is regime-switched. A lost packet awaiting
retransmission always preempts fresh data. Otherwise, with remaining
deadline ratio Dr, remaining size ratio Sr, remaining unacked packet
count Pkt, and priority P:

  scarce link (low regime):    maximize Dr / Pkt * (1 + P)
      spend the little capacity on blocks with slack and rank, they are
      the only ones that can still finish
  plentiful link (high regime): minimize Dr * (1 + P) / Sr
      everything can finish, so clear urgent bulky low-rank blocks
      before their windows close
  moderate link (mid regime):  minimize Sr * Pkt, tie-break on smaller
      Dr / Pkt: finish the block closest to done, preferring the more
      urgent one on ties

In the high regime a candidate that loses the ratio comparison is still
given the mid-regime comparison before being discarded; this fall
through matches the intended cascade of the policy. Ties in every
comparison go to the later block in queue order because each update rule
uses a non-strict comparison.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import ConfigurationError, IllegalStateError
from .model import Block, BlockAwaitingQueue, BlockId, PacketState
from .predictor import Regime


@dataclass(frozen=True)
class BlockStats:
    """Scheduling features of one live block at one instant."""

    remaining_size_ratio: float  # Sr: unacked bytes / total bytes
    remaining_deadline_ratio: float  # Dr: time left / deadline window
    remaining_packets: int  # Pkt: unacked packet count
    priority: int  # P


def compute_block_stats(block: Block, now: float) -> BlockStats:
    if block.expired or now > block.expiry_time:
        raise IllegalStateError("block %r is expired at %r" % (block.block_id, now))
    return BlockStats(
        remaining_size_ratio=block.unacked_bytes / block.total_bytes,
        remaining_deadline_ratio=(block.expiry_time - now) / block.deadline_s,
        remaining_packets=block.unacked_packets,
        priority=block.priority,
    )


def filter_expired(queue: BlockAwaitingQueue, now: float) -> list[Block]:
    """Remove blocks whose deadline window has closed (strictly past it).

    Unsent packets of an expired block are discarded; packets already on
    the wire keep flying and their responses are still processed. Returns
    the expired blocks so the caller can record their outcomes.
    """
    expired = [b for b in queue if now - b.arrival_time > b.deadline_s]
    for block in expired:
        block.expired = True
        for packet in block.pending:
            packet.state = PacketState.EXPIRED_DISCARDED
        block.pending.clear()
        queue.remove(block)
    return expired


class DecisionReason(str, enum.Enum):
    RETRANSMISSION = "retransmission"
    LOW_REGIME = "low_regime"
    HIGH_REGIME = "high_regime"
    MID_SIZE = "mid_size"
    MID_DEADLINE = "mid_deadline"
    FIRST_BLOCK = "first_block"
    NONE_ELIGIBLE = "none_eligible"


@dataclass(frozen=True)
class SchedulerDecision:
    selected: BlockId | None
    reason: DecisionReason
    score: float | None = None


@dataclass
class SchedulingContext:
    """Everything a policy may look at for one decision."""

    now: float
    blocks: list[Block]  # live, sendable, arrival order
    stats: list[BlockStats]
    retransmission: list[bool]  # head packet is a loss retransmission
    regime: Regime
    smoothed_bw: float  # bytes/s


def _key_low(s: BlockStats) -> float:
    return s.remaining_deadline_ratio / s.remaining_packets * (1.0 + s.priority)


def _key_high(s: BlockStats) -> float:
    return s.remaining_deadline_ratio * (1.0 + s.priority) / s.remaining_size_ratio


def _key_mid_size(s: BlockStats) -> float:
    return s.remaining_size_ratio * s.remaining_packets


def _key_mid_deadline(s: BlockStats) -> float:
    return s.remaining_deadline_ratio / s.remaining_packets


def select_block_proposed(ctx: SchedulingContext, literal_mid_branch: bool = False) -> SchedulerDecision:
    """Regime-switched champion scan, one pass over the queue.

    literal_mid_branch replays a quirk of the policy's original
    pseudocode in which the mid-regime update lines compare but never
    reassign the champion; the default closes that gap with the intended
    smallest remaining work rule.
    """
    n = len(ctx.blocks)
    if n == 0:
        return SchedulerDecision(None, DecisionReason.NONE_ELIGIBLE)
    stats = ctx.stats
    regime = ctx.regime
    champ = 0
    reason = DecisionReason.FIRST_BLOCK
    champ_retx = bool(ctx.retransmission[0])
    if champ_retx:
        reason = DecisionReason.RETRANSMISSION
    for i in range(1, n):
        if ctx.retransmission[i]:
            champ, reason, champ_retx = i, DecisionReason.RETRANSMISSION, True
            continue
        if champ_retx:
            continue  # nothing outranks a pending retransmission
        if regime is Regime.LOW:
            if _key_low(stats[champ]) <= _key_low(stats[i]):
                champ, reason = i, DecisionReason.LOW_REGIME
            continue
        if regime is Regime.HIGH:
            if _key_high(stats[champ]) >= _key_high(stats[i]):
                champ, reason = i, DecisionReason.HIGH_REGIME
                continue
            # losing the high-regime test still earns the mid comparison
        if literal_mid_branch:
            continue
        if _key_mid_size(stats[i]) < _key_mid_size(stats[champ]):
            champ, reason = i, DecisionReason.MID_SIZE
        elif (_key_mid_size(stats[i]) == _key_mid_size(stats[champ])
              and _key_mid_deadline(stats[i]) <= _key_mid_deadline(stats[champ])):
            champ, reason = i, DecisionReason.MID_DEADLINE
    if champ_retx:
        score = None
    elif regime is Regime.LOW:
        score = _key_low(stats[champ])
    elif regime is Regime.HIGH:
        score = _key_high(stats[champ])
    else:
        score = _key_mid_size(stats[champ])
    return SchedulerDecision(ctx.blocks[champ].block_id, reason, score)


def select_block_fifo(ctx: SchedulingContext) -> SchedulerDecision:
    """Oldest block first."""
    if not ctx.blocks:
        return SchedulerDecision(None, DecisionReason.NONE_ELIGIBLE)
    return SchedulerDecision(ctx.blocks[0].block_id, DecisionReason.FIRST_BLOCK)


def select_block_sfra(ctx: SchedulingContext) -> SchedulerDecision:
    """Smallest remaining size ratio first; ties keep the earlier arrival."""
    if not ctx.blocks:
        return SchedulerDecision(None, DecisionReason.NONE_ELIGIBLE)
    best = 0
    for i in range(1, len(ctx.blocks)):
        if ctx.stats[i].remaining_size_ratio < ctx.stats[best].remaining_size_ratio:
            best = i
    return SchedulerDecision(ctx.blocks[best].block_id, DecisionReason.FIRST_BLOCK,
                             ctx.stats[best].remaining_size_ratio)


def select_block_rswn(ctx: SchedulingContext) -> SchedulerDecision:
    """Highest static weight (1 + P) among blocks the current bandwidth
    estimate says can still finish inside their windows; ties keep the
    earlier absolute deadline. Falls back to the earliest absolute
    deadline when nothing looks completable."""
    if not ctx.blocks:
        return SchedulerDecision(None, DecisionReason.NONE_ELIGIBLE)
    best = -1
    best_key = None
    for i, (block, s) in enumerate(zip(ctx.blocks, ctx.stats)):
        time_left = block.expiry_time - ctx.now
        if ctx.smoothed_bw <= 0 or block.unacked_bytes / ctx.smoothed_bw > time_left:
            continue
        key = (-(1 + s.priority), block.expiry_time)
        if best < 0 or key < best_key:
            best, best_key = i, key
    if best < 0:
        best = min(range(len(ctx.blocks)), key=lambda i: (ctx.blocks[i].expiry_time, i))
        return SchedulerDecision(ctx.blocks[best].block_id, DecisionReason.FIRST_BLOCK,
                                 ctx.blocks[best].expiry_time)
    return SchedulerDecision(ctx.blocks[best].block_id, DecisionReason.FIRST_BLOCK,
                             float(1 + ctx.stats[best].priority))


class Scheduler:
    """Stateful policy wrapper driven by the simulation."""

    name = "base"

    def select(self, ctx: SchedulingContext) -> SchedulerDecision:
        raise NotImplementedError

    def note_block_resolved(self, element_id: int, on_time: bool) -> None:
        """Called once per block when it completes or expires."""


class ProposedScheduler(Scheduler):
    name = "proposed"

    def __init__(self, literal_mid_branch: bool = False) -> None:
        self.literal_mid_branch = literal_mid_branch

    def select(self, ctx: SchedulingContext) -> SchedulerDecision:
        return select_block_proposed(ctx, self.literal_mid_branch)


class FifoScheduler(Scheduler):
    name = "fifo"

    def select(self, ctx: SchedulingContext) -> SchedulerDecision:
        return select_block_fifo(ctx)


class SfraScheduler(Scheduler):
    """Shortest-fraction-remaining approximation of a drain-fastest policy."""

    name = "sfra"

    def select(self, ctx: SchedulingContext) -> SchedulerDecision:
        return select_block_sfra(ctx)


class LdfScheduler(Scheduler):
    """Largest-deficit-first service across elements.

    Each element accrues deficit at its block arrival rate (blocks per
    second, scaled by wall time between decisions) and pays one unit back
    when a block of that element completes on time. The eligible block
    whose element holds the largest deficit is served; ties keep the
    earlier arrival.
    """

    name = "ldf"

    def __init__(self, rates: dict[int, float]) -> None:
        self.rates = dict(rates)
        self.deficits = {k: 0.0 for k in self.rates}
        self._last_tick = 0.0

    def _tick(self, now: float) -> None:
        dt = now - self._last_tick
        if dt > 0:
            for k, rate in self.rates.items():
                self.deficits[k] += rate * dt
        self._last_tick = max(self._last_tick, now)

    def select(self, ctx: SchedulingContext) -> SchedulerDecision:
        self._tick(ctx.now)
        if not ctx.blocks:
            return SchedulerDecision(None, DecisionReason.NONE_ELIGIBLE)
        best = 0
        best_deficit = self.deficits.get(ctx.blocks[0].element_id, 0.0)
        for i in range(1, len(ctx.blocks)):
            d = self.deficits.get(ctx.blocks[i].element_id, 0.0)
            if d > best_deficit:
                best, best_deficit = i, d
        return SchedulerDecision(ctx.blocks[best].block_id, DecisionReason.FIRST_BLOCK, best_deficit)

    def note_block_resolved(self, element_id: int, on_time: bool) -> None:
        if on_time and element_id in self.deficits:
            self.deficits[element_id] = max(0.0, self.deficits[element_id] - 1.0)


class RswnScheduler(Scheduler):
    """Rate-aware static weights: serve the heaviest block that current
    bandwidth says can still make its window."""

    name = "rswn"

    def select(self, ctx: SchedulingContext) -> SchedulerDecision:
        return select_block_rswn(ctx)


SCHEDULER_NAMES = ("proposed", "fifo", "sfra", "ldf", "rswn")


def make_scheduler(name: str, scenario=None, literal_mid_branch: bool = False) -> Scheduler:
    """Build a policy by name; ldf derives its per-element rates from the
    scenario's block periods."""
    if name == "proposed":
        return ProposedScheduler(literal_mid_branch=literal_mid_branch)
    if name == "fifo":
        return FifoScheduler()
    if name == "sfra":
        return SfraScheduler()
    if name == "ldf":
        if scenario is None:
            raise IllegalStateError("ldf needs a scenario to derive arrival rates")
        return LdfScheduler({e.element_id: 1.0 / e.period_s for e in scenario.elements})
    if name == "rswn":
        return RswnScheduler()
    raise ConfigurationError("unknown scheduler %r (known: %s)" % (name, ", ".join(SCHEDULER_NAMES)))
