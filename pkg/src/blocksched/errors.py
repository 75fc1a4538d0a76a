"""Exception types. Configuration problems exit the CLI with code 1,
simulation invariant violations with code 2."""
from __future__ import annotations


class ConfigurationError(Exception):
    """Invalid scenario, trace, threshold, or run parameters."""


class TraceParseError(ConfigurationError):
    """Malformed trace input; message names the offending line."""


class DuplicateBlockError(ConfigurationError):
    """A block id was enqueued twice."""


class IllegalStateError(RuntimeError):
    """An operation ran against an object in the wrong lifecycle state."""


class DegenerateLatencyError(ValueError):
    """Sending latency is zero or negative, no throughput sample exists."""


class DegenerateIntervalError(ValueError):
    """A measurement window has zero or negative width."""


class SimulationInvariantError(RuntimeError):
    """The event loop or bookkeeping reached a provably wrong state."""
