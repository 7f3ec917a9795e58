"""Exception hierarchy shared by all faultstep components.

Every error raised by the public API derives from :class:`FaultstepError`,
so callers can catch the whole family with one clause.  Subclass names are
part of the API contract: foreign-language wrappers surface them by name.
"""


class FaultstepError(Exception):
    """Base class for all errors raised by this package."""


# --- state registry ---------------------------------------------------------

class DuplicateId(FaultstepError):
    """A segment id is already registered."""


class IdTooLong(FaultstepError):
    """Segment id exceeds 255 bytes when UTF-8 encoded."""


class InvalidSegmentId(FaultstepError):
    """Segment id is empty, contains NUL, or uses a reserved prefix."""


class PayloadTooLarge(FaultstepError):
    """Segment payload exceeds the 2**31 - 1 byte ceiling."""


class StaleHandle(FaultstepError):
    """Segment handle refers to a registry generation that was reset."""


class ProtectedSectionOpen(FaultstepError):
    """Snapshot attempted while a protected section is open (reject mode)."""


class UnbalancedExit(FaultstepError):
    """exit_protected called with no matching enter_protected."""


# --- checkpoint store -------------------------------------------------------

class NonMonotonicEpoch(FaultstepError):
    """Commit epoch is not greater than every epoch already in the directory."""


class RetentionTooSmall(FaultstepError):
    """Prune retention below the minimum of 2."""


class InvalidSnapshot(FaultstepError):
    """Snapshot handed to commit violates ordering or uniqueness rules."""


class IoFailure(FaultstepError):
    """Filesystem operation failed; no partial file is left under a final name."""


# --- failure detector -------------------------------------------------------

class DecodeError(FaultstepError):
    """Datagram cannot be decoded as a heartbeat."""


class BadMagic(DecodeError):
    """Datagram does not start with the heartbeat magic."""


class BadLength(DecodeError):
    """Datagram is not exactly the fixed heartbeat size."""


class UnsupportedVersion(DecodeError):
    """Heartbeat wire version is not one this implementation speaks."""


class BadFlags(DecodeError):
    """Heartbeat flags field holds bits this implementation does not define."""


class AlreadyBound(FaultstepError):
    """A termination signal is already bound in this process."""


# --- checkpoint policy ------------------------------------------------------

class MtbfTooSmall(FaultstepError):
    """Mean time between failures does not exceed downtime plus recovery."""


# --- metrics ----------------------------------------------------------------

class EmptySamples(FaultstepError):
    """A statistic was requested over an empty sample list."""


class NonPositiveTime(FaultstepError):
    """A duration that must be positive is zero or negative."""


class ParseError(FaultstepError):
    """A records file could not be parsed."""


# --- configuration / harness ------------------------------------------------

class ConfigError(FaultstepError):
    """Run configuration is missing, malformed, or inconsistent."""


class UnrecoverableFailure(FaultstepError):
    """A worker was lost with no checkpoint to restore and cold restart disabled."""


class NoCheckpoint(FaultstepError):
    """Resume requested but the checkpoint directory holds no valid checkpoint."""


class MetaMismatch(FaultstepError):
    """Checkpoint belongs to a different application or configuration."""
