"""In-process registry of checkpointable application state.

The application declares which byte blobs make up its resumable state by
registering named segments, each scoped either to the whole application
(global) or to one worker (local).  A snapshot of the registry is what the
checkpoint store persists.  Protected sections let the caller mark atomic
regions during which snapshots and termination-triggered shutdowns must
not fire.

All operations on one registry are serialized by an internal lock, so the
registry may be shared across threads; a snapshot is always consistent
with a single serialization point.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional

from .errors import (
    DuplicateId,
    IdTooLong,
    InvalidSegmentId,
    PayloadTooLarge,
    ProtectedSectionOpen,
    StaleHandle,
    UnbalancedExit,
)

MAX_ID_BYTES = 255
MAX_SEGMENT_BYTES = 2**31 - 1
RESERVED_PREFIX = "__"

REJECT = "reject"
DEFER = "defer"


@dataclass(frozen=True)
class SegmentScope:
    """Scope of a state segment: application-wide or owned by one worker.

    Use :meth:`global_scope` and :meth:`local`; the constructor is not
    meant to be called directly.
    """

    worker: Optional[int] = None

    def __post_init__(self):
        if self.worker is not None and self.worker < 0:
            raise ValueError("worker id must be non-negative")

    @classmethod
    def global_scope(cls) -> "SegmentScope":
        return cls(worker=None)

    @classmethod
    def local(cls, worker: int) -> "SegmentScope":
        if worker is None:
            raise ValueError("local scope requires a worker id")
        return cls(worker=int(worker))

    @property
    def is_global(self) -> bool:
        return self.worker is None

    def __str__(self) -> str:
        return "global" if self.is_global else "local(%d)" % self.worker


GLOBAL = SegmentScope.global_scope()


@dataclass(frozen=True)
class SegmentSnapshot:
    """One segment as captured by :meth:`StateRegistry.snapshot`.

    ``payload`` is a private copy: later registry updates never mutate it.
    """

    id: str
    scope: SegmentScope
    version: int
    payload: bytes


@dataclass(frozen=True)
class SegmentHandle:
    """Opaque reference to a registered segment.

    Becomes stale when the registry is reset; using a stale handle raises
    :class:`~faultstep.errors.StaleHandle`.
    """

    id: str
    generation: int


class _Segment:
    __slots__ = ("scope", "payload", "version")

    def __init__(self, scope: SegmentScope, payload: bytes):
        self.scope = scope
        self.payload = payload
        self.version = 0


def _check_id(segment_id: str, allow_reserved: bool) -> bytes:
    if not isinstance(segment_id, str) or not segment_id:
        raise InvalidSegmentId("segment id must be a nonempty string")
    if "\x00" in segment_id:
        raise InvalidSegmentId("segment id must not contain NUL")
    if not allow_reserved and segment_id.startswith(RESERVED_PREFIX):
        raise InvalidSegmentId(
            "segment ids starting with %r are reserved" % RESERVED_PREFIX
        )
    encoded = segment_id.encode("utf-8")
    if len(encoded) > MAX_ID_BYTES:
        raise IdTooLong(
            "segment id is %d bytes, limit is %d" % (len(encoded), MAX_ID_BYTES)
        )
    return encoded


def _check_payload(payload: bytes) -> bytes:
    payload = bytes(payload)
    if len(payload) > MAX_SEGMENT_BYTES:
        raise PayloadTooLarge(
            "segment payload is %d bytes, limit is %d"
            % (len(payload), MAX_SEGMENT_BYTES)
        )
    return payload


class StateRegistry:
    """Registry of named state segments plus the protected-section gate.

    ``mode`` selects what :meth:`snapshot` does while a protected section
    is open: ``"reject"`` raises ProtectedSectionOpen, ``"defer"`` blocks
    until the section closes.
    """

    def __init__(self, mode: str = REJECT):
        if mode not in (REJECT, DEFER):
            raise ValueError("mode must be %r or %r" % (REJECT, DEFER))
        self._mode = mode
        self._lock = threading.RLock()
        self._unprotected = threading.Condition(self._lock)
        self._segments: dict[str, _Segment] = {}
        self._generation = 0
        self._depth = 0

    @property
    def mode(self) -> str:
        return self._mode

    # -- registration and updates -------------------------------------------

    def register_segment(
        self, segment_id: str, scope: SegmentScope, initial_payload: bytes
    ) -> SegmentHandle:
        """Declare a new segment; it appears in snapshots at version 0."""
        return self._register(segment_id, scope, initial_payload, allow_reserved=False)

    def _register_reserved(
        self, segment_id: str, scope: SegmentScope, initial_payload: bytes
    ) -> SegmentHandle:
        # Internal entry point for the harness-owned "__"-prefixed segments.
        return self._register(segment_id, scope, initial_payload, allow_reserved=True)

    def _register(self, segment_id, scope, initial_payload, allow_reserved):
        _check_id(segment_id, allow_reserved)
        if not isinstance(scope, SegmentScope):
            raise TypeError("scope must be a SegmentScope")
        payload = _check_payload(initial_payload)
        with self._lock:
            if segment_id in self._segments:
                raise DuplicateId("segment id %r is already registered" % segment_id)
            self._segments[segment_id] = _Segment(scope, payload)
            return SegmentHandle(id=segment_id, generation=self._generation)

    def update_segment(self, handle: SegmentHandle, payload: bytes) -> int:
        """Replace a segment's payload; returns the new version number."""
        payload = _check_payload(payload)
        with self._lock:
            if handle.generation != self._generation:
                raise StaleHandle(
                    "handle for %r predates a registry reset" % handle.id
                )
            segment = self._segments.get(handle.id)
            if segment is None:
                raise StaleHandle("segment %r is no longer registered" % handle.id)
            segment.payload = payload
            segment.version += 1
            return segment.version

    def reset(self) -> None:
        """Drop all segments and invalidate every outstanding handle."""
        with self._lock:
            self._segments.clear()
            self._generation += 1
            self._depth = 0
            self._unprotected.notify_all()

    # -- snapshots -----------------------------------------------------------

    def snapshot(self, scope: Optional[SegmentScope] = None) -> list[SegmentSnapshot]:
        """Capture matching segments, sorted ascending by id bytes.

        ``scope=None`` captures everything; passing a SegmentScope keeps
        only exact matches (the global scope, or one worker's locals).
        Payloads are copies owned by the caller.
        """
        with self._lock:
            if self._depth > 0:
                if self._mode == REJECT:
                    raise ProtectedSectionOpen(
                        "snapshot blocked: protected section depth is %d"
                        % self._depth
                    )
                while self._depth > 0:
                    self._unprotected.wait()
            items = [
                SegmentSnapshot(
                    id=sid,
                    scope=seg.scope,
                    version=seg.version,
                    payload=bytes(seg.payload),
                )
                for sid, seg in self._segments.items()
                if scope is None or seg.scope == scope
            ]
        items.sort(key=lambda s: s.id.encode("utf-8"))
        return items

    # -- protected sections --------------------------------------------------

    def enter_protected(self) -> int:
        """Open (or nest) a protected section; returns the new depth."""
        with self._lock:
            self._depth += 1
            return self._depth

    def exit_protected(self) -> int:
        """Close one nesting level; returns the remaining depth."""
        with self._lock:
            if self._depth == 0:
                raise UnbalancedExit("exit_protected without matching enter")
            self._depth -= 1
            if self._depth == 0:
                self._unprotected.notify_all()
            return self._depth

    @property
    def protected_depth(self) -> int:
        with self._lock:
            return self._depth

    @property
    def in_protected_section(self) -> bool:
        return self.protected_depth > 0

    def protected(self):
        """Context manager wrapping enter_protected/exit_protected."""
        return _ProtectedSection(self)

    def __len__(self) -> int:
        with self._lock:
            return len(self._segments)

    def __contains__(self, segment_id: str) -> bool:
        with self._lock:
            return segment_id in self._segments


class _ProtectedSection:
    def __init__(self, registry: StateRegistry):
        self._registry = registry

    def __enter__(self):
        self._registry.enter_protected()
        return self._registry

    def __exit__(self, *exc):
        self._registry.exit_protected()
        return False
