"""Liveness monitoring over UDP heartbeats plus a termination watcher.

Workers send small fixed-layout datagrams on a period; the coordinator
timestamps arrivals and periodically runs :func:`HeartbeatMonitor.observe`,
a pure state-transition function that turns silence into failure events.
Keeping all detection logic out of the socket path means every rule here
is testable without a network and replayable against a reference run.

Datagram layout, little-endian, exactly 28 bytes::

    magic        u32   0x44454C41
    version      u8    1
    flags        u8    0
    node_id      u16
    incarnation  u32   bumped every time the node process restarts
    sequence     u64   per-incarnation counter
    timestamp_us u64   sender wall clock, informational only

All interval math uses the monotonic clock; the wall-clock stamp inside
the datagram is never used for detection.
"""

from __future__ import annotations

import logging
import queue
import signal
import socket
import struct
import threading
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .errors import AlreadyBound, BadFlags, BadLength, BadMagic, UnsupportedVersion

log = logging.getLogger(__name__)

HEARTBEAT_MAGIC = 0x44454C41
HEARTBEAT_VERSION = 1
HEARTBEAT_SIZE = 28

_HEARTBEAT = struct.Struct("<IBBHIQQ")
assert _HEARTBEAT.size == HEARTBEAT_SIZE

# FailureEvent kinds.
HEARTBEAT_TIMEOUT = "heartbeat_timeout"
TERMINATION_NOTICE = "termination_notice"

# TerminationNotice sources.
SOURCE_OS_SIGNAL = "os_signal"
SOURCE_INJECTED = "injected"


@dataclass(frozen=True)
class HeartbeatMessage:
    node_id: int
    incarnation: int
    sequence: int
    timestamp_us: int


@dataclass(frozen=True)
class DetectorConfig:
    """Heartbeat cadence and the miss budget before declaring failure."""

    period_ms: int
    misses_k: int
    listen_endpoint: str = "127.0.0.1:0"

    def __post_init__(self):
        if self.period_ms <= 0:
            raise ValueError("period_ms must be positive")
        if self.misses_k <= 0:
            raise ValueError("misses_k must be positive")

    @property
    def timeout_ns(self) -> int:
        return self.misses_k * self.period_ms * 1_000_000


@dataclass(frozen=True)
class FailureEvent:
    node_id: int
    kind: str  # HEARTBEAT_TIMEOUT or TERMINATION_NOTICE
    detected_at: int  # monotonic ns


@dataclass(frozen=True)
class TerminationNotice:
    source: str  # SOURCE_OS_SIGNAL or SOURCE_INJECTED
    deadline_hint_ms: Optional[int] = None


def encode_heartbeat(msg: HeartbeatMessage) -> bytes:
    return _HEARTBEAT.pack(
        HEARTBEAT_MAGIC,
        HEARTBEAT_VERSION,
        0,
        msg.node_id,
        msg.incarnation,
        msg.sequence,
        msg.timestamp_us,
    )


def decode_heartbeat(data: bytes) -> HeartbeatMessage:
    """Decode one datagram; any non-conforming input raises a DecodeError."""
    if len(data) != HEARTBEAT_SIZE:
        raise BadLength("expected %d bytes, got %d" % (HEARTBEAT_SIZE, len(data)))
    magic, version, flags, node_id, incarnation, sequence, ts = _HEARTBEAT.unpack(
        data
    )
    if magic != HEARTBEAT_MAGIC:
        raise BadMagic("bad heartbeat magic 0x%08X" % magic)
    if version != HEARTBEAT_VERSION:
        raise UnsupportedVersion("heartbeat version %d" % version)
    if flags != 0:
        raise BadFlags("nonzero flags 0x%02X" % flags)
    return HeartbeatMessage(
        node_id=node_id,
        incarnation=incarnation,
        sequence=sequence,
        timestamp_us=ts,
    )


@dataclass
class _NodeState:
    last_seen_ns: int
    incarnation: Optional[int] = None
    sequence: int = -1
    failed: bool = False


class HeartbeatMonitor:
    """Tracks per-node liveness from timestamped heartbeat arrivals.

    All logic lives in :meth:`observe`, which is deterministic in
    (current state, now, arrivals): feeding the same full arrival log
    through a fresh monitor reproduces the same event sequence.
    """

    def __init__(self, config: DetectorConfig, nodes: Iterable[int], armed_at_ns: int):
        self.config = config
        self._nodes = {
            node: _NodeState(last_seen_ns=armed_at_ns) for node in nodes
        }
        if not self._nodes:
            raise ValueError("expected node set must not be empty")
        self.unknown_sender_count = 0

    def observe(
        self, now_ns: int, arrivals: Iterable[tuple[int, HeartbeatMessage]]
    ) -> list[FailureEvent]:
        """Apply arrivals, then report nodes silent beyond the miss budget.

        Each arrival is (receive time in monotonic ns, decoded message).
        A message is accepted only if its (incarnation, sequence) is newer
        than the last accepted one; older incarnations earn no liveness
        credit.  A node reappearing with a higher incarnation has its
        failed status cleared and may time out again later, so at most one
        timeout is emitted per (node, incarnation).
        """
        for recv_ns, msg in arrivals:
            state = self._nodes.get(msg.node_id)
            if state is None:
                self.unknown_sender_count += 1
                continue
            if state.incarnation is None or msg.incarnation > state.incarnation:
                state.failed = False
                state.incarnation = msg.incarnation
                state.sequence = msg.sequence
                state.last_seen_ns = recv_ns
            elif msg.incarnation == state.incarnation and msg.sequence > state.sequence:
                state.sequence = msg.sequence
                state.last_seen_ns = recv_ns
            # else: stale, dropped.

        events = []
        for node_id in sorted(self._nodes):
            state = self._nodes[node_id]
            if state.failed:
                continue
            if now_ns - state.last_seen_ns > self.config.timeout_ns:
                state.failed = True
                events.append(
                    FailureEvent(
                        node_id=node_id,
                        kind=HEARTBEAT_TIMEOUT,
                        detected_at=now_ns,
                    )
                )
        return events

    def is_failed(self, node_id: int) -> bool:
        return self._nodes[node_id].failed

    def incarnation_of(self, node_id: int) -> Optional[int]:
        return self._nodes[node_id].incarnation


# --- network plumbing -------------------------------------------------------

def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, sep, port = endpoint.rpartition(":")
    if not sep or not host:
        raise ValueError("endpoint must be host:port, got %r" % endpoint)
    return host, int(port)


class HeartbeatReceiver:
    """Background UDP receiver: timestamps and queues datagrams, nothing else."""

    def __init__(self, endpoint: str):
        host, port = parse_endpoint(endpoint)
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind((host, port))
        self._sock.settimeout(0.05)
        self._queue: "queue.Queue[tuple[int, HeartbeatMessage]]" = queue.Queue()
        self._stop = threading.Event()
        self.decode_error_count = 0
        self._thread = threading.Thread(
            target=self._run, name="heartbeat-receiver", daemon=True
        )
        self._thread.start()

    @property
    def endpoint(self) -> str:
        host, port = self._sock.getsockname()[:2]
        return "%s:%d" % (host, port)

    def _run(self) -> None:
        while not self._stop.is_set():
            try:
                data, _addr = self._sock.recvfrom(2048)
            except socket.timeout:
                continue
            except OSError:
                break
            recv_ns = time.monotonic_ns()
            try:
                msg = decode_heartbeat(data)
            except Exception:
                self.decode_error_count += 1
                continue
            self._queue.put((recv_ns, msg))

    def drain(self) -> list[tuple[int, HeartbeatMessage]]:
        arrivals = []
        while True:
            try:
                arrivals.append(self._queue.get_nowait())
            except queue.Empty:
                return arrivals

    def close(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2.0)
        self._sock.close()


class HeartbeatSender:
    """Background thread sending one heartbeat per period until stopped."""

    def __init__(self, endpoint: str, node_id: int, incarnation: int, period_ms: int):
        self._addr = parse_endpoint(endpoint)
        self._node_id = node_id
        self._incarnation = incarnation
        self._period_s = period_ms / 1000.0
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._stop = threading.Event()
        self._thread = threading.Thread(
            target=self._run, name="heartbeat-sender-%d" % node_id, daemon=True
        )
        self._thread.start()

    def _run(self) -> None:
        sequence = 0
        while not self._stop.is_set():
            msg = HeartbeatMessage(
                node_id=self._node_id,
                incarnation=self._incarnation,
                sequence=sequence,
                timestamp_us=time.time_ns() // 1000,
            )
            try:
                self._sock.sendto(encode_heartbeat(msg), self._addr)
            except OSError:
                pass
            sequence += 1
            self._stop.wait(self._period_s)

    def close(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2.0)
        self._sock.close()


# --- termination watcher ----------------------------------------------------

class TerminationWatcher:
    """Latches a shutdown request and exposes it to polling.

    The notice is reported on every poll until acknowledged, except while
    ``hold_while`` (typically: the registry is inside a protected section)
    returns true, during which delivery is deferred.
    """

    _signal_bound = False
    _bind_lock = threading.Lock()

    def __init__(self, hold_while: Optional[Callable[[], bool]] = None):
        self._hold_while = hold_while
        self._lock = threading.Lock()
        self._notice: Optional[TerminationNotice] = None
        self._bound_signum: Optional[int] = None
        self._previous_handler = None

    def bind_signal(self, signum: int = signal.SIGTERM) -> None:
        """Route an OS signal into this watcher; one binding per process."""
        with TerminationWatcher._bind_lock:
            if TerminationWatcher._signal_bound:
                raise AlreadyBound(
                    "a termination signal is already bound in this process"
                )
            self._previous_handler = signal.signal(signum, self._on_signal)
            self._bound_signum = signum
            TerminationWatcher._signal_bound = True

    def unbind_signal(self) -> None:
        with TerminationWatcher._bind_lock:
            if self._bound_signum is None:
                return
            signal.signal(self._bound_signum, self._previous_handler)
            self._bound_signum = None
            self._previous_handler = None
            TerminationWatcher._signal_bound = False

    def _on_signal(self, signum, frame) -> None:
        with self._lock:
            if self._notice is None:
                self._notice = TerminationNotice(source=SOURCE_OS_SIGNAL)

    def inject(self, deadline_hint_ms: Optional[int] = None) -> None:
        with self._lock:
            if self._notice is None:
                self._notice = TerminationNotice(
                    source=SOURCE_INJECTED, deadline_hint_ms=deadline_hint_ms
                )

    def acknowledge(self) -> None:
        with self._lock:
            self._notice = None

    def poll(self) -> Optional[TerminationNotice]:
        if self._hold_while is not None and self._hold_while():
            return None
        with self._lock:
            return self._notice
