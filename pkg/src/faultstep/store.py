"""Crash-safe checkpoint persistence.

One checkpoint is one file, written atomically: bytes go to a ``.tmp``
sibling, are flushed to disk, and only then renamed to the final name, so
a file under its final name is either complete or absent.  Readers
validate everything (magic, header checksum, entry table shape, payload
checksums) and skip files that fail, so a torn or corrupted checkpoint
costs one epoch of history, never a crash.

File layout, little-endian throughout::

    magic        8 bytes  "DLCKPT01"
    version      u16      1
    epoch        u64
    created_at   u64      microseconds since the Unix epoch
    entry count  u32
    entry table, one record per segment:
        id length   u8
        id bytes    (UTF-8)
        scope tag   u8    0 = global, 1 = local
        worker id   u32   0 when global
        offset      u64   into the payload region
        length      u64
        checksum    u32   CRC-32 of the payload bytes
    header CRC   u32      CRC-32 over all preceding bytes
    payloads     concatenated, contiguous, in entry order

The CRC-32 is the IEEE one (polynomial 0x04C11DB7, reflected, initial and
final XOR 0xFFFFFFFF), i.e. exactly ``zlib.crc32``.
"""

from __future__ import annotations

import logging
import os
import re
import struct
import time
import zlib
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from .errors import InvalidSnapshot, IoFailure, NonMonotonicEpoch, RetentionTooSmall
from .registry import MAX_SEGMENT_BYTES, SegmentScope

log = logging.getLogger(__name__)

MAGIC = b"DLCKPT01"
FORMAT_VERSION = 1
FILE_SUFFIX = ".dck"
TMP_SUFFIX = ".tmp"

_FIXED_HEADER = struct.Struct("<8sHQQI")
_ENTRY_TAIL = struct.Struct("<BIQQI")  # scope tag, worker, offset, length, checksum
_CRC = struct.Struct("<I")

_SCOPE_GLOBAL = 0
_SCOPE_LOCAL = 1

_FILENAME_RE = re.compile(r"^ckpt-(\d{10})\.dck$")

VERDICT_VALID = "valid"
VERDICT_BAD_MAGIC = "invalid: bad magic"
VERDICT_TRUNCATED_HEADER = "invalid: truncated header"
VERDICT_UNSUPPORTED_VERSION = "invalid: unsupported version"
VERDICT_TRUNCATED_TABLE = "invalid: truncated entry table"
VERDICT_HEADER_CRC = "invalid: header checksum mismatch"
VERDICT_MALFORMED_TABLE = "invalid: malformed entry table"
VERDICT_TRUNCATED_PAYLOAD = "invalid: truncated payload region"
VERDICT_PAYLOAD_SIZE = "invalid: payload region size mismatch"
VERDICT_PAYLOAD_CRC = "invalid: payload checksum mismatch"


def crc32(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


def checkpoint_filename(epoch: int) -> str:
    return "ckpt-%010d%s" % (epoch, FILE_SUFFIX)


@dataclass(frozen=True)
class SegmentEntry:
    """One entry-table record of a checkpoint manifest."""

    id: str
    scope: SegmentScope
    offset: int
    length: int
    checksum: int


@dataclass(frozen=True)
class CheckpointManifest:
    """Decoded index of one checkpoint file."""

    epoch: int
    created_at_us: int
    entries: tuple[SegmentEntry, ...]
    committed: bool


@dataclass(frozen=True)
class StoredSegment:
    """One segment as read back from a checkpoint file."""

    id: str
    scope: SegmentScope
    payload: bytes


@dataclass
class FileReport:
    """Outcome of analyzing one checkpoint file's bytes.

    ``verdict`` is ``"valid"`` or one of the fixed ``invalid: ...``
    strings; the remaining fields hold whatever parsed before the
    failure point.
    """

    verdict: str
    size: int
    format_version: Optional[int] = None
    epoch: Optional[int] = None
    created_at_us: Optional[int] = None
    entry_count: Optional[int] = None
    entries: list[SegmentEntry] = None  # type: ignore[assignment]
    payloads: Optional[list[bytes]] = None

    def __post_init__(self):
        if self.entries is None:
            self.entries = []

    @property
    def valid(self) -> bool:
        return self.verdict == VERDICT_VALID


# --- encoding ---------------------------------------------------------------

def encode_checkpoint(
    epoch: int, segments: Sequence, created_at_us: int
) -> bytes:
    """Serialize a snapshot into checkpoint-file bytes.

    ``segments`` is an ordered sequence of objects with ``id``, ``scope``
    and ``payload`` attributes (e.g. registry snapshots), already sorted
    ascending by id bytes.
    """
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    ids = [s.id.encode("utf-8") for s in segments]
    for raw, seg in zip(ids, segments):
        if not 1 <= len(raw) <= 255:
            raise InvalidSnapshot("segment id %r has invalid length" % seg.id)
        if len(seg.payload) > MAX_SEGMENT_BYTES:
            raise InvalidSnapshot("segment %r payload too large" % seg.id)
    for a, b in zip(ids, ids[1:]):
        if a >= b:
            raise InvalidSnapshot(
                "snapshot ids must be strictly ascending by bytes"
            )

    parts = [
        _FIXED_HEADER.pack(
            MAGIC, FORMAT_VERSION, epoch, created_at_us, len(segments)
        )
    ]
    offset = 0
    for raw, seg in zip(ids, segments):
        payload = bytes(seg.payload)
        scope = seg.scope
        tag = _SCOPE_GLOBAL if scope.is_global else _SCOPE_LOCAL
        worker = 0 if scope.is_global else scope.worker
        parts.append(struct.pack("<B", len(raw)))
        parts.append(raw)
        parts.append(
            _ENTRY_TAIL.pack(tag, worker, offset, len(payload), crc32(payload))
        )
        offset += len(payload)
    header = b"".join(parts)
    parts.append(_CRC.pack(crc32(header)))
    parts.extend(bytes(s.payload) for s in segments)
    return b"".join(parts)


# --- decoding and validation ------------------------------------------------

def analyze(data: bytes) -> FileReport:
    """Classify checkpoint bytes, parsing as far as the bytes allow."""
    report = FileReport(verdict=VERDICT_VALID, size=len(data))

    if len(data) < _FIXED_HEADER.size:
        if data[: len(MAGIC)] != MAGIC[: len(data)]:
            report.verdict = VERDICT_BAD_MAGIC
        else:
            report.verdict = VERDICT_TRUNCATED_HEADER
        return report
    magic, version, epoch, created_at, count = _FIXED_HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        report.verdict = VERDICT_BAD_MAGIC
        return report
    report.format_version = version
    if version != FORMAT_VERSION:
        report.verdict = VERDICT_UNSUPPORTED_VERSION
        return report
    report.epoch = epoch
    report.created_at_us = created_at
    report.entry_count = count

    pos = _FIXED_HEADER.size
    raw_ids = []
    for _ in range(count):
        if pos + 1 > len(data):
            report.verdict = VERDICT_TRUNCATED_TABLE
            return report
        id_len = data[pos]
        pos += 1
        if pos + id_len + _ENTRY_TAIL.size > len(data):
            report.verdict = VERDICT_TRUNCATED_TABLE
            return report
        raw_id = data[pos : pos + id_len]
        pos += id_len
        tag, worker, offset, length, checksum = _ENTRY_TAIL.unpack_from(data, pos)
        pos += _ENTRY_TAIL.size
        if tag not in (_SCOPE_GLOBAL, _SCOPE_LOCAL):
            report.verdict = VERDICT_MALFORMED_TABLE
            return report
        if tag == _SCOPE_GLOBAL:
            if worker != 0:
                report.verdict = VERDICT_MALFORMED_TABLE
                return report
            scope = SegmentScope.global_scope()
        else:
            scope = SegmentScope.local(worker)
        raw_ids.append(raw_id)
        report.entries.append(
            SegmentEntry(
                id=raw_id.decode("utf-8", errors="replace"),
                scope=scope,
                offset=offset,
                length=length,
                checksum=checksum,
            )
        )
    if pos + _CRC.size > len(data):
        report.verdict = VERDICT_TRUNCATED_TABLE
        return report
    (stored_crc,) = _CRC.unpack_from(data, pos)
    if crc32(data[:pos]) != stored_crc:
        report.verdict = VERDICT_HEADER_CRC
        return report
    pos += _CRC.size

    # Structural rules: ids strictly ascending and unique, payload regions
    # contiguous in entry order, global entries carry worker id 0.
    expected_offset = 0
    for raw_id, entry in zip(raw_ids, report.entries):
        if not raw_id:
            report.verdict = VERDICT_MALFORMED_TABLE
            return report
        if entry.offset != expected_offset:
            report.verdict = VERDICT_MALFORMED_TABLE
            return report
        expected_offset += entry.length
    for a, b in zip(raw_ids, raw_ids[1:]):
        if a >= b:
            report.verdict = VERDICT_MALFORMED_TABLE
            return report

    available = len(data) - pos
    if available < expected_offset:
        report.verdict = VERDICT_TRUNCATED_PAYLOAD
        return report
    if available > expected_offset:
        report.verdict = VERDICT_PAYLOAD_SIZE
        return report

    payloads = []
    for entry in report.entries:
        payload = data[pos + entry.offset : pos + entry.offset + entry.length]
        if crc32(payload) != entry.checksum:
            report.verdict = VERDICT_PAYLOAD_CRC
            return report
        payloads.append(payload)
    report.payloads = payloads
    return report


def decode_checkpoint(
    data: bytes, committed: bool = False
) -> tuple[CheckpointManifest, list[StoredSegment]]:
    """Decode valid checkpoint bytes; raises IoFailure on invalid data."""
    report = analyze(data)
    if not report.valid:
        raise IoFailure("checkpoint rejected: %s" % report.verdict)
    manifest = CheckpointManifest(
        epoch=report.epoch,
        created_at_us=report.created_at_us,
        entries=tuple(report.entries),
        committed=committed,
    )
    segments = [
        StoredSegment(id=e.id, scope=e.scope, payload=p)
        for e, p in zip(report.entries, report.payloads)
    ]
    return manifest, segments


# --- directory operations ---------------------------------------------------

def committed_epochs(directory) -> list[int]:
    """Epochs of committed checkpoint files, by file name, ascending.

    Monotonicity is judged from names alone so a restarted writer sees
    the same history an in-memory one would.
    """
    directory = Path(directory)
    try:
        names = os.listdir(directory)
    except OSError as exc:
        raise IoFailure("cannot list %s: %s" % (directory, exc)) from exc
    epochs = []
    for name in names:
        match = _FILENAME_RE.match(name)
        if match:
            epochs.append(int(match.group(1)))
    epochs.sort()
    return epochs


def commit(
    directory,
    epoch: int,
    snapshot: Sequence,
    created_at_us: Optional[int] = None,
    durable: bool = True,
) -> Path:
    """Atomically persist a snapshot as epoch ``epoch``.

    The epoch must be strictly greater than every epoch already committed
    in the directory.  ``created_at_us`` defaults to the current wall
    clock; pin it to make output bytes reproducible.  Returns the path of
    the committed file.
    """
    directory = Path(directory)
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    existing = committed_epochs(directory)
    if existing and epoch <= existing[-1]:
        raise NonMonotonicEpoch(
            "epoch %d is not greater than committed epoch %d"
            % (epoch, existing[-1])
        )
    if created_at_us is None:
        created_at_us = time.time_ns() // 1000
    data = encode_checkpoint(epoch, snapshot, created_at_us)

    final = directory / checkpoint_filename(epoch)
    tmp = Path(str(final) + TMP_SUFFIX)
    try:
        fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o644)
        try:
            os.write(fd, data)
            if durable:
                os.fsync(fd)
        finally:
            os.close(fd)
        os.rename(tmp, final)
        if durable:
            _fsync_dir(directory)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoFailure("commit of epoch %d failed: %s" % (epoch, exc)) from exc
    return final


def _fsync_dir(directory: Path) -> None:
    fd = os.open(directory, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


def read_checkpoint(path) -> tuple[CheckpointManifest, list[StoredSegment]]:
    """Read and fully validate one checkpoint file."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure("cannot read %s: %s" % (path, exc)) from exc
    committed = _FILENAME_RE.match(path.name) is not None
    return decode_checkpoint(data, committed=committed)


def restore_latest(directory) -> Optional[tuple[int, list[StoredSegment]]]:
    """Return the highest-epoch fully-valid checkpoint, or None.

    Files failing validation are skipped and left in place.
    """
    directory = Path(directory)
    epochs = committed_epochs(directory)
    for epoch in reversed(epochs):
        path = directory / checkpoint_filename(epoch)
        try:
            data = path.read_bytes()
        except OSError as exc:
            log.warning("skipping unreadable checkpoint %s: %s", path, exc)
            continue
        report = analyze(data)
        if not report.valid:
            log.warning("skipping checkpoint %s: %s", path.name, report.verdict)
            continue
        if report.epoch != epoch:
            log.warning(
                "skipping checkpoint %s: header epoch %d disagrees with name",
                path.name,
                report.epoch,
            )
            continue
        segments = [
            StoredSegment(id=e.id, scope=e.scope, payload=p)
            for e, p in zip(report.entries, report.payloads)
        ]
        return epoch, segments
    return None


def prune(directory, retention: int) -> list[str]:
    """Delete valid checkpoints beyond the ``retention`` newest.

    Retention must be at least 2 so a crash during the next commit can
    never leave zero restorable checkpoints.  Files that fail validation
    are never deleted.  Returns the deleted file names.
    """
    if retention < 2:
        raise RetentionTooSmall("retention must be >= 2, got %d" % retention)
    directory = Path(directory)
    valid = []
    for epoch in committed_epochs(directory):
        path = directory / checkpoint_filename(epoch)
        try:
            if analyze(path.read_bytes()).valid:
                valid.append((epoch, path))
        except OSError:
            continue
    deleted = []
    for _, path in valid[:-retention]:
        try:
            os.unlink(path)
        except OSError as exc:
            raise IoFailure("cannot delete %s: %s" % (path, exc)) from exc
        deleted.append(path.name)
    return deleted


# --- inspection -------------------------------------------------------------

def inspect_lines(path) -> list[str]:
    """Describe a checkpoint file as ``key: value`` lines.

    Prints whatever parses, then the validation verdict.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure("cannot read %s: %s" % (path, exc)) from exc
    report = analyze(data)
    lines = [
        "file: %s" % path.name,
        "size: %d" % report.size,
    ]
    if report.format_version is not None:
        lines.append("format_version: %d" % report.format_version)
    if report.epoch is not None:
        lines.append("epoch: %d" % report.epoch)
    if report.created_at_us is not None:
        stamp = datetime.fromtimestamp(
            report.created_at_us / 1e6, tz=timezone.utc
        )
        lines.append("created_at_us: %d" % report.created_at_us)
        lines.append("created_at: %s" % stamp.isoformat())
    if report.entry_count is not None:
        lines.append("entries: %d" % report.entry_count)
    for i, entry in enumerate(report.entries):
        prefix = "entry[%d]" % i
        lines.append("%s.id: %s" % (prefix, entry.id))
        lines.append("%s.scope: %s" % (prefix, entry.scope))
        lines.append("%s.length: %d" % (prefix, entry.length))
        lines.append("%s.checksum: 0x%08X" % (prefix, entry.checksum))
    lines.append("verdict: %s" % report.verdict)
    return lines


def inspect_file(path) -> str:
    return "\n".join(inspect_lines(path)) + "\n"
