"""Fault-tolerance toolkit for iterative bulk-synchronous programs.

Register the state that matters, commit it at superstep barriers under a
pluggable checkpoint policy, detect failed workers by heartbeat silence,
and roll the whole computation back to the last committed epoch so the
replayed run is bit-identical to an undisturbed one.
"""

from .apps import AppSpec
from .detector import (
    DetectorConfig,
    FailureEvent,
    HeartbeatMessage,
    TerminationNotice,
    TerminationWatcher,
    decode_heartbeat,
    encode_heartbeat,
)
from .errors import FaultstepError
from .harness import (
    FaultPlan,
    Injection,
    RunConfig,
    RunResult,
    bench,
    resume,
    run,
)
from .metrics import (
    OverheadReport,
    RunRecord,
    failure_free_overhead,
    median,
    relative_overhead,
)
from .policy import (
    CostModel,
    EveryKSupersteps,
    Never,
    TimeInterval,
    YoungDaly,
    should_checkpoint,
    young_daly_interval,
)
from .registry import (
    GLOBAL,
    SegmentHandle,
    SegmentScope,
    SegmentSnapshot,
    StateRegistry,
)
from .store import (
    CheckpointManifest,
    StoredSegment,
    commit,
    decode_checkpoint,
    encode_checkpoint,
    inspect_file,
    prune,
    restore_latest,
)

__version__ = "0.1.0"

__all__ = [
    "AppSpec",
    "CheckpointManifest",
    "CostModel",
    "DetectorConfig",
    "EveryKSupersteps",
    "FailureEvent",
    "FaultPlan",
    "FaultstepError",
    "GLOBAL",
    "HeartbeatMessage",
    "Injection",
    "Never",
    "OverheadReport",
    "RunConfig",
    "RunRecord",
    "RunResult",
    "SegmentHandle",
    "SegmentScope",
    "SegmentSnapshot",
    "StateRegistry",
    "StoredSegment",
    "TerminationNotice",
    "TerminationWatcher",
    "TimeInterval",
    "YoungDaly",
    "bench",
    "commit",
    "decode_checkpoint",
    "decode_heartbeat",
    "encode_checkpoint",
    "encode_heartbeat",
    "failure_free_overhead",
    "inspect_file",
    "median",
    "prune",
    "relative_overhead",
    "restore_latest",
    "resume",
    "run",
    "should_checkpoint",
    "young_daly_interval",
]
