"""BSP coordinator: supersteps, barriers, checkpoints, and recovery.

One coordinator drives N workers through a fixed number of supersteps.
At each barrier it reduces worker contributions into the global state,
asks the checkpoint policy whether to commit, and polls for termination
notices.  Worker loss (declared by the heartbeat detector, or injected)
triggers a coordinated rollback: every worker is respawned with an
incremented incarnation and the latest committed checkpoint is restored,
global and local segments alike, so the replayed trajectory is
bit-identical to an undisturbed run.

Two worker backends share the coordinator:

* process mode - workers are forked OS processes speaking over pipes and
  sending real UDP heartbeats; fail-stop injection is SIGKILL.
* in-process mode - workers are plain objects stepped sequentially;
  fail-stop injection drops the worker's state and surfaces the same
  failure event the detector would, without sockets or timing.  This is
  the fast path for randomized recovery suites.

Epoch numbering equals the superstep after which the commit happened, so
a restored epoch tells the coordinator exactly where to resume.
"""

from __future__ import annotations

import json
import logging
import os
import signal
import struct
import time
import uuid
from dataclasses import dataclass, replace
from multiprocessing import get_context
from pathlib import Path
from typing import Optional

from . import store
from .apps import AppSpec, make_app
from .detector import (
    DetectorConfig,
    FailureEvent,
    HEARTBEAT_TIMEOUT,
    HeartbeatMonitor,
    HeartbeatReceiver,
    HeartbeatSender,
    TerminationWatcher,
)
from .errors import (
    ConfigError,
    MetaMismatch,
    NoCheckpoint,
    UnrecoverableFailure,
)
from .metrics import RunRecord, VARIANT_BASELINE, VARIANT_INSTRUMENTED
from .policy import CheckpointStrategy, resolve, should_checkpoint
from .registry import GLOBAL, SegmentScope, StateRegistry

log = logging.getLogger(__name__)

KIND_FAIL_STOP = "fail_stop"
KIND_TERMINATION_NOTICE = "termination_notice"

MODE_PROCESS = "process"
MODE_IN_PROCESS = "in_process"

STATUS_COMPLETED = "completed"
STATUS_RESUMABLE = "resumable"

META_SEGMENT = "__meta"

_mp = get_context("fork")


@dataclass(frozen=True)
class Injection:
    """One planned fault: exactly one trigger, one target, one kind."""

    worker: int
    kind: str
    at_superstep: Optional[int] = None
    at_elapsed_ms: Optional[int] = None

    def __post_init__(self):
        if self.kind not in (KIND_FAIL_STOP, KIND_TERMINATION_NOTICE):
            raise ValueError("unknown injection kind %r" % self.kind)
        triggers = (self.at_superstep is not None) + (self.at_elapsed_ms is not None)
        if triggers != 1:
            raise ValueError(
                "injection needs exactly one of at_superstep/at_elapsed_ms"
            )
        if self.at_superstep is not None and self.at_superstep < 1:
            raise ValueError("at_superstep starts at 1")
        if self.at_elapsed_ms is not None and self.at_elapsed_ms < 0:
            raise ValueError("at_elapsed_ms must be non-negative")
        if self.worker < 0:
            raise ValueError("worker must be non-negative")


@dataclass(frozen=True)
class FaultPlan:
    injections: tuple[Injection, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "injections", tuple(self.injections))
        if len(set(self.injections)) != len(self.injections):
            raise ValueError("duplicate injection in fault plan")


EMPTY_PLAN = FaultPlan()


@dataclass(frozen=True)
class RunConfig:
    workers: int
    supersteps: int
    strategy: CheckpointStrategy
    checkpoint_dir: Path
    detector: DetectorConfig = DetectorConfig(period_ms=500, misses_k=3)
    local_checkpointing: bool = True
    worker_mode: str = MODE_PROCESS
    allow_cold_restart: bool = False
    termination_signal: int = signal.SIGTERM

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.supersteps < 1:
            raise ConfigError("supersteps must be >= 1")
        if self.worker_mode not in (MODE_PROCESS, MODE_IN_PROCESS):
            raise ConfigError("unknown worker_mode %r" % self.worker_mode)
        object.__setattr__(self, "checkpoint_dir", Path(self.checkpoint_dir))


@dataclass
class RunResult:
    global_state: dict[str, bytes]
    record: RunRecord
    status: str  # STATUS_COMPLETED or STATUS_RESUMABLE
    last_epoch: Optional[int]  # highest epoch committed by this run, if any


def canonical_global_bytes(global_state: dict[str, bytes]) -> bytes:
    """Flatten a global-state map for byte-equality comparisons."""
    parts = []
    for key in sorted(global_state):
        raw = key.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<Q", len(global_state[key])))
        parts.append(global_state[key])
    return b"".join(parts)


def _meta_payload(spec: AppSpec, config: RunConfig) -> bytes:
    return json.dumps(
        {
            "name": spec.name,
            "dimension": spec.dimension,
            "population_or_grid": spec.population_or_grid,
            "seed": spec.seed,
            "workers": config.workers,
        },
        sort_keys=True,
    ).encode("utf-8")


class _WorkerLost(Exception):
    """Internal control flow: a worker failed during the current superstep."""

    def __init__(self, event: FailureEvent):
        super().__init__("worker %d lost" % event.node_id)
        self.event = event


# --- in-process worker backend ---------------------------------------------

class _InProcessPool:
    def __init__(self, spec, workers, incarnation, locals_by_worker):
        self._app = make_app(spec, workers)
        self._workers = workers
        self.incarnation = incarnation
        self._locals = {}
        self._dead = set()
        for w in range(workers):
            provided = locals_by_worker.get(w)
            self._locals[w] = (
                dict(provided) if provided else self._app.init_local(w)
            )
        self._kill_next_step = set()

    def schedule_kill(self, worker: int) -> None:
        self._kill_next_step.add(worker)

    def step(self, superstep, global_map, on_poll, after_dispatch) -> list[bytes]:
        after_dispatch()
        contributions = []
        for w in range(self._workers):
            on_poll()
            if w in self._kill_next_step:
                self._kill_next_step.discard(w)
                self._dead.add(w)
                self._locals[w] = None
            if w in self._dead:
                continue
            new_local, contribution = self._app.superstep(
                w, superstep, global_map, self._locals[w]
            )
            self._locals[w] = new_local
            contributions.append(contribution)
        if self._dead:
            lost = min(self._dead)
            raise _WorkerLost(
                FailureEvent(
                    node_id=lost,
                    kind=HEARTBEAT_TIMEOUT,
                    detected_at=time.monotonic_ns(),
                )
            )
        return contributions

    def fetch_locals(self) -> dict[int, dict[str, bytes]]:
        return {
            w: dict(self._locals[w])
            for w in range(self._workers)
            if self._locals[w] is not None
        }

    def reduce(self, global_map, contributions) -> dict[str, bytes]:
        return self._app.reduce(global_map, contributions)

    def terminate(self) -> None:
        self._dead.update(range(self._workers))


# --- process worker backend -------------------------------------------------

def _worker_main(conn, spec, workers, worker_id, incarnation, endpoint,
                 period_ms, provided_local):
    """Entry point of a forked worker process."""
    signal.signal(signal.SIGTERM, signal.SIG_DFL)
    app = make_app(spec, workers)
    local = dict(provided_local) if provided_local else app.init_local(worker_id)
    sender = None
    if endpoint is not None:
        sender = HeartbeatSender(endpoint, worker_id, incarnation, period_ms)
    try:
        while True:
            command = conn.recv()
            if command[0] == "step":
                _, superstep, global_map = command
                local, contribution = app.superstep(
                    worker_id, superstep, global_map, local
                )
                conn.send(("ok", superstep, contribution))
            elif command[0] == "fetch_local":
                conn.send(("local", dict(local)))
            else:
                break
    except (EOFError, OSError, KeyboardInterrupt):
        pass
    finally:
        if sender is not None:
            sender.close()
        try:
            conn.close()
        except OSError:
            pass


class _ProcessPool:
    """Forked worker processes, heartbeat-monitored, killable."""

    GATHER_CAP_S = 30.0

    def __init__(self, spec, config: RunConfig, incarnation, locals_by_worker,
                 receiver: HeartbeatReceiver):
        self._config = config
        self._app = make_app(spec, config.workers)
        self.incarnation = incarnation
        self._receiver = receiver
        self._procs = {}
        self._conns = {}
        self._receiver.drain()  # drop arrivals belonging to earlier incarnations
        self._monitor = HeartbeatMonitor(
            config.detector,
            nodes=range(config.workers),
            armed_at_ns=time.monotonic_ns(),
        )
        for w in range(config.workers):
            parent, child = _mp.Pipe()
            proc = _mp.Process(
                target=_worker_main,
                args=(
                    child,
                    spec,
                    config.workers,
                    w,
                    incarnation,
                    receiver.endpoint,
                    config.detector.period_ms,
                    locals_by_worker.get(w),
                ),
                daemon=True,
            )
            proc.start()
            child.close()
            self._procs[w] = proc
            self._conns[w] = parent

    def schedule_kill(self, worker: int) -> None:
        proc = self._procs.get(worker)
        if proc is not None and proc.pid is not None:
            try:
                os.kill(proc.pid, signal.SIGKILL)
            except ProcessLookupError:
                pass

    def _observe(self) -> None:
        events = self._monitor.observe(
            time.monotonic_ns(), self._receiver.drain()
        )
        if events:
            raise _WorkerLost(events[0])

    def step(self, superstep, global_map, on_poll, after_dispatch) -> list[bytes]:
        for w in sorted(self._conns):
            try:
                self._conns[w].send(("step", superstep, global_map))
            except (OSError, BrokenPipeError):
                pass  # dead pipe: the heartbeat monitor will declare it
        after_dispatch()
        replies = {}
        started = time.monotonic()
        pending = set(self._conns)
        while pending:
            on_poll()
            self._observe()
            for w in sorted(pending):
                conn = self._conns[w]
                if not conn.poll(0.005):
                    continue
                try:
                    kind, step_index, contribution = conn.recv()
                except (EOFError, OSError):
                    # Closed pipe; the heartbeat monitor is the authority
                    # on whether this is a failure, keep waiting for it.
                    pending.discard(w)
                    continue
                if kind == "ok" and step_index == superstep:
                    replies[w] = contribution
                    pending.discard(w)
            if time.monotonic() - started > self.GATHER_CAP_S:
                stuck = min(pending)
                self.schedule_kill(stuck)
                raise _WorkerLost(
                    FailureEvent(
                        node_id=stuck,
                        kind=HEARTBEAT_TIMEOUT,
                        detected_at=time.monotonic_ns(),
                    )
                )
        if len(replies) < len(self._conns):
            # A pipe died without a reply; wait for the detector verdict.
            deadline = time.monotonic() + self.GATHER_CAP_S
            while time.monotonic() < deadline:
                on_poll()
                self._observe()
                time.sleep(0.005)
            missing = sorted(set(self._conns) - set(replies))[0]
            raise _WorkerLost(
                FailureEvent(
                    node_id=missing,
                    kind=HEARTBEAT_TIMEOUT,
                    detected_at=time.monotonic_ns(),
                )
            )
        return [replies[w] for w in sorted(replies)]

    def fetch_locals(self) -> dict[int, dict[str, bytes]]:
        suspects = set()
        for w in sorted(self._conns):
            try:
                self._conns[w].send(("fetch_local",))
            except (OSError, BrokenPipeError):
                suspects.add(w)
        out = {}
        for w in sorted(self._conns):
            if w in suspects:
                continue
            try:
                _kind, local = self._conns[w].recv()
            except (EOFError, OSError):
                suspects.add(w)
                continue
            out[w] = local
        if suspects:
            self._await_verdict(min(suspects))
        return out

    def _await_verdict(self, suspect: int) -> None:
        """A pipe died; wait for the heartbeat monitor to confirm, then
        surface the loss.  Falls back to the pipe evidence on timeout."""
        deadline = time.monotonic() + self.GATHER_CAP_S
        while time.monotonic() < deadline:
            self._observe()
            time.sleep(0.005)
        raise _WorkerLost(
            FailureEvent(
                node_id=suspect,
                kind=HEARTBEAT_TIMEOUT,
                detected_at=time.monotonic_ns(),
            )
        )

    def reduce(self, global_map, contributions) -> dict[str, bytes]:
        return self._app.reduce(global_map, contributions)

    def terminate(self) -> None:
        for conn in self._conns.values():
            try:
                conn.send(("exit",))
            except (OSError, BrokenPipeError):
                pass
        deadline = time.monotonic() + 1.0
        for proc in self._procs.values():
            proc.join(timeout=max(0.0, deadline - time.monotonic()))
            if proc.is_alive():
                proc.kill()
                proc.join(timeout=2.0)
        for conn in self._conns.values():
            conn.close()
        self._procs.clear()
        self._conns.clear()


# --- coordinator ------------------------------------------------------------

class _Coordinator:
    def __init__(self, spec: AppSpec, config: RunConfig, plan: FaultPlan,
                 run_id: Optional[str], variant: str = VARIANT_INSTRUMENTED,
                 watcher: Optional[TerminationWatcher] = None):
        self.spec = spec
        self.config = config
        self.plan = plan
        self.variant = variant
        self.run_id = run_id or "%s-%s" % (
            spec.name.lower(),
            uuid.uuid4().hex[:8],
        )
        self.app = make_app(spec, config.workers)
        self.registry = StateRegistry()
        # An externally supplied watcher (the CLI's, bound to an OS
        # signal) gets wired to this run's protected-section gate.
        self.watcher = watcher or TerminationWatcher()
        self.watcher._hold_while = lambda: self.registry.in_protected_section
        self.receiver: Optional[HeartbeatReceiver] = None
        self.pool = None
        self.incarnation = 1
        self.fired = set()  # indices into plan.injections
        self.started_monotonic = time.monotonic()
        self.superstep_wall = []
        self.checkpoint_cost = []
        self.recovery_cost = []
        self.fault_count = 0
        self.last_epoch: Optional[int] = None
        self.handles = {}
        self.global_state: dict[str, bytes] = {}
        self.restored_locals: dict[int, dict[str, bytes]] = {}

    # -- plumbing

    @property
    def instrumented(self) -> bool:
        return self.variant == VARIANT_INSTRUMENTED

    def _elapsed_ms(self) -> float:
        return (time.monotonic() - self.started_monotonic) * 1000.0

    def _poll_injections(self) -> None:
        """Fire elapsed-time triggers; superstep triggers fire at dispatch."""
        for i, injection in enumerate(self.plan.injections):
            if i in self.fired or injection.at_elapsed_ms is None:
                continue
            if self._elapsed_ms() >= injection.at_elapsed_ms:
                self.fired.add(i)
                self._fire(injection)

    def _fire_superstep_injections(self, superstep: int) -> None:
        for i, injection in enumerate(self.plan.injections):
            if i in self.fired or injection.at_superstep != superstep:
                continue
            self.fired.add(i)
            self._fire(injection)

    def _fire(self, injection: Injection) -> None:
        if injection.kind == KIND_TERMINATION_NOTICE:
            self.watcher.inject()
        else:
            self.pool.schedule_kill(injection.worker)

    def _build_pool(self, locals_by_worker):
        if self.config.worker_mode == MODE_IN_PROCESS:
            return _InProcessPool(
                self.spec, self.config.workers, self.incarnation,
                locals_by_worker,
            )
        if self.receiver is None:
            self.receiver = HeartbeatReceiver(
                self.config.detector.listen_endpoint
            )
        return _ProcessPool(
            self.spec, self.config, self.incarnation, locals_by_worker,
            self.receiver,
        )

    # -- registry wiring

    def _register_state(self, global_state, locals_by_worker):
        self.registry = StateRegistry()
        self.handles = {}
        if not self.instrumented:
            return
        self.handles[META_SEGMENT] = self.registry._register_reserved(
            META_SEGMENT, GLOBAL, _meta_payload(self.spec, self.config)
        )
        for seg_id in sorted(global_state):
            self.handles[seg_id] = self.registry.register_segment(
                seg_id, GLOBAL, global_state[seg_id]
            )
        if self.config.local_checkpointing:
            for w in sorted(locals_by_worker):
                for seg_id in sorted(locals_by_worker[w]):
                    self.handles[seg_id] = self.registry.register_segment(
                        seg_id,
                        SegmentScope.local(w),
                        locals_by_worker[w][seg_id],
                    )

    def _ensure_local_handles(self, locals_by_worker) -> None:
        """Register local segments first seen after startup (fresh runs
        build their pools before any local state exists in the registry)."""
        for w in sorted(locals_by_worker):
            for seg_id in sorted(locals_by_worker[w]):
                if seg_id not in self.handles:
                    self.handles[seg_id] = self.registry.register_segment(
                        seg_id, SegmentScope.local(w), locals_by_worker[w][seg_id]
                    )
                else:
                    self.registry.update_segment(
                        self.handles[seg_id], locals_by_worker[w][seg_id]
                    )

    def _update_globals(self) -> None:
        if not self.instrumented:
            return
        for seg_id in sorted(self.global_state):
            self.registry.update_segment(
                self.handles[seg_id], self.global_state[seg_id]
            )

    def _commit(self, epoch: int) -> None:
        began = time.monotonic()
        if self.config.local_checkpointing:
            self._ensure_local_handles(self.pool.fetch_locals())
        snapshot = self.registry.snapshot()
        store.commit(self.config.checkpoint_dir, epoch, snapshot)
        self.last_epoch = epoch
        self.checkpoint_cost.append(time.monotonic() - began)

    # -- recovery

    def _rollback(self, event: FailureEvent) -> int:
        """Restore the newest checkpoint and respawn every worker.

        Returns the superstep to resume after.  Raises
        UnrecoverableFailure when nothing is restorable and cold restart
        is disabled.
        """
        began = time.monotonic()
        self.fault_count += 1
        log.info(
            "worker %d failed (%s); rolling back", event.node_id, event.kind
        )
        self.pool.terminate()
        restored = store.restore_latest(self.config.checkpoint_dir)
        if restored is None:
            if not self.config.allow_cold_restart:
                raise UnrecoverableFailure(
                    "worker %d lost with no valid checkpoint on disk"
                    % event.node_id
                )
            epoch = 0
            global_state = self.app.init_global()
            locals_by_worker = {}
        else:
            epoch, segments = restored
            global_state, locals_by_worker = _split_segments(segments)
        self.incarnation += 1
        self.global_state = global_state
        self._register_state(global_state, locals_by_worker)
        self.pool = self._build_pool(locals_by_worker)
        self._last_ckpt_ns = time.monotonic_ns()
        self.recovery_cost.append(time.monotonic() - began)
        return epoch

    # -- main loop

    def execute(self, start_after: int = 0) -> RunResult:
        config = self.config
        if self.instrumented:
            config.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        for injection in self.plan.injections:
            if (
                injection.kind == KIND_FAIL_STOP
                and injection.worker >= config.workers
            ):
                raise ConfigError(
                    "injection targets worker %d but only %d exist"
                    % (injection.worker, config.workers)
                )
        if start_after == 0:
            self.global_state = self.app.init_global()
        locals_by_worker = self.restored_locals
        self._register_state(self.global_state, locals_by_worker)
        self.pool = self._build_pool(locals_by_worker)
        self._strategy = resolve(config.strategy)
        self._last_ckpt_ns = time.monotonic_ns()

        status = STATUS_COMPLETED
        completed = start_after  # the barrier the run currently stands at
        notice_target = None  # barrier to finalize at after a termination notice
        try:
            superstep = start_after + 1
            while True:
                self._poll_injections()
                if (
                    notice_target is None
                    and self.instrumented
                    and completed < config.supersteps
                    and self.watcher.poll() is not None
                ):
                    notice_target = completed
                if notice_target is not None and completed >= notice_target:
                    # Persist the interrupted barrier state so a later
                    # resume continues instead of recomputing.
                    if self.last_epoch is None or self.last_epoch < notice_target:
                        try:
                            self._commit(notice_target)
                        except _WorkerLost as lost:
                            completed = self._rollback(lost.event)
                            superstep = completed + 1
                            continue
                    status = STATUS_RESUMABLE
                    self.fault_count += 1
                    self.watcher.acknowledge()
                    break
                if superstep > config.supersteps:
                    break
                step_began = time.monotonic()
                try:
                    contributions = self.pool.step(
                        superstep,
                        self.global_state,
                        self._poll_injections,
                        lambda s=superstep: self._fire_superstep_injections(s),
                    )
                    self.global_state = self.pool.reduce(
                        self.global_state, contributions
                    )
                except _WorkerLost as lost:
                    if not self.instrumented:
                        raise UnrecoverableFailure(
                            "baseline run lost worker %d" % lost.event.node_id
                        ) from lost
                    completed = self._rollback(lost.event)
                    superstep = completed + 1
                    continue
                self.superstep_wall.append(time.monotonic() - step_began)
                completed = superstep
                self._update_globals()
                if (
                    self.instrumented
                    and notice_target is None
                    and should_checkpoint(
                        self._strategy,
                        superstep,
                        time.monotonic_ns(),
                        self._last_ckpt_ns,
                    )
                ):
                    try:
                        self._commit(superstep)
                    except _WorkerLost as lost:
                        completed = self._rollback(lost.event)
                        superstep = completed + 1
                        continue
                    self._last_ckpt_ns = time.monotonic_ns()
                superstep += 1
        finally:
            if self.pool is not None:
                self.pool.terminate()
            if self.receiver is not None:
                self.receiver.close()
                self.receiver = None

        total = time.monotonic() - self.started_monotonic
        record = RunRecord(
            run_id=self.run_id,
            variant=self.variant,
            total_wall_s=max(total, 1e-9),
            superstep_wall_s=tuple(self.superstep_wall),
            checkpoint_cost_s=tuple(self.checkpoint_cost),
            recovery_cost_s=tuple(self.recovery_cost),
            fault_count=self.fault_count,
        )
        return RunResult(
            global_state=dict(self.global_state),
            record=record,
            status=status,
            last_epoch=self.last_epoch,
        )


def _split_segments(segments):
    """Partition restored segments into global map and per-worker maps."""
    global_state: dict[str, bytes] = {}
    locals_by_worker: dict[int, dict[str, bytes]] = {}
    for seg in segments:
        if seg.id == META_SEGMENT:
            continue
        if seg.scope.is_global:
            global_state[seg.id] = seg.payload
        else:
            locals_by_worker.setdefault(seg.scope.worker, {})[seg.id] = (
                seg.payload
            )
    return global_state, locals_by_worker


# --- public operations ------------------------------------------------------

def run(
    spec: AppSpec,
    config: RunConfig,
    plan: FaultPlan = EMPTY_PLAN,
    run_id: Optional[str] = None,
    watcher: Optional[TerminationWatcher] = None,
) -> RunResult:
    """Execute a full run under the configured checkpoint strategy."""
    return _Coordinator(spec, config, plan, run_id, watcher=watcher).execute()


def resume(
    spec: AppSpec,
    config: RunConfig,
    run_id: Optional[str] = None,
    watcher: Optional[TerminationWatcher] = None,
) -> RunResult:
    """Continue a checkpointed run up to ``config.supersteps``.

    The checkpoint's reserved meta segment must match the given app and
    worker count; a checkpoint from a different setup is refused.
    """
    restored = store.restore_latest(config.checkpoint_dir)
    if restored is None:
        raise NoCheckpoint(
            "no valid checkpoint under %s" % config.checkpoint_dir
        )
    epoch, segments = restored
    meta_blobs = [seg.payload for seg in segments if seg.id == META_SEGMENT]
    expected = _meta_payload(spec, config)
    if not meta_blobs:
        raise MetaMismatch("checkpoint has no meta segment")
    if meta_blobs[0] != expected:
        raise MetaMismatch(
            "checkpoint belongs to %s, not %s"
            % (meta_blobs[0].decode("utf-8", "replace"),
               expected.decode("utf-8"))
        )
    coordinator = _Coordinator(spec, config, EMPTY_PLAN, run_id, watcher=watcher)
    global_state, locals_by_worker = _split_segments(segments)
    coordinator.global_state = global_state
    coordinator.restored_locals = locals_by_worker
    coordinator.last_epoch = epoch
    return coordinator.execute(start_after=epoch)


def bench(
    spec: AppSpec, config: RunConfig, repetitions: int
) -> tuple[list[RunRecord], list[RunRecord]]:
    """Paired instrumented/baseline timing runs for the metrics module.

    Baseline runs have every dependability feature disabled: no registry
    traffic, no commits, no detector-driven recovery.  Each instrumented
    repetition checkpoints into its own subdirectory.
    """
    if repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    instrumented, baseline = [], []
    for rep in range(repetitions):
        rep_config = replace(
            config, checkpoint_dir=Path(config.checkpoint_dir) / ("rep-%03d" % rep)
        )
        for variant, records in (
            (VARIANT_INSTRUMENTED, instrumented),
            (VARIANT_BASELINE, baseline),
        ):
            run_id = "%s-%s-%02d" % (spec.name.lower(), variant, rep)
            coordinator = _Coordinator(
                spec, rep_config, EMPTY_PLAN, run_id, variant
            )
            records.append(coordinator.execute().record)
    return instrumented, baseline
