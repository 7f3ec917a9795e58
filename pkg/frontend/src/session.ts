/**
 * The single process-wide session tying a state registry, the checkpoint
 * store, and termination watching to one config file.
 *
 * The surface is flat on purpose: one opaque session handle plus plain
 * functions, so the same shape ports to hosts that cannot express class
 * hierarchies. Exactly one session may be live per process, mirroring
 * the single-writer discipline of a checkpoint directory; a second open
 * is an error, not a queue.
 *
 * Payloads cross this boundary as byte buffers the caller owns;
 * mutation happens only through `update`, so version counters keep
 * their meaning.
 */

import * as fs from "node:fs";

import { loadSessionConfig, SessionConfig } from "./config.js";
import { AlreadyOpen, SessionClosed, FaultstepError } from "./errors.js";
import { HeartbeatSender } from "./heartbeat.js";
import {
  SegmentHandle,
  SegmentScope,
  SegmentSnapshot,
  StateRegistry,
} from "./registry.js";
import { commit, restoreLatest as storeRestoreLatest, StoredSegment } from "./store.js";

export const SOURCE_OS_SIGNAL = "os_signal";
export const SOURCE_INJECTED = "injected";

export interface TerminationNotice {
  readonly source: string;
  readonly deadlineHintMs: number | null;
}

export class Session {
  readonly config: SessionConfig;
  readonly registry = new StateRegistry();
  closed = false;
  notice: TerminationNotice | null = null;
  sender: HeartbeatSender | null = null;
  readonly onSignal: () => void;

  constructor(config: SessionConfig) {
    this.config = config;
    this.onSignal = () => {
      if (this.notice === null) {
        this.notice = { source: SOURCE_OS_SIGNAL, deadlineHintMs: null };
      }
    };
  }
}

let liveSession: Session | null = null;

/**
 * Open the process's session from a config file.
 *
 * Creates the checkpoint directory if needed and routes the configured
 * termination signal into the session until close. A second open while
 * one session is live fails; close it first.
 */
export function openSession(configPath: string): Session {
  if (liveSession !== null) {
    throw new AlreadyOpen("a session is already open in this process");
  }
  const config = loadSessionConfig(configPath);
  fs.mkdirSync(config.checkpointDir, { recursive: true });
  const session = new Session(config);
  process.on(config.terminationSignal, session.onSignal);
  liveSession = session;
  return session;
}

/** Close the session, releasing the signal binding and heartbeat sender. */
export function closeSession(session: Session): void {
  if (session.closed) return;
  session.closed = true;
  process.removeListener(session.config.terminationSignal, session.onSignal);
  if (session.sender !== null) {
    session.sender.close();
    session.sender = null;
  }
  if (liveSession === session) {
    liveSession = null;
  }
}

function live(session: Session): Session {
  if (session.closed) {
    throw new SessionClosed("session is closed");
  }
  return session;
}

// -- registry delegation -----------------------------------------------------

export function register(
  session: Session,
  segmentId: string,
  scope: SegmentScope,
  payload: Uint8Array,
): SegmentHandle {
  return live(session).registry.registerSegment(segmentId, scope, payload);
}

export function update(
  session: Session,
  handle: SegmentHandle,
  payload: Uint8Array,
): number {
  return live(session).registry.updateSegment(handle, payload);
}

export function enterProtected(session: Session): number {
  return live(session).registry.enterProtected();
}

export function exitProtected(session: Session): number {
  return live(session).registry.exitProtected();
}

// -- checkpointing -----------------------------------------------------------

export interface CheckpointOptions {
  /** Defaults to one past the highest epoch already in the directory. */
  epoch?: number;
  /** Pin to make the output bytes reproducible. */
  createdAtUs?: number;
  durable?: boolean;
}

export interface CommitReceipt {
  readonly epoch: number;
  readonly path: string;
  readonly segments: readonly SegmentSnapshot[];
}

/** Snapshot the whole registry and commit it as one checkpoint file. */
export function checkpointNow(
  session: Session,
  options: CheckpointOptions = {},
): CommitReceipt {
  const s = live(session);
  const snapshot = s.registry.snapshot();
  const epoch = options.epoch ?? nextEpoch(s);
  const path = commit(
    s.config.checkpointDir,
    epoch,
    snapshot,
    options.createdAtUs,
    options.durable ?? true,
  );
  return { epoch, path, segments: snapshot };
}

function nextEpoch(session: Session): number {
  // Epoch numbering follows file names, valid or not, because commit
  // refuses anything at or below the highest existing name.
  const epochs = committedEpochsOf(session);
  return epochs.length === 0 ? 1 : epochs[epochs.length - 1] + 1;
}

function committedEpochsOf(session: Session): number[] {
  const names = fs.readdirSync(session.config.checkpointDir);
  const epochs: number[] = [];
  for (const name of names) {
    const match = /^ckpt-(\d{10})\.dck$/.exec(name);
    if (match) epochs.push(Number(match[1]));
  }
  epochs.sort((a, b) => a - b);
  return epochs;
}

/** Highest-epoch valid checkpoint in the session's directory, or null. */
export function restoreLatest(
  session: Session,
): { epoch: number; segments: StoredSegment[] } | null {
  return storeRestoreLatest(live(session).config.checkpointDir);
}

// -- termination polling -----------------------------------------------------

/**
 * Report a latched termination notice, or null.
 *
 * Delivery is deferred while a protected section is open; the notice
 * stays latched and reappears on the first poll after the section
 * closes, until acknowledged.
 */
export function pollTermination(session: Session): TerminationNotice | null {
  const s = live(session);
  if (s.registry.inProtectedSection) {
    return null;
  }
  return s.notice;
}

/** Latch a termination notice without an OS signal. */
export function injectTermination(
  session: Session,
  deadlineHintMs: number | null = null,
): void {
  const s = live(session);
  if (s.notice === null) {
    s.notice = { source: SOURCE_INJECTED, deadlineHintMs };
  }
}

export function acknowledgeTermination(session: Session): void {
  live(session).notice = null;
}

// -- heartbeat control -------------------------------------------------------

/** Start sending heartbeats to the configured detector endpoint. */
export function startHeartbeat(
  session: Session,
  nodeId: number,
  incarnation: number,
): void {
  const s = live(session);
  if (s.sender !== null) {
    throw new FaultstepError("a heartbeat sender is already running in this session");
  }
  s.sender = new HeartbeatSender(
    s.config.listenEndpoint,
    nodeId,
    incarnation,
    s.config.periodMs,
  );
}

export function stopHeartbeat(session: Session): void {
  const s = live(session);
  if (s.sender !== null) {
    s.sender.close();
    s.sender = null;
  }
}
