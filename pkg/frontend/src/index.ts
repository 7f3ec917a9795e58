/**
 * TypeScript session interface over the checkpoint core: register the
 * byte segments that make up resumable state, commit them as crash-safe
 * checkpoint files byte-compatible with the core's, read them back,
 * send heartbeats, and poll for termination notices, all configured by
 * the same TOML files the core CLI reads.
 */

export {
  AlreadyOpen,
  BadFlags,
  BadLength,
  BadMagic,
  ConfigError,
  DecodeError,
  DuplicateId,
  FaultstepError,
  IdTooLong,
  InvalidSegmentId,
  InvalidSnapshot,
  IoFailure,
  NonMonotonicEpoch,
  PayloadTooLarge,
  ProtectedSectionOpen,
  SessionClosed,
  StaleHandle,
  UnbalancedExit,
  UnsupportedVersion,
} from "./errors.js";
export {
  GLOBAL,
  MAX_ID_BYTES,
  MAX_SEGMENT_BYTES,
  SegmentHandle,
  SegmentScope,
  SegmentSnapshot,
  StateRegistry,
} from "./registry.js";
export {
  CheckpointManifest,
  FileReport,
  SegmentEntry,
  StoredSegment,
  analyze,
  checkpointFilename,
  commit,
  committedEpochs,
  crc32,
  decodeCheckpoint,
  encodeCheckpoint,
  isValid,
  readCheckpoint,
  FILE_SUFFIX,
  FORMAT_VERSION,
  MAGIC,
  TMP_SUFFIX,
  VERDICT_VALID,
} from "./store.js";
export {
  HEARTBEAT_MAGIC,
  HEARTBEAT_SIZE,
  HEARTBEAT_VERSION,
  HeartbeatMessage,
  HeartbeatSender,
  decodeHeartbeat,
  encodeHeartbeat,
  parseEndpoint,
} from "./heartbeat.js";
export { InjectionSpec, SessionConfig, loadSessionConfig } from "./config.js";
export {
  CheckpointOptions,
  CommitReceipt,
  Session,
  SOURCE_INJECTED,
  SOURCE_OS_SIGNAL,
  TerminationNotice,
  acknowledgeTermination,
  checkpointNow,
  closeSession,
  enterProtected,
  exitProtected,
  injectTermination,
  openSession,
  pollTermination,
  register,
  restoreLatest,
  startHeartbeat,
  stopHeartbeat,
  update,
} from "./session.js";
