/**
 * In-process registry of checkpointable state segments.
 *
 * Mirrors the core registry semantics: named byte segments scoped to the
 * whole application or to one worker, a version counter per segment, a
 * generation counter invalidating handles on reset, and protected
 * sections that make snapshots fail rather than observe a half-written
 * state. The binding is synchronous, so "defer until the section closes"
 * cannot exist here; a snapshot during an open section is always an
 * error.
 *
 * Error message texts match the core byte for byte; the parity suite
 * compares them against a live core process.
 */

import {
  DuplicateId,
  IdTooLong,
  InvalidSegmentId,
  PayloadTooLarge,
  ProtectedSectionOpen,
  StaleHandle,
  UnbalancedExit,
} from "./errors.js";

export const MAX_ID_BYTES = 255;
export const MAX_SEGMENT_BYTES = 2 ** 31 - 1;
export const RESERVED_PREFIX = "__";

/** Python-repr rendering of a string, for core-identical error texts. */
export function pyRepr(text: string): string {
  const single = text.includes("'");
  const double = text.includes('"');
  const quote = single && !double ? '"' : "'";
  let body = "";
  for (const ch of text) {
    if (ch === "\\") body += "\\\\";
    else if (ch === quote) body += "\\" + quote;
    else if (ch === "\n") body += "\\n";
    else if (ch === "\r") body += "\\r";
    else if (ch === "\t") body += "\\t";
    else body += ch;
  }
  return quote + body + quote;
}

export class SegmentScope {
  readonly worker: number | null;

  private constructor(worker: number | null) {
    if (worker !== null && (!Number.isInteger(worker) || worker < 0)) {
      throw new RangeError("worker id must be non-negative");
    }
    this.worker = worker;
  }

  private static readonly globalInstance = new SegmentScope(null);

  static globalScope(): SegmentScope {
    return SegmentScope.globalInstance;
  }

  static local(worker: number): SegmentScope {
    return new SegmentScope(worker);
  }

  get isGlobal(): boolean {
    return this.worker === null;
  }

  equals(other: SegmentScope): boolean {
    return this.worker === other.worker;
  }

  toString(): string {
    return this.isGlobal ? "global" : `local(${this.worker})`;
  }
}

export const GLOBAL: SegmentScope = SegmentScope.globalScope();

export interface SegmentSnapshot {
  readonly id: string;
  readonly scope: SegmentScope;
  readonly version: number;
  readonly payload: Uint8Array;
}

export interface SegmentHandle {
  readonly id: string;
  readonly generation: number;
}

interface Segment {
  scope: SegmentScope;
  payload: Uint8Array;
  version: number;
}

function checkId(segmentId: string, allowReserved: boolean): void {
  if (typeof segmentId !== "string" || segmentId.length === 0) {
    throw new InvalidSegmentId("segment id must be a nonempty string");
  }
  if (segmentId.includes("\x00")) {
    throw new InvalidSegmentId("segment id must not contain NUL");
  }
  if (!allowReserved && segmentId.startsWith(RESERVED_PREFIX)) {
    throw new InvalidSegmentId(
      `segment ids starting with ${pyRepr(RESERVED_PREFIX)} are reserved`,
    );
  }
  const encoded = Buffer.byteLength(segmentId, "utf-8");
  if (encoded > MAX_ID_BYTES) {
    throw new IdTooLong(
      `segment id is ${encoded} bytes, limit is ${MAX_ID_BYTES}`,
    );
  }
}

function checkPayload(payload: Uint8Array): Uint8Array {
  if (payload.byteLength > MAX_SEGMENT_BYTES) {
    throw new PayloadTooLarge(
      `segment payload is ${payload.byteLength} bytes, limit is ${MAX_SEGMENT_BYTES}`,
    );
  }
  return Uint8Array.prototype.slice.call(payload);
}

export class StateRegistry {
  private segments = new Map<string, Segment>();
  private generation = 0;
  private depth = 0;

  /** Declare a new segment; it appears in snapshots at version 0. */
  registerSegment(
    segmentId: string,
    scope: SegmentScope,
    initialPayload: Uint8Array,
  ): SegmentHandle {
    return this.registerInternal(segmentId, scope, initialPayload, false);
  }

  /** Core-internal entry point for "__"-prefixed segments. */
  registerReserved(
    segmentId: string,
    scope: SegmentScope,
    initialPayload: Uint8Array,
  ): SegmentHandle {
    return this.registerInternal(segmentId, scope, initialPayload, true);
  }

  private registerInternal(
    segmentId: string,
    scope: SegmentScope,
    initialPayload: Uint8Array,
    allowReserved: boolean,
  ): SegmentHandle {
    checkId(segmentId, allowReserved);
    if (!(scope instanceof SegmentScope)) {
      throw new TypeError("scope must be a SegmentScope");
    }
    const payload = checkPayload(initialPayload);
    if (this.segments.has(segmentId)) {
      throw new DuplicateId(
        `segment id ${pyRepr(segmentId)} is already registered`,
      );
    }
    this.segments.set(segmentId, { scope, payload, version: 0 });
    return { id: segmentId, generation: this.generation };
  }

  /** Replace a segment's payload; returns the new version number. */
  updateSegment(handle: SegmentHandle, payload: Uint8Array): number {
    const copy = checkPayload(payload);
    if (handle.generation !== this.generation) {
      throw new StaleHandle(
        `handle for ${pyRepr(handle.id)} predates a registry reset`,
      );
    }
    const segment = this.segments.get(handle.id);
    if (segment === undefined) {
      throw new StaleHandle(
        `segment ${pyRepr(handle.id)} is no longer registered`,
      );
    }
    segment.payload = copy;
    segment.version += 1;
    return segment.version;
  }

  /** Drop all segments and invalidate every outstanding handle. */
  reset(): void {
    this.segments.clear();
    this.generation += 1;
    this.depth = 0;
  }

  /**
   * Capture matching segments, sorted ascending by id bytes.
   *
   * `scope` undefined captures everything; a SegmentScope keeps only
   * exact matches. Payloads are copies owned by the caller.
   */
  snapshot(scope?: SegmentScope): SegmentSnapshot[] {
    if (this.depth > 0) {
      throw new ProtectedSectionOpen(
        `snapshot blocked: protected section depth is ${this.depth}`,
      );
    }
    const items: SegmentSnapshot[] = [];
    for (const [sid, seg] of this.segments) {
      if (scope === undefined || seg.scope.equals(scope)) {
        items.push({
          id: sid,
          scope: seg.scope,
          version: seg.version,
          payload: Uint8Array.prototype.slice.call(seg.payload),
        });
      }
    }
    items.sort((a, b) =>
      Buffer.compare(Buffer.from(a.id, "utf-8"), Buffer.from(b.id, "utf-8")),
    );
    return items;
  }

  /** Open (or nest) a protected section; returns the new depth. */
  enterProtected(): number {
    this.depth += 1;
    return this.depth;
  }

  /** Close one nesting level; returns the remaining depth. */
  exitProtected(): number {
    if (this.depth === 0) {
      throw new UnbalancedExit("exit_protected without matching enter");
    }
    this.depth -= 1;
    return this.depth;
  }

  get protectedDepth(): number {
    return this.depth;
  }

  get inProtectedSection(): boolean {
    return this.depth > 0;
  }

  get size(): number {
    return this.segments.size;
  }

  has(segmentId: string): boolean {
    return this.segments.has(segmentId);
  }
}
