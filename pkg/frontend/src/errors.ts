/**
 * Exception hierarchy mirroring the core library error names.
 *
 * The core's contract is that foreign-language wrappers surface its
 * errors by name, so every class here uses the exact core class name
 * as its `name` property and carries the core's message text.
 */

export class FaultstepError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

// -- state registry ----------------------------------------------------------

export class DuplicateId extends FaultstepError {}

export class IdTooLong extends FaultstepError {}

export class InvalidSegmentId extends FaultstepError {}

export class PayloadTooLarge extends FaultstepError {}

export class StaleHandle extends FaultstepError {}

export class ProtectedSectionOpen extends FaultstepError {}

export class UnbalancedExit extends FaultstepError {}

// -- checkpoint store --------------------------------------------------------

export class NonMonotonicEpoch extends FaultstepError {}

export class InvalidSnapshot extends FaultstepError {}

export class IoFailure extends FaultstepError {}

// -- failure detector --------------------------------------------------------

export class DecodeError extends FaultstepError {}

export class BadMagic extends DecodeError {}

export class BadLength extends DecodeError {}

export class UnsupportedVersion extends DecodeError {}

export class BadFlags extends DecodeError {}

// -- configuration and session lifecycle -------------------------------------

export class ConfigError extends FaultstepError {}

/** A session is already open in this process; the binding allows one. */
export class AlreadyOpen extends FaultstepError {}

/** An operation that needs a live session got a closed one. */
export class SessionClosed extends FaultstepError {}
