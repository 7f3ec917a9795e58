/**
 * Loader for the same TOML config files the core CLI consumes.
 *
 * The session only uses the checkpoint directory, the detector settings,
 * and the termination signal, but validation covers the whole schema
 * with the same rules, the same checking order, and the same error
 * message texts as the core, so a file either works in both worlds or
 * fails in both with the same explanation. The parity suite asserts
 * that against a live core process.
 *
 * Divergences that cannot be closed from here: messages that embed OS
 * error strings or the TOML parser's own syntax diagnostics.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { parse as parseToml } from "smol-toml";

import { ConfigError } from "./errors.js";
import { pyRepr } from "./registry.js";

// When the parser supports it, TOML integers arrive as bigints, which
// keeps them apart from floats the way the core's parser does and makes
// 64-bit seeds exact.
const INT_AS_BIGINT = (() => {
  try {
    const probed = parseToml("a = 1", { integersAsBigInt: true } as object) as {
      a: unknown;
    };
    return typeof probed.a === "bigint";
  } catch {
    return false;
  }
})();

const SCHEMA: Record<string, readonly string[]> = {
  app: ["name", "dimension", "population_or_grid", "seed"],
  run: [
    "workers",
    "supersteps",
    "checkpoint_dir",
    "local_checkpointing",
    "worker_mode",
    "allow_cold_restart",
  ],
  strategy: ["strategy", "mu", "downtime", "recovery", "ckpt_cost"],
  detector: ["period_ms", "misses_k", "listen_endpoint", "termination_signal"],
  bench: ["repetitions"],
  faults: ["injections"],
};

const INJECTION_KEYS = ["worker", "kind", "at_superstep", "at_elapsed_ms"];

const SIGNALS: Record<string, NodeJS.Signals> = {
  TERM: "SIGTERM",
  INT: "SIGINT",
  HUP: "SIGHUP",
  USR1: "SIGUSR1",
  USR2: "SIGUSR2",
};

const APP_NAMES = ["ParticleSwarm", "DifferentialEvolution", "JacobiSolver"];
const MASK64 = (1n << 64n) - 1n;

export interface InjectionSpec {
  readonly worker: number;
  readonly kind: string;
  readonly atSuperstep: number | null;
  readonly atElapsedMs: number | null;
}

export interface SessionConfig {
  readonly appName: string;
  readonly dimension: number;
  readonly populationOrGrid: number;
  readonly seed: bigint;
  readonly workers: number;
  readonly supersteps: number;
  readonly checkpointDir: string;
  readonly localCheckpointing: boolean;
  readonly workerMode: string;
  readonly allowColdRestart: boolean;
  readonly strategy: string;
  readonly periodMs: number;
  readonly missesK: number;
  readonly listenEndpoint: string;
  readonly terminationSignal: NodeJS.Signals;
  readonly benchRepetitions: number;
  readonly injections: readonly InjectionSpec[];
}

type TomlTable = Record<string, unknown>;

/** Parse, validate, and assemble a session config. */
export function loadSessionConfig(configPath: string): SessionConfig {
  let text: string;
  try {
    text = fs.readFileSync(configPath, "utf-8");
  } catch (exc) {
    throw new ConfigError(
      `cannot read config ${configPath}: ${exc instanceof Error ? exc.message : exc}`,
    );
  }
  let raw: TomlTable;
  try {
    raw = parseToml(
      text,
      (INT_AS_BIGINT ? { integersAsBigInt: true } : {}) as object,
    ) as TomlTable;
  } catch (exc) {
    throw new ConfigError(
      `config ${configPath} is not valid TOML: ${exc instanceof Error ? exc.message : exc}`,
    );
  }
  checkUnknownKeys(raw);
  return build(raw, path.dirname(path.resolve(configPath)));
}

// -- the core's value-type vocabulary ----------------------------------------

function typeName(value: unknown): string {
  if (typeof value === "bigint") return "int";
  if (typeof value === "boolean") return "bool";
  if (typeof value === "string") return "str";
  if (typeof value === "number") {
    if (INT_AS_BIGINT) return "float";
    return Number.isInteger(value) ? "int" : "float";
  }
  if (Array.isArray(value)) return "list";
  if (value instanceof Date) return "datetime";
  return "dict";
}

function isTable(value: unknown): value is TomlTable {
  return (
    typeof value === "object" &&
    value !== null &&
    !Array.isArray(value) &&
    !(value instanceof Date)
  );
}

function typed(value: unknown, kinds: readonly string[], where: string): unknown {
  if (typeof value === "boolean" && !kinds.includes("bool")) {
    throw new ConfigError(`${where} must not be a boolean`);
  }
  const name = typeName(value);
  if (!kinds.includes(name)) {
    throw new ConfigError(`${where} has wrong type ${name}`);
  }
  return value;
}

function asNumber(value: unknown): number {
  return typeof value === "bigint" ? Number(value) : (value as number);
}

function asBigInt(value: unknown): bigint {
  if (typeof value === "bigint") return value;
  return BigInt(value as number);
}

/** Python-style ValueError carrier for messages that get rewrapped. */
class ValueErr extends Error {}

class TypeErr extends Error {}

/** Mirror of Python's float() applied to a parsed TOML value. */
function pyFloat(value: unknown): number {
  if (typeof value === "number") return value;
  if (typeof value === "bigint") return Number(value);
  if (typeof value === "boolean") return value ? 1.0 : 0.0;
  if (typeof value === "string") return pyFloatLiteral(value);
  throw new TypeErr(
    `float() argument must be a string or a real number, not '${typeName(value)}'`,
  );
}

function pyFloatLiteral(text: string): number {
  const body = text.trim();
  const numeric =
    /^[+-]?(((\d(_?\d)*)?\.(\d(_?\d)*)|(\d(_?\d)*)\.?)(e[+-]?\d(_?\d)*)?|inf(inity)?|nan)$/i;
  if (!numeric.test(body)) {
    throw new ValueErr(`could not convert string to float: ${pyRepr(text)}`);
  }
  return Number(body.replace(/_/g, "").replace(/^([+-]?)inf(inity)?$/i, "$1Infinity"));
}

function pyIntLiteral(text: string): number {
  const body = text.trim();
  if (!/^[+-]?\d(_?\d)*$/.test(body)) {
    throw new ValueErr(`invalid literal for int() with base 10: ${pyRepr(text)}`);
  }
  return Number(body.replace(/_/g, ""));
}

// -- schema walk -------------------------------------------------------------

function checkUnknownKeys(raw: TomlTable): void {
  for (const [table, content] of Object.entries(raw)) {
    if (!(table in SCHEMA)) {
      throw new ConfigError(`unknown config table [${table}]`);
    }
    if (!isTable(content)) {
      throw new ConfigError(`[${table}] must be a table`);
    }
    for (const key of Object.keys(content)) {
      if (!SCHEMA[table].includes(key)) {
        throw new ConfigError(`unknown config key ${table}.${key}`);
      }
    }
  }
  const faults = raw["faults"];
  const injections = isTable(faults) ? (faults["injections"] ?? []) : [];
  if (!Array.isArray(injections)) {
    throw new ConfigError("faults.injections must be an array of tables");
  }
  for (let i = 0; i < injections.length; i++) {
    if (!isTable(injections[i])) {
      throw new ConfigError(`faults.injections[${i}] must be a table`);
    }
    for (const key of Object.keys(injections[i] as TomlTable)) {
      if (!INJECTION_KEYS.includes(key)) {
        throw new ConfigError(`unknown config key faults.injections[${i}].${key}`);
      }
    }
  }
}

function need(raw: TomlTable, table: string, key: string): unknown {
  const content = raw[table];
  if (isTable(content) && key in content) {
    return content[key];
  }
  throw new ConfigError(`missing required config key ${table}.${key}`);
}

function get(raw: TomlTable, table: string, key: string, fallback: unknown): unknown {
  const content = raw[table];
  if (isTable(content) && key in content) {
    return content[key];
  }
  return fallback;
}

// -- assembly, in the core's checking order ----------------------------------

interface CostModelFields {
  muS: number;
  downtimeS: number;
  recoveryS: number;
  checkpointCostS: number;
}

function buildCostModel(raw: TomlTable): CostModelFields {
  let model: CostModelFields;
  try {
    model = {
      muS: pyFloat(need(raw, "strategy", "mu")),
      downtimeS: pyFloat(get(raw, "strategy", "downtime", 0.0)),
      recoveryS: pyFloat(get(raw, "strategy", "recovery", 0.0)),
      checkpointCostS: pyFloat(need(raw, "strategy", "ckpt_cost")),
    };
  } catch (exc) {
    if (exc instanceof ValueErr || exc instanceof TypeErr) {
      throw new ConfigError(`bad cost model: ${exc.message}`);
    }
    throw exc;
  }
  try {
    checkCostModel(model);
  } catch (exc) {
    if (exc instanceof ValueErr) {
      throw new ConfigError(`bad cost model: ${exc.message}`);
    }
    throw exc;
  }
  return model;
}

function checkCostModel(model: CostModelFields): void {
  if (model.muS <= 0) {
    throw new ValueErr("mu_s must be positive");
  }
  if (model.downtimeS < 0 || model.recoveryS < 0) {
    throw new ValueErr("downtime_s and recovery_s must be non-negative");
  }
  if (model.checkpointCostS < 0) {
    throw new ValueErr("checkpoint_cost_s must be non-negative");
  }
}

function checkInjection(
  worker: number,
  kind: string,
  atSuperstep: number | null,
  atElapsedMs: number | null,
): void {
  if (kind !== "fail_stop" && kind !== "termination_notice") {
    throw new ValueErr(`unknown injection kind ${pyRepr(kind)}`);
  }
  const triggers = (atSuperstep !== null ? 1 : 0) + (atElapsedMs !== null ? 1 : 0);
  if (triggers !== 1) {
    throw new ValueErr("injection needs exactly one of at_superstep/at_elapsed_ms");
  }
  if (atSuperstep !== null && atSuperstep < 1) {
    throw new ValueErr("at_superstep starts at 1");
  }
  if (atElapsedMs !== null && atElapsedMs < 0) {
    throw new ValueErr("at_elapsed_ms must be non-negative");
  }
  if (worker < 0) {
    throw new ValueErr("worker must be non-negative");
  }
}

function validateStrategy(text: string, model: CostModelFields | null): void {
  const sep = text.indexOf(":");
  const name = (sep < 0 ? text : text.slice(0, sep)).trim();
  const arg = (sep < 0 ? "" : text.slice(sep + 1)).trim();
  const hasSep = sep >= 0;
  try {
    if (name === "every_k") {
      if (!hasSep) throw new ValueErr("every_k needs a count");
      const k = pyIntLiteral(arg);
      if (k <= 0) throw new ValueErr("k must be positive");
      return;
    }
    if (name === "interval") {
      if (!hasSep) throw new ValueErr("interval needs seconds");
      const seconds = pyFloatLiteral(arg);
      if (seconds <= 0) throw new ValueErr("seconds must be positive");
      return;
    }
    if (name === "young_daly") {
      if (hasSep) throw new ValueErr("young_daly takes no argument");
      if (model === null) {
        throw new ValueErr("young_daly needs mu, downtime, recovery and ckpt_cost");
      }
      return;
    }
    if (name === "never") {
      if (hasSep) throw new ValueErr("never takes no argument");
      return;
    }
  } catch (exc) {
    if (exc instanceof ValueErr || exc instanceof TypeErr) {
      throw new ConfigError(`bad strategy ${pyRepr(text)}: ${exc.message}`);
    }
    throw exc;
  }
  throw new ConfigError(`unknown strategy ${pyRepr(text)}`);
}

function build(raw: TomlTable, baseDir: string): SessionConfig {
  const appName = typed(need(raw, "app", "name"), ["str"], "app.name") as string;
  const dimensionRaw = typed(need(raw, "app", "dimension"), ["int"], "app.dimension");
  const pogRaw = typed(
    need(raw, "app", "population_or_grid"),
    ["int"],
    "app.population_or_grid",
  );
  const seedRaw = typed(get(raw, "app", "seed", INT_AS_BIGINT ? 0n : 0), ["int"], "app.seed");
  if (!APP_NAMES.includes(appName)) {
    throw new ConfigError(`unknown app ${pyRepr(appName)}`);
  }
  const dimension = asNumber(dimensionRaw);
  const populationOrGrid = asNumber(pogRaw);
  if (dimension <= 0 || populationOrGrid <= 0) {
    throw new ConfigError("dimension and population_or_grid must be positive");
  }
  const seed = asBigInt(seedRaw);
  if (seed < 0n || seed > MASK64) {
    throw new ConfigError("seed must fit in 64 bits");
  }

  const strategyText = typed(
    get(raw, "strategy", "strategy", "every_k:1"),
    ["str"],
    "strategy.strategy",
  ) as string;
  let model: CostModelFields | null = null;
  if (strategyText.trim() === "young_daly") {
    model = buildCostModel(raw);
  }
  validateStrategy(strategyText, model);

  const signalName = typed(
    get(raw, "detector", "termination_signal", "TERM"),
    ["str"],
    "detector.termination_signal",
  ) as string;
  if (!(signalName in SIGNALS)) {
    throw new ConfigError(
      `detector.termination_signal must be one of ${Object.keys(SIGNALS).sort().join("/")}`,
    );
  }

  const periodMs = asNumber(
    typed(get(raw, "detector", "period_ms", INT_AS_BIGINT ? 500n : 500), ["int"], "detector.period_ms"),
  );
  const missesK = asNumber(
    typed(get(raw, "detector", "misses_k", INT_AS_BIGINT ? 3n : 3), ["int"], "detector.misses_k"),
  );
  const listenEndpoint = typed(
    get(raw, "detector", "listen_endpoint", "127.0.0.1:0"),
    ["str"],
    "detector.listen_endpoint",
  ) as string;
  if (periodMs <= 0) {
    throw new ConfigError("period_ms must be positive");
  }
  if (missesK <= 0) {
    throw new ConfigError("misses_k must be positive");
  }

  let checkpointDir = typed(
    get(raw, "run", "checkpoint_dir", "checkpoints"),
    ["str"],
    "run.checkpoint_dir",
  ) as string;
  if (!path.isAbsolute(checkpointDir)) {
    checkpointDir = path.join(baseDir, checkpointDir);
  }

  const workers = asNumber(typed(need(raw, "run", "workers"), ["int"], "run.workers"));
  const supersteps = asNumber(
    typed(need(raw, "run", "supersteps"), ["int"], "run.supersteps"),
  );
  const localCheckpointing = typed(
    get(raw, "run", "local_checkpointing", true),
    ["bool"],
    "run.local_checkpointing",
  ) as boolean;
  const workerMode = typed(
    get(raw, "run", "worker_mode", "process"),
    ["str"],
    "run.worker_mode",
  ) as string;
  const allowColdRestart = typed(
    get(raw, "run", "allow_cold_restart", false),
    ["bool"],
    "run.allow_cold_restart",
  ) as boolean;
  if (workers < 1) {
    throw new ConfigError("workers must be >= 1");
  }
  if (supersteps < 1) {
    throw new ConfigError("supersteps must be >= 1");
  }
  if (workerMode !== "process" && workerMode !== "in_process") {
    throw new ConfigError(`unknown worker_mode ${pyRepr(workerMode)}`);
  }

  const injections: InjectionSpec[] = [];
  const faults = raw["faults"];
  const entries = isTable(faults) ? ((faults["injections"] ?? []) as unknown[]) : [];
  for (let i = 0; i < entries.length; i++) {
    const entry = entries[i] as TomlTable;
    const worker = asNumber(
      typed(entry["worker"] ?? (INT_AS_BIGINT ? 0n : 0), ["int"], `faults.injections[${i}].worker`),
    );
    const kind = typed(
      entry["kind"] ?? "fail_stop",
      ["str"],
      `faults.injections[${i}].kind`,
    ) as string;
    const atSuperstep =
      entry["at_superstep"] === undefined ? null : asNumber(entry["at_superstep"]);
    const atElapsedMs =
      entry["at_elapsed_ms"] === undefined ? null : asNumber(entry["at_elapsed_ms"]);
    try {
      checkInjection(worker, kind, atSuperstep, atElapsedMs);
    } catch (exc) {
      if (exc instanceof ValueErr) {
        throw new ConfigError(`faults.injections[${i}]: ${exc.message}`);
      }
      throw exc;
    }
    injections.push({ worker, kind, atSuperstep, atElapsedMs });
  }
  const seen = new Set<string>();
  for (const inj of injections) {
    const key = `${inj.worker}|${inj.kind}|${inj.atSuperstep}|${inj.atElapsedMs}`;
    if (seen.has(key)) {
      throw new ConfigError("duplicate injection in fault plan");
    }
    seen.add(key);
  }

  const benchRepetitions = asNumber(
    typed(get(raw, "bench", "repetitions", INT_AS_BIGINT ? 5n : 5), ["int"], "bench.repetitions"),
  );
  if (benchRepetitions < 1) {
    throw new ConfigError("bench.repetitions must be >= 1");
  }

  return {
    appName,
    dimension,
    populationOrGrid,
    seed,
    workers,
    supersteps,
    checkpointDir,
    localCheckpointing,
    workerMode,
    allowColdRestart,
    strategy: strategyText,
    periodMs,
    missesK,
    listenEndpoint,
    terminationSignal: SIGNALS[signalName],
    benchRepetitions,
    injections,
  };
}
