import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ConfigError } from "../src/errors.js";
import { loadSessionConfig } from "../src/config.js";

let dir: string;

beforeAll(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "config-"));
});

afterAll(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

function writeConfig(name: string, text: string): string {
  const file = path.join(dir, name);
  fs.writeFileSync(file, text);
  return file;
}

const MINIMAL = `
[app]
name = "JacobiSolver"
dimension = 64
population_or_grid = 64

[run]
workers = 2
supersteps = 10
`;

describe("valid configs", () => {
  it("fills every optional field with its documented default", () => {
    const cfg = loadSessionConfig(writeConfig("minimal.toml", MINIMAL));
    expect(cfg.appName).toBe("JacobiSolver");
    expect(cfg.dimension).toBe(64);
    expect(cfg.populationOrGrid).toBe(64);
    expect(cfg.seed).toBe(0n);
    expect(cfg.workers).toBe(2);
    expect(cfg.supersteps).toBe(10);
    expect(cfg.strategy).toBe("every_k:1");
    expect(cfg.checkpointDir).toBe(path.join(dir, "checkpoints"));
    expect(cfg.localCheckpointing).toBe(true);
    expect(cfg.workerMode).toBe("process");
    expect(cfg.allowColdRestart).toBe(false);
    expect(cfg.periodMs).toBe(500);
    expect(cfg.missesK).toBe(3);
    expect(cfg.listenEndpoint).toBe("127.0.0.1:0");
    expect(cfg.terminationSignal).toBe("SIGTERM");
    expect(cfg.benchRepetitions).toBe(5);
    expect(cfg.injections).toEqual([]);
  });

  it("reads every field of a fully specified file", () => {
    const cfg = loadSessionConfig(
      writeConfig(
        "full.toml",
        `
[app]
name = "ParticleSwarm"
dimension = 30
population_or_grid = 40
seed = 9223372036854775807

[strategy]
strategy = "young_daly"
mu = 3600
downtime = 60
recovery = 30
ckpt_cost = 10

[detector]
period_ms = 250
misses_k = 4
listen_endpoint = "127.0.0.1:9100"
termination_signal = "USR1"

[run]
workers = 4
supersteps = 200
checkpoint_dir = "/var/tmp/ckpts"
local_checkpointing = false
worker_mode = "in_process"
allow_cold_restart = true

[[faults.injections]]
worker = 1
kind = "fail_stop"
at_superstep = 5

[[faults.injections]]
worker = 0
kind = "termination_notice"
at_elapsed_ms = 1500

[bench]
repetitions = 7
`,
      ),
    );
    expect(cfg.appName).toBe("ParticleSwarm");
    expect(cfg.seed).toBe(9223372036854775807n);
    expect(cfg.strategy).toBe("young_daly");
    expect(cfg.periodMs).toBe(250);
    expect(cfg.missesK).toBe(4);
    expect(cfg.listenEndpoint).toBe("127.0.0.1:9100");
    expect(cfg.terminationSignal).toBe("SIGUSR1");
    expect(cfg.checkpointDir).toBe("/var/tmp/ckpts");
    expect(cfg.localCheckpointing).toBe(false);
    expect(cfg.workerMode).toBe("in_process");
    expect(cfg.allowColdRestart).toBe(true);
    expect(cfg.benchRepetitions).toBe(7);
    expect(cfg.injections).toEqual([
      { worker: 1, kind: "fail_stop", atSuperstep: 5, atElapsedMs: null },
      { worker: 0, kind: "termination_notice", atSuperstep: null, atElapsedMs: 1500 },
    ]);
  });
});

describe("read and parse failures", () => {
  it("wraps missing files as ConfigError", () => {
    const absent = path.join(dir, "absent.toml");
    expect(() => loadSessionConfig(absent)).toThrow(ConfigError);
    expect(() => loadSessionConfig(absent)).toThrow(
      new RegExp(`^cannot read config ${absent.replace(/[/\\]/g, "\\$&")}`),
    );
  });

  it("wraps syntax errors as ConfigError naming the file", () => {
    const bad = writeConfig("syntax.toml", "app = [unclosed");
    expect(() => loadSessionConfig(bad)).toThrow(ConfigError);
    expect(() => loadSessionConfig(bad)).toThrow(
      new RegExp(`^config ${bad.replace(/[/\\]/g, "\\$&")} is not valid TOML: `),
    );
  });
});

// Each case freezes the exact outcome, then both loaders are held to it:
// this binding char for char, and the native loader via one batch run.
interface ParityCase {
  label: string;
  toml: string;
  expect: string;
}

const mut = (patch: string) => MINIMAL + "\n" + patch + "\n";

const PARITY: ParityCase[] = [
  { label: "minimal", toml: MINIMAL, expect: "OK" },
  {
    label: "every-k-3",
    toml: mut('[strategy]\nstrategy = "every_k:3"'),
    expect: "OK",
  },
  {
    label: "interval-2.5",
    toml: mut('[strategy]\nstrategy = "interval:2.5"'),
    expect: "OK",
  },
  { label: "never", toml: mut('[strategy]\nstrategy = "never"'), expect: "OK" },
  {
    label: "underscored-int-arg",
    toml: mut('[strategy]\nstrategy = "every_k:1_0"'),
    expect: "OK",
  },
  {
    label: "unknown-table",
    toml: mut("[extra]\nx = 1"),
    expect: "ERR:unknown config table [extra]",
  },
  {
    label: "table-not-a-table",
    toml: 'app = 3\n',
    expect: "ERR:[app] must be a table",
  },
  {
    label: "unknown-app-key",
    toml: MINIMAL.replace("[app]", "[app]\ncolour = 1"),
    expect: "ERR:unknown config key app.colour",
  },
  {
    label: "injections-not-array",
    toml: mut("[faults]\ninjections = 3"),
    expect: "ERR:faults.injections must be an array of tables",
  },
  {
    label: "injection-not-table",
    toml: mut("[faults]\ninjections = [3]"),
    expect: "ERR:faults.injections[0] must be a table",
  },
  {
    label: "injection-unknown-key",
    toml: mut("[[faults.injections]]\nwhen = 3\nat_superstep = 1"),
    expect: "ERR:unknown config key faults.injections[0].when",
  },
  {
    label: "missing-app-name",
    toml: MINIMAL.replace('name = "JacobiSolver"\n', ""),
    expect: "ERR:missing required config key app.name",
  },
  {
    label: "app-name-int",
    toml: MINIMAL.replace('name = "JacobiSolver"', "name = 3"),
    expect: "ERR:app.name has wrong type int",
  },
  {
    label: "app-name-bool",
    toml: MINIMAL.replace('name = "JacobiSolver"', "name = true"),
    expect: "ERR:app.name must not be a boolean",
  },
  {
    label: "app-name-list",
    toml: MINIMAL.replace('name = "JacobiSolver"', "name = [1, 2]"),
    expect: "ERR:app.name has wrong type list",
  },
  {
    label: "app-name-inline-table",
    toml: MINIMAL.replace('name = "JacobiSolver"', "name = { x = 1 }"),
    expect: "ERR:app.name has wrong type dict",
  },
  {
    label: "app-name-datetime",
    toml: MINIMAL.replace('name = "JacobiSolver"', "name = 1979-05-27T07:32:00"),
    expect: "ERR:app.name has wrong type datetime",
  },
  {
    label: "dimension-float",
    toml: MINIMAL.replace("dimension = 64", "dimension = 64.0"),
    expect: "ERR:app.dimension has wrong type float",
  },
  {
    label: "unknown-app",
    toml: MINIMAL.replace('name = "JacobiSolver"', 'name = "mystery"'),
    expect: "ERR:unknown app 'mystery'",
  },
  {
    label: "dimension-zero",
    toml: MINIMAL.replace("dimension = 64", "dimension = 0"),
    expect: "ERR:dimension and population_or_grid must be positive",
  },
  {
    label: "negative-seed",
    toml: MINIMAL.replace("[app]", "[app]\nseed = -1"),
    expect: "ERR:seed must fit in 64 bits",
  },
  {
    label: "seed-float",
    toml: MINIMAL.replace("[app]", "[app]\nseed = 1.5"),
    expect: "ERR:app.seed has wrong type float",
  },
  {
    label: "strategy-int",
    toml: mut("[strategy]\nstrategy = 3"),
    expect: "ERR:strategy.strategy has wrong type int",
  },
  {
    label: "unknown-strategy",
    toml: mut('[strategy]\nstrategy = "bogus"'),
    expect: "ERR:unknown strategy 'bogus'",
  },
  {
    label: "every-k-no-count",
    toml: mut('[strategy]\nstrategy = "every_k"'),
    expect: "ERR:bad strategy 'every_k': every_k needs a count",
  },
  {
    label: "every-k-zero",
    toml: mut('[strategy]\nstrategy = "every_k:0"'),
    expect: "ERR:bad strategy 'every_k:0': k must be positive",
  },
  {
    label: "every-k-not-int",
    toml: mut('[strategy]\nstrategy = "every_k:x"'),
    expect: "ERR:bad strategy 'every_k:x': invalid literal for int() with base 10: 'x'",
  },
  {
    label: "every-k-float-arg",
    toml: mut('[strategy]\nstrategy = "every_k:2.5"'),
    expect:
      "ERR:bad strategy 'every_k:2.5': invalid literal for int() with base 10: '2.5'",
  },
  {
    label: "interval-no-seconds",
    toml: mut('[strategy]\nstrategy = "interval"'),
    expect: "ERR:bad strategy 'interval': interval needs seconds",
  },
  {
    label: "interval-zero",
    toml: mut('[strategy]\nstrategy = "interval:0"'),
    expect: "ERR:bad strategy 'interval:0': seconds must be positive",
  },
  {
    label: "interval-nan-text",
    toml: mut('[strategy]\nstrategy = "interval:abc"'),
    expect: "ERR:bad strategy 'interval:abc': could not convert string to float: 'abc'",
  },
  {
    // The native comparison is seconds <= 0, which NaN slips past; the
    // binding mirrors that acceptance rather than inventing a stricter rule.
    label: "interval-nan-value",
    toml: mut('[strategy]\nstrategy = "interval:nan"'),
    expect: "OK",
  },
  {
    label: "young-daly-with-arg",
    toml: mut('[strategy]\nstrategy = "young_daly:3"\nmu = 1\nckpt_cost = 1'),
    expect: "ERR:bad strategy 'young_daly:3': young_daly takes no argument",
  },
  {
    label: "never-with-arg",
    toml: mut('[strategy]\nstrategy = "never:1"'),
    expect: "ERR:bad strategy 'never:1': never takes no argument",
  },
  {
    label: "young-daly-missing-mu",
    toml: mut('[strategy]\nstrategy = "young_daly"\nckpt_cost = 1'),
    expect: "ERR:missing required config key strategy.mu",
  },
  {
    label: "young-daly-missing-ckpt-cost",
    toml: mut('[strategy]\nstrategy = "young_daly"\nmu = 3600'),
    expect: "ERR:missing required config key strategy.ckpt_cost",
  },
  {
    label: "young-daly-mu-string",
    toml: mut('[strategy]\nstrategy = "young_daly"\nmu = "x"\nckpt_cost = 1'),
    expect: "ERR:bad cost model: could not convert string to float: 'x'",
  },
  {
    label: "young-daly-mu-list",
    toml: mut('[strategy]\nstrategy = "young_daly"\nmu = [1]\nckpt_cost = 1'),
    expect:
      "ERR:bad cost model: float() argument must be a string or a real number, not 'list'",
  },
  {
    label: "young-daly-mu-zero",
    toml: mut('[strategy]\nstrategy = "young_daly"\nmu = 0\nckpt_cost = 1'),
    expect: "ERR:bad cost model: mu_s must be positive",
  },
  {
    label: "young-daly-negative-downtime",
    toml: mut(
      '[strategy]\nstrategy = "young_daly"\nmu = 10\ndowntime = -1\nckpt_cost = 1',
    ),
    expect: "ERR:bad cost model: downtime_s and recovery_s must be non-negative",
  },
  {
    label: "young-daly-negative-ckpt-cost",
    toml: mut('[strategy]\nstrategy = "young_daly"\nmu = 10\nckpt_cost = -1'),
    expect: "ERR:bad cost model: checkpoint_cost_s must be non-negative",
  },
  {
    label: "bad-signal",
    toml: mut('[detector]\ntermination_signal = "KILL"'),
    expect: "ERR:detector.termination_signal must be one of HUP/INT/TERM/USR1/USR2",
  },
  {
    label: "period-zero",
    toml: mut("[detector]\nperiod_ms = 0"),
    expect: "ERR:period_ms must be positive",
  },
  {
    label: "misses-zero",
    toml: mut("[detector]\nmisses_k = 0"),
    expect: "ERR:misses_k must be positive",
  },
  {
    label: "checkpoint-dir-int",
    toml: MINIMAL.replace("[run]", "[run]\ncheckpoint_dir = 5"),
    expect: "ERR:run.checkpoint_dir has wrong type int",
  },
  {
    label: "workers-zero",
    toml: MINIMAL.replace("workers = 2", "workers = 0"),
    expect: "ERR:workers must be >= 1",
  },
  {
    label: "workers-float",
    toml: MINIMAL.replace("workers = 2", "workers = 4.0"),
    expect: "ERR:run.workers has wrong type float",
  },
  {
    label: "workers-bool",
    toml: MINIMAL.replace("workers = 2", "workers = true"),
    expect: "ERR:run.workers must not be a boolean",
  },
  {
    label: "missing-workers",
    toml: MINIMAL.replace("workers = 2\n", ""),
    expect: "ERR:missing required config key run.workers",
  },
  {
    label: "supersteps-zero",
    toml: MINIMAL.replace("supersteps = 10", "supersteps = 0"),
    expect: "ERR:supersteps must be >= 1",
  },
  {
    label: "local-checkpointing-int",
    toml: MINIMAL.replace("[run]", "[run]\nlocal_checkpointing = 1"),
    expect: "ERR:run.local_checkpointing has wrong type int",
  },
  {
    label: "allow-cold-restart-str",
    toml: MINIMAL.replace("[run]", '[run]\nallow_cold_restart = "yes"'),
    expect: "ERR:run.allow_cold_restart has wrong type str",
  },
  {
    label: "bad-worker-mode",
    toml: MINIMAL.replace("[run]", '[run]\nworker_mode = "threads"'),
    expect: "ERR:unknown worker_mode 'threads'",
  },
  {
    label: "injection-unknown-kind",
    toml: mut('[[faults.injections]]\nkind = "surprise"\nat_superstep = 1'),
    expect: "ERR:faults.injections[0]: unknown injection kind 'surprise'",
  },
  {
    label: "injection-no-trigger",
    toml: mut("[[faults.injections]]\nworker = 0"),
    expect:
      "ERR:faults.injections[0]: injection needs exactly one of at_superstep/at_elapsed_ms",
  },
  {
    label: "injection-both-triggers",
    toml: mut("[[faults.injections]]\nat_superstep = 1\nat_elapsed_ms = 1"),
    expect:
      "ERR:faults.injections[0]: injection needs exactly one of at_superstep/at_elapsed_ms",
  },
  {
    label: "injection-superstep-zero",
    toml: mut("[[faults.injections]]\nat_superstep = 0"),
    expect: "ERR:faults.injections[0]: at_superstep starts at 1",
  },
  {
    label: "injection-negative-elapsed",
    toml: mut("[[faults.injections]]\nat_elapsed_ms = -5"),
    expect: "ERR:faults.injections[0]: at_elapsed_ms must be non-negative",
  },
  {
    label: "injection-negative-worker",
    toml: mut("[[faults.injections]]\nworker = -1\nat_superstep = 1"),
    expect: "ERR:faults.injections[0]: worker must be non-negative",
  },
  {
    label: "injection-worker-str",
    toml: mut('[[faults.injections]]\nworker = "w"\nat_superstep = 1'),
    expect: "ERR:faults.injections[0].worker has wrong type str",
  },
  {
    label: "injection-kind-int",
    toml: mut("[[faults.injections]]\nkind = 3\nat_superstep = 1"),
    expect: "ERR:faults.injections[0].kind has wrong type int",
  },
  {
    label: "second-injection-bad",
    toml: mut(
      "[[faults.injections]]\nat_superstep = 1\n\n[[faults.injections]]\nat_superstep = 0",
    ),
    expect: "ERR:faults.injections[1]: at_superstep starts at 1",
  },
  {
    label: "duplicate-injection",
    toml: mut(
      "[[faults.injections]]\nat_superstep = 3\n\n[[faults.injections]]\nat_superstep = 3",
    ),
    expect: "ERR:duplicate injection in fault plan",
  },
  {
    label: "bench-zero",
    toml: mut("[bench]\nrepetitions = 0"),
    expect: "ERR:bench.repetitions must be >= 1",
  },
  {
    label: "bench-str",
    toml: mut('[bench]\nrepetitions = "many"'),
    expect: "ERR:bench.repetitions has wrong type str",
  },
  {
    label: "app-checked-before-run",
    toml: MINIMAL.replace('name = "JacobiSolver"\n', "").replace(
      "workers = 2",
      "workers = 0",
    ),
    expect: "ERR:missing required config key app.name",
  },
  {
    label: "dimension-checked-before-strategy",
    toml: mut('[strategy]\nstrategy = "bogus"').replace(
      "dimension = 64",
      "dimension = 0",
    ),
    expect: "ERR:dimension and population_or_grid must be positive",
  },
  {
    label: "detector-checked-before-run",
    toml: mut("[detector]\nperiod_ms = 0").replace("workers = 2", "workers = 0"),
    expect: "ERR:period_ms must be positive",
  },
  {
    label: "unknown-table-checked-first",
    toml: "[extra]\nx = 1\n",
    expect: "ERR:unknown config table [extra]",
  },
  {
    label: "app-name-checked-before-dimension",
    toml: MINIMAL.replace('name = "JacobiSolver"', 'name = "mystery"').replace(
      "dimension = 64",
      "dimension = 0",
    ),
    expect: "ERR:unknown app 'mystery'",
  },
  {
    label: "fully-specified",
    toml: `
[app]
name = "ParticleSwarm"
dimension = 30
population_or_grid = 40
seed = 9223372036854775807

[strategy]
strategy = "young_daly"
mu = 3600
downtime = 60
recovery = 30
ckpt_cost = 10

[detector]
period_ms = 250
misses_k = 4
listen_endpoint = "127.0.0.1:9100"
termination_signal = "USR1"

[run]
workers = 4
supersteps = 200
checkpoint_dir = "/var/tmp/ckpts"
local_checkpointing = false
worker_mode = "in_process"
allow_cold_restart = true

[[faults.injections]]
worker = 1
kind = "fail_stop"
at_superstep = 5

[bench]
repetitions = 7
`,
    expect: "OK",
  },
];

describe("native loader parity", () => {
  it("produces char-identical outcomes on both sides for every case", () => {
    const files = PARITY.map((c, i) =>
      writeConfig(`case-${String(i).padStart(2, "0")}.toml`, c.toml),
    );

    const mine = files.map((file) => {
      try {
        loadSessionConfig(file);
        return "OK";
      } catch (exc) {
        if (exc instanceof ConfigError) return `ERR:${exc.message}`;
        throw exc;
      }
    });

    const script = [
      "import sys",
      "from faultstep.config import load_setup",
      "from faultstep.errors import ConfigError",
      "for p in sys.argv[1:]:",
      "    try:",
      "        load_setup(p)",
      "        print('OK')",
      "    except ConfigError as exc:",
      "        print('ERR:%s' % exc)",
    ].join("\n");
    const native = execFileSync("python3", ["-c", script, ...files], {
      encoding: "utf-8",
    })
      .trimEnd()
      .split("\n");

    expect(native.length).toBe(PARITY.length);
    for (let i = 0; i < PARITY.length; i++) {
      expect(`${PARITY[i].label}: ${mine[i]}`).toBe(
        `${PARITY[i].label}: ${PARITY[i].expect}`,
      );
      expect(`${PARITY[i].label}: ${native[i]}`).toBe(
        `${PARITY[i].label}: ${PARITY[i].expect}`,
      );
    }
  });
});
