"""One TOML file drives everything: app, run, strategy, detector, faults.

Command-line overrides are dotted ``table.key=value`` pairs applied after
the file parses; any key the schema does not know, in the file or in an
override, is an error rather than a silent ignore.

Example::

    [app]
    name = "JacobiSolver"
    dimension = 16
    population_or_grid = 50
    seed = 42

    [run]
    workers = 4
    supersteps = 20
    checkpoint_dir = "checkpoints"
    local_checkpointing = true
    worker_mode = "process"            # or "in_process"
    allow_cold_restart = false

    [strategy]
    strategy = "every_k:1"             # every_k:<n> | interval:<s> | young_daly | never
    mu = 86400.0                       # young_daly cost model, seconds
    downtime = 30.0
    recovery = 30.0
    ckpt_cost = 30.0

    [detector]
    period_ms = 500
    misses_k = 3
    listen_endpoint = "127.0.0.1:0"
    termination_signal = "TERM"

    [bench]
    repetitions = 10

    [faults]
    injections = [
      { worker = 2, at_superstep = 5, kind = "fail_stop" },
    ]

Relative ``checkpoint_dir`` paths resolve against the config file's
directory, so invocations are reproducible from anywhere.
"""

from __future__ import annotations

import signal as _signal
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .apps import AppSpec
from .detector import DetectorConfig
from .errors import ConfigError
from .harness import FaultPlan, Injection, RunConfig
from .policy import CostModel, parse_strategy

_SCHEMA = {
    "app": {"name", "dimension", "population_or_grid", "seed"},
    "run": {
        "workers",
        "supersteps",
        "checkpoint_dir",
        "local_checkpointing",
        "worker_mode",
        "allow_cold_restart",
    },
    "strategy": {"strategy", "mu", "downtime", "recovery", "ckpt_cost"},
    "detector": {"period_ms", "misses_k", "listen_endpoint", "termination_signal"},
    "bench": {"repetitions"},
    "faults": {"injections"},
}

_INJECTION_KEYS = {"worker", "kind", "at_superstep", "at_elapsed_ms"}

_SIGNALS = {
    "TERM": _signal.SIGTERM,
    "INT": _signal.SIGINT,
    "HUP": _signal.SIGHUP,
    "USR1": _signal.SIGUSR1,
    "USR2": _signal.SIGUSR2,
}


@dataclass(frozen=True)
class RunSetup:
    """Everything a CLI command needs, assembled from one config file."""

    app: AppSpec
    run: RunConfig
    plan: FaultPlan
    bench_repetitions: int


def load_setup(config_path, overrides: Optional[list[str]] = None) -> RunSetup:
    """Parse, override, validate, and assemble a run setup."""
    config_path = Path(config_path)
    try:
        with open(config_path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (config_path, exc)) from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config %s is not valid TOML: %s" % (config_path, exc)) from exc
    for item in overrides or []:
        _apply_override(raw, item)
    _check_unknown_keys(raw)
    return _build(raw, config_path.resolve().parent)


def _apply_override(raw: dict, item: str) -> None:
    key, sep, value = item.partition("=")
    if not sep:
        raise ConfigError("override %r is not key=value" % item)
    path = key.strip().split(".")
    if len(path) != 2 or not all(path):
        raise ConfigError(
            "override key %r must be table.key (e.g. app.seed)" % key.strip()
        )
    table, leaf = path
    raw.setdefault(table, {})
    if not isinstance(raw[table], dict):
        raise ConfigError("override %r does not address a table" % key.strip())
    raw[table][leaf] = _parse_scalar(value.strip())


def _parse_scalar(text: str):
    # Reuse TOML literal syntax; bare words fall back to plain strings.
    try:
        return tomllib.loads("v = %s" % text)["v"]
    except tomllib.TOMLDecodeError:
        return text


def _check_unknown_keys(raw: dict) -> None:
    for table, content in raw.items():
        if table not in _SCHEMA:
            raise ConfigError("unknown config table [%s]" % table)
        if not isinstance(content, dict):
            raise ConfigError("[%s] must be a table" % table)
        for key in content:
            if key not in _SCHEMA[table]:
                raise ConfigError("unknown config key %s.%s" % (table, key))
    injections = raw.get("faults", {}).get("injections", [])
    if not isinstance(injections, list):
        raise ConfigError("faults.injections must be an array of tables")
    for i, entry in enumerate(injections):
        if not isinstance(entry, dict):
            raise ConfigError("faults.injections[%d] must be a table" % i)
        for key in entry:
            if key not in _INJECTION_KEYS:
                raise ConfigError(
                    "unknown config key faults.injections[%d].%s" % (i, key)
                )


def _need(raw: dict, table: str, key: str):
    try:
        return raw[table][key]
    except KeyError:
        raise ConfigError("missing required config key %s.%s" % (table, key))


def _get(raw: dict, table: str, key: str, default):
    return raw.get(table, {}).get(key, default)


def _typed(value, types, where: str):
    if isinstance(value, bool) and bool not in (
        types if isinstance(types, tuple) else (types,)
    ):
        raise ConfigError("%s must not be a boolean" % where)
    if not isinstance(value, types):
        raise ConfigError(
            "%s has wrong type %s" % (where, type(value).__name__)
        )
    return value


def _build(raw: dict, base_dir: Path) -> RunSetup:
    try:
        app = AppSpec(
            name=_typed(_need(raw, "app", "name"), str, "app.name"),
            dimension=_typed(_need(raw, "app", "dimension"), int, "app.dimension"),
            population_or_grid=_typed(
                _need(raw, "app", "population_or_grid"), int,
                "app.population_or_grid",
            ),
            seed=_typed(_get(raw, "app", "seed", 0), int, "app.seed"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    model = None
    strategy_text = _typed(
        _get(raw, "strategy", "strategy", "every_k:1"), str, "strategy.strategy"
    )
    if strategy_text.strip() == "young_daly":
        try:
            model = CostModel(
                mu_s=float(_need(raw, "strategy", "mu")),
                downtime_s=float(_get(raw, "strategy", "downtime", 0.0)),
                recovery_s=float(_get(raw, "strategy", "recovery", 0.0)),
                checkpoint_cost_s=float(_need(raw, "strategy", "ckpt_cost")),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("bad cost model: %s" % exc) from exc
    strategy = parse_strategy(strategy_text, model)

    signal_name = _typed(
        _get(raw, "detector", "termination_signal", "TERM"), str,
        "detector.termination_signal",
    )
    if signal_name not in _SIGNALS:
        raise ConfigError(
            "detector.termination_signal must be one of %s"
            % "/".join(sorted(_SIGNALS))
        )
    try:
        detector = DetectorConfig(
            period_ms=_typed(
                _get(raw, "detector", "period_ms", 500), int, "detector.period_ms"
            ),
            misses_k=_typed(
                _get(raw, "detector", "misses_k", 3), int, "detector.misses_k"
            ),
            listen_endpoint=_typed(
                _get(raw, "detector", "listen_endpoint", "127.0.0.1:0"), str,
                "detector.listen_endpoint",
            ),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    checkpoint_dir = Path(
        _typed(
            _get(raw, "run", "checkpoint_dir", "checkpoints"), str,
            "run.checkpoint_dir",
        )
    )
    if not checkpoint_dir.is_absolute():
        checkpoint_dir = base_dir / checkpoint_dir

    run_config = RunConfig(
        workers=_typed(_need(raw, "run", "workers"), int, "run.workers"),
        supersteps=_typed(_need(raw, "run", "supersteps"), int, "run.supersteps"),
        strategy=strategy,
        checkpoint_dir=checkpoint_dir,
        detector=detector,
        local_checkpointing=_typed(
            _get(raw, "run", "local_checkpointing", True), bool,
            "run.local_checkpointing",
        ),
        worker_mode=_typed(
            _get(raw, "run", "worker_mode", "process"), str, "run.worker_mode"
        ),
        allow_cold_restart=_typed(
            _get(raw, "run", "allow_cold_restart", False), bool,
            "run.allow_cold_restart",
        ),
        termination_signal=_SIGNALS[signal_name],
    )

    injections = []
    for i, entry in enumerate(raw.get("faults", {}).get("injections", [])):
        try:
            injections.append(
                Injection(
                    worker=_typed(
                        entry.get("worker", 0), int,
                        "faults.injections[%d].worker" % i,
                    ),
                    kind=_typed(
                        entry.get("kind", "fail_stop"), str,
                        "faults.injections[%d].kind" % i,
                    ),
                    at_superstep=entry.get("at_superstep"),
                    at_elapsed_ms=entry.get("at_elapsed_ms"),
                )
            )
        except ValueError as exc:
            raise ConfigError(
                "faults.injections[%d]: %s" % (i, exc)
            ) from exc
    try:
        plan = FaultPlan(injections=tuple(injections))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    repetitions = _typed(
        _get(raw, "bench", "repetitions", 5), int, "bench.repetitions"
    )
    if repetitions < 1:
        raise ConfigError("bench.repetitions must be >= 1")

    return RunSetup(
        app=app, run=run_config, plan=plan, bench_repetitions=repetitions
    )
