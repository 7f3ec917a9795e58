"""Checkpoint scheduling: when is a snapshot worth its cost.

Strategies are small immutable values interrogated at each superstep
barrier.  The optimal-interval computation follows the classic
square-root tradeoff between work lost to a failure and time spent
checkpointing: T = sqrt(2 * (mu - (D + R)) * C), with mu the mean time
between failures, D the downtime, R the recovery time, and C the cost of
writing one checkpoint, all in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from .errors import ConfigError, MtbfTooSmall


@dataclass(frozen=True)
class CostModel:
    """Failure and checkpoint costs, in seconds."""

    mu_s: float
    downtime_s: float
    recovery_s: float
    checkpoint_cost_s: float

    def __post_init__(self):
        if self.mu_s <= 0:
            raise ValueError("mu_s must be positive")
        if self.downtime_s < 0 or self.recovery_s < 0:
            raise ValueError("downtime_s and recovery_s must be non-negative")
        if self.checkpoint_cost_s < 0:
            raise ValueError("checkpoint_cost_s must be non-negative")


def young_daly_interval(model: CostModel) -> float:
    """Optimal seconds between checkpoints for the given cost model.

    The mean time between failures must cover downtime plus recovery;
    at exact equality the formula's continuous limit, 0, is returned.
    """
    slack = model.mu_s - (model.downtime_s + model.recovery_s)
    if slack < 0:
        raise MtbfTooSmall(
            "mu_s (%g) is below downtime_s + recovery_s (%g)"
            % (model.mu_s, model.downtime_s + model.recovery_s)
        )
    return math.sqrt(2.0 * slack * model.checkpoint_cost_s)


@dataclass(frozen=True)
class EveryKSupersteps:
    k: int

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("k must be positive")


@dataclass(frozen=True)
class TimeInterval:
    seconds: float

    def __post_init__(self):
        if self.seconds <= 0:
            raise ValueError("seconds must be positive")


@dataclass(frozen=True)
class YoungDaly:
    model: CostModel


@dataclass(frozen=True)
class Never:
    pass


CheckpointStrategy = Union[EveryKSupersteps, TimeInterval, YoungDaly, Never]


def resolve(strategy: CheckpointStrategy) -> CheckpointStrategy:
    """Fix a YoungDaly strategy into its concrete time interval."""
    if isinstance(strategy, YoungDaly):
        return TimeInterval(seconds=young_daly_interval(strategy.model))
    return strategy


def should_checkpoint(
    strategy: CheckpointStrategy,
    superstep: int,
    now_ns: int,
    last_checkpoint_ns: int,
) -> bool:
    """Decide, at the barrier after ``superstep``, whether to snapshot now.

    Pure in all arguments.  Superstep counting starts at 1; superstep 0
    (nothing computed yet) never checkpoints under EveryKSupersteps.
    """
    if superstep < 0:
        raise ValueError("superstep must be non-negative")
    if now_ns < last_checkpoint_ns:
        raise ValueError("now precedes last_checkpoint")
    strategy = resolve(strategy)
    if isinstance(strategy, EveryKSupersteps):
        return superstep > 0 and superstep % strategy.k == 0
    if isinstance(strategy, TimeInterval):
        return (now_ns - last_checkpoint_ns) / 1e9 >= strategy.seconds
    if isinstance(strategy, Never):
        return False
    raise TypeError("unknown strategy %r" % (strategy,))


def parse_strategy(
    text: str, model: Optional[CostModel] = None
) -> CheckpointStrategy:
    """Parse the config-file strategy string.

    Accepted forms: ``every_k:<n>``, ``interval:<seconds>``,
    ``young_daly`` (requires cost-model fields), ``never``.
    """
    name, sep, arg = text.partition(":")
    name = name.strip()
    arg = arg.strip()
    try:
        if name == "every_k":
            if not sep:
                raise ValueError("every_k needs a count")
            return EveryKSupersteps(k=int(arg))
        if name == "interval":
            if not sep:
                raise ValueError("interval needs seconds")
            return TimeInterval(seconds=float(arg))
        if name == "young_daly":
            if sep:
                raise ValueError("young_daly takes no argument")
            if model is None:
                raise ValueError(
                    "young_daly needs mu, downtime, recovery and ckpt_cost"
                )
            return YoungDaly(model=model)
        if name == "never":
            if sep:
                raise ValueError("never takes no argument")
            return Never()
    except (ValueError, TypeError) as exc:
        raise ConfigError("bad strategy %r: %s" % (text, exc)) from exc
    raise ConfigError("unknown strategy %r" % text)
