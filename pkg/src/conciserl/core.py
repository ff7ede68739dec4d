"""Shared domain types and the run configuration.

All types here are immutable value objects; they validate their own
invariants on construction and are safe to copy across threads.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

ANSWERS = ("A", "B")
ADVANTAGE_MODES = ("count", "std")

# Slack for float log-probabilities: log-softmax is mathematically <= 0 but
# may land a hair above zero in floating point.
_LOGP_TOL = 1e-9


class ConfigError(ValueError):
    """One or more RunConfig fields violate their constraints."""

    def __init__(self, errors: Iterable[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ProblemSpec:
    """A synthetic verifiable task.

    ``difficulty`` is the minimal number of WORK tokens a correct trace must
    contain, so the shortest correct response has ``difficulty + 1`` tokens.
    """

    id: str
    difficulty: int
    correct_answer: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("problem id must be non-empty")
        if not isinstance(self.difficulty, int) or self.difficulty < 1:
            raise ValueError(f"difficulty must be a positive integer, got {self.difficulty!r}")
        if self.correct_answer not in ANSWERS:
            raise ValueError(f"correct_answer must be one of {ANSWERS}, got {self.correct_answer!r}")

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ProblemSpec":
        return cls(id=d["id"], difficulty=int(d["difficulty"]), correct_answer=d["correct_answer"])


@dataclass(frozen=True)
class Rollout:
    """One sampled trajectory under a behavior-policy snapshot.

    ``behavior_logps`` are the log-probabilities (nats) of each emitted token
    under the policy that sampled it; they are constants, not functions of
    the current parameters.
    """

    problem_id: str
    actions: tuple[int, ...]
    behavior_logps: tuple[float, ...]
    length: int
    correct: bool
    truncated: bool

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))
        object.__setattr__(self, "behavior_logps", tuple(float(x) for x in self.behavior_logps))
        if self.length < 1:
            raise ValueError("rollout length must be >= 1")
        if self.length != len(self.actions) or self.length != len(self.behavior_logps):
            raise ValueError(
                f"length {self.length} does not match actions ({len(self.actions)}) "
                f"/ behavior_logps ({len(self.behavior_logps)})"
            )
        if self.truncated and self.correct:
            raise ValueError("a truncated rollout cannot be correct")
        for lp in self.behavior_logps:
            if not math.isfinite(lp) or lp > _LOGP_TOL:
                raise ValueError(f"behavior log-probabilities must be finite and <= 0, got {lp}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "problem_id": self.problem_id,
            "actions": list(self.actions),
            "behavior_logps": list(self.behavior_logps),
            "length": self.length,
            "correct": self.correct,
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Rollout":
        return cls(
            problem_id=d["problem_id"],
            actions=tuple(d["actions"]),
            behavior_logps=tuple(d["behavior_logps"]),
            length=int(d["length"]),
            correct=bool(d["correct"]),
            truncated=bool(d["truncated"]),
        )


@dataclass(frozen=True)
class RolloutGroup:
    """The G rollouts sampled for one problem from one policy snapshot."""

    problem_id: str
    rollouts: tuple[Rollout, ...]
    correct_count: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "rollouts", tuple(self.rollouts))
        if not self.rollouts:
            raise ValueError("a rollout group must contain at least one rollout")
        for r in self.rollouts:
            if r.problem_id != self.problem_id:
                raise ValueError(
                    f"rollout problem_id {r.problem_id!r} does not match group {self.problem_id!r}"
                )
        n_correct = sum(1 for r in self.rollouts if r.correct)
        if self.correct_count != n_correct:
            raise ValueError(f"correct_count {self.correct_count} != actual {n_correct}")

    @classmethod
    def from_rollouts(cls, problem_id: str, rollouts: Iterable[Rollout]) -> "RolloutGroup":
        rollouts = tuple(rollouts)
        return cls(problem_id, rollouts, sum(1 for r in rollouts if r.correct))

    @property
    def size(self) -> int:
        return len(self.rollouts)

    def to_dict(self) -> dict[str, Any]:
        return {
            "problem_id": self.problem_id,
            "rollouts": [r.to_dict() for r in self.rollouts],
            "correct_count": self.correct_count,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RolloutGroup":
        return cls(
            problem_id=d["problem_id"],
            rollouts=tuple(Rollout.from_dict(r) for r in d["rollouts"]),
            correct_count=int(d["correct_count"]),
        )


@dataclass(frozen=True)
class RunConfig:
    """Hyperparameters for one training run.

    Defaults for alpha, r_pen, eps_low/eps_high, group_size and l_max follow
    the published training setup; learning_rate and the bank-shape fields are
    desk-scale choices for the tabular environment.
    """

    alpha: float = 0.1
    r_pen: float = 0.5
    epsilon_adv: float = 1e-6
    group_size: int = 16
    eps_low: float = 0.2
    eps_high: float = 0.28
    l_max: int = 16384
    w_cap: int = 10
    learning_rate: float = 2000.0
    steps: int = 300
    seed: int = 0
    advantage_mode: str = "count"
    # Problem-bank shape (used when the caller does not supply a bank).
    n_problems: int = 20
    d_min: int = 1
    d_max: int = 10
    # Initial logit offset on the two answer actions. Negative values start
    # the policy verbose, mimicking an overthinking base model.
    init_answer_logit: float = -3.0
    checkpoint_every: int = 10

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError([f"unknown config key: {k}" for k in unknown])
        return cls(**{k: v for k, v in d.items()})


def validate_config(config: RunConfig) -> RunConfig:
    """Return ``config`` unchanged iff every field constraint holds.

    Collects every violation (by field name) into a single ConfigError.
    Idempotent: validating a validated config is a no-op.
    """
    errors: list[str] = []
    if config.alpha < 0:
        errors.append("alpha must be >= 0")
    if not 0 <= config.r_pen:
        errors.append("r_pen must be >= 0")
    if config.r_pen >= 1:
        errors.append("r_pen must be < 1")
    if config.epsilon_adv <= 0:
        errors.append("epsilon_adv must be > 0")
    if config.group_size < 2:
        errors.append("group_size must be >= 2")
    if config.eps_low <= 0:
        errors.append("eps_low must be > 0")
    if config.eps_high <= 0:
        errors.append("eps_high must be > 0")
    if not config.eps_low < config.eps_high:
        errors.append("eps_low < eps_high required")
    if config.l_max < 1:
        errors.append("l_max must be >= 1")
    if config.w_cap < 1:
        errors.append("w_cap must be >= 1")
    if config.learning_rate <= 0:
        errors.append("learning_rate must be > 0")
    if config.steps < 0:
        errors.append("steps must be >= 0")
    if config.seed < 0:
        errors.append("seed must be >= 0")
    if config.advantage_mode not in ADVANTAGE_MODES:
        errors.append(f"advantage_mode must be one of {ADVANTAGE_MODES}")
    if config.n_problems < 1:
        errors.append("n_problems must be >= 1")
    if not 1 <= config.d_min <= config.d_max:
        errors.append("1 <= d_min <= d_max required")
    if config.d_max > config.w_cap:
        errors.append("d_max must be <= w_cap")
    if not math.isfinite(config.init_answer_logit):
        errors.append("init_answer_logit must be finite")
    if config.checkpoint_every < 1:
        errors.append("checkpoint_every must be >= 1")
    if errors:
        raise ConfigError(errors)
    return config


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw: str) -> Any:
    kind = _FIELD_TYPES[name]
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def load_config(path: str | Path) -> RunConfig:
    """Load a RunConfig from a flat ``key = value`` text file.

    Blank lines and ``#`` comments are ignored; unknown keys are an error.
    The result is validated before being returned.
    """
    overrides: dict[str, Any] = {}
    errors: list[str] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected key=value, got {line!r}")
            continue
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _FIELD_TYPES:
            errors.append(f"unknown config key: {key}")
            continue
        try:
            overrides[key] = _coerce(key, raw)
        except ValueError:
            errors.append(f"bad value for {key}: {raw!r}")
    if errors:
        raise ConfigError(errors)
    return validate_config(RunConfig(**overrides))


def save_config(config: RunConfig, path: str | Path) -> None:
    """Write a config in the same flat key=value format load_config reads."""
    lines = [f"{k} = {v}" for k, v in config.to_dict().items()]
    Path(path).write_text("\n".join(lines) + "\n")
