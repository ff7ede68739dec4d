"""Per-step training loop: snapshot, sample, verify, shape, advantage, update.

Rewards are shaped against the buffer state from before the current batch's
update, then the buffer folds in the batch, and a single gradient-ascent step
is taken on the clipped surrogate. Rollout rng streams are derived from
(seed, step, problem, rollout), so results are reproducible regardless of
worker scheduling.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .advantage import count_advantage, std_advantage
from .buffer import ExperienceBuffer
from .core import ProblemSpec, RolloutGroup, RunConfig, validate_config
from .env import (
    TabularPolicy,
    initial_policy,
    make_problem_bank,
    sample_rollout,
    save_bank,
)
from .objective import gradient, surrogate, token_batch
from .rewards import shape_group

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class StepLog:
    step: int
    batch_mean_length: float
    mean_shortest_correct: float
    batch_accuracy: float
    mean_reward: float
    mean_abs_advantage: float
    objective_value: float
    wall_ms: float
    solved_count: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "StepLog":
        return cls(**d)


@dataclass
class RunResult:
    logs: list[StepLog]
    policy: TabularPolicy
    buffer: ExperienceBuffer
    bank: tuple[ProblemSpec, ...]


def _rollout_rng(seed: int, step: int, p_idx: int, r_idx: int) -> np.random.Generator:
    return np.random.default_rng((seed, step, p_idx, r_idx))


def sample_batch(
    policy: TabularPolicy,
    bank: Sequence[ProblemSpec],
    config: RunConfig,
    step: int,
) -> list[RolloutGroup]:
    """Sample G rollouts per problem from the (frozen) policy."""
    groups = []
    for p_idx, problem in enumerate(bank):
        rollouts = [
            sample_rollout(
                policy, problem, _rollout_rng(config.seed, step, p_idx, r_idx), config.l_max
            )
            for r_idx in range(config.group_size)
        ]
        groups.append(RolloutGroup.from_rollouts(problem.id, rollouts))
    return groups


def train_step(
    policy: TabularPolicy,
    buffer: ExperienceBuffer,
    bank: Sequence[ProblemSpec],
    config: RunConfig,
    step: int,
) -> tuple[TabularPolicy, ExperienceBuffer, StepLog]:
    """One full training step; mutates policy and buffer in place.

    ``step`` seeds the per-(step, problem, rollout) rng streams.
    """
    t0 = time.perf_counter()
    behavior = policy.copy()
    groups = sample_batch(behavior, bank, config, step)

    # Shape against the pre-update buffer, then fold the batch in.
    shaped = [shape_group(g, buffer, config.alpha, config.r_pen) for g in groups]
    for g in groups:
        buffer.update(g)

    advs = []
    for g, rs in zip(groups, shaped):
        values = [s.value for s in rs]
        if config.advantage_mode == "count":
            advs.append(count_advantage(values, g.correct_count, config.epsilon_adv))
        else:
            advs.append(std_advantage(values))

    batch = token_batch(groups, advs, policy)
    objective_value = surrogate(batch, policy, config.eps_low, config.eps_high)
    grad = gradient(batch, policy, config.eps_low, config.eps_high)
    policy.ascend(grad, config.learning_rate)

    n_rollouts = sum(g.size for g in groups)
    log = StepLog(
        step=step,
        batch_mean_length=sum(r.length for g in groups for r in g.rollouts) / n_rollouts,
        mean_shortest_correct=buffer.stats(),
        batch_accuracy=sum(g.correct_count for g in groups) / n_rollouts,
        mean_reward=sum(s.value for rs in shaped for s in rs) / n_rollouts,
        mean_abs_advantage=sum(abs(v) for a in advs for v in a.values) / n_rollouts,
        objective_value=objective_value,
        wall_ms=(time.perf_counter() - t0) * 1000.0,
        solved_count=buffer.solved_count(),
    )
    return policy, buffer, log


def run(
    config: RunConfig,
    bank: Sequence[ProblemSpec] | None = None,
    out_dir: str | Path | None = None,
) -> RunResult:
    """Execute ``config.steps`` training steps from a fresh policy.

    When ``out_dir`` is given, writes ``steps.jsonl`` (one StepLog per line)
    and periodic checkpoints under ``checkpoints/step_<n>/``.
    """
    validate_config(config)
    if bank is None:
        bank = make_problem_bank(config.n_problems, (config.d_min, config.d_max), config.seed)
    else:
        bank = tuple(bank)
    for p in bank:
        if p.difficulty > config.w_cap:
            raise ValueError(f"problem {p.id!r} difficulty {p.difficulty} exceeds w_cap {config.w_cap}")
    ids = [p.id for p in bank]
    policy = initial_policy(ids, config.w_cap, config.init_answer_logit)
    buffer = ExperienceBuffer.init(ids, config.l_max)

    out_path = Path(out_dir) if out_dir is not None else None
    log_file = None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        log_file = (out_path / "steps.jsonl").open("w")

    logs: list[StepLog] = []
    try:
        for step in range(1, config.steps + 1):
            policy, buffer, log = train_step(policy, buffer, bank, config, step)
            logs.append(log)
            if log_file is not None:
                log_file.write(json.dumps(log.to_dict()) + "\n")
            if out_path is not None and step % config.checkpoint_every == 0:
                checkpoint(
                    policy, buffer, step, out_path / "checkpoints" / f"step_{step:05d}", bank=bank
                )
    finally:
        if log_file is not None:
            log_file.close()
    return RunResult(logs=logs, policy=policy, buffer=buffer, bank=bank)


def checkpoint(
    policy: TabularPolicy,
    buffer: ExperienceBuffer,
    step: int,
    path: str | Path,
    bank: Sequence[ProblemSpec] | None = None,
) -> None:
    """Write a resumable training state to a directory.

    ``bank``, when given, is stored alongside so the checkpoint is
    self-contained for evaluation.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if bank is not None:
        save_bank(bank, path / "bank.tsv")
    meta = {
        "version": CHECKPOINT_VERSION,
        "step": step,
        "w_cap": policy.w_cap,
        "problem_ids": list(policy.problem_ids),
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    np.save(path / "policy_logits.npy", policy.logits)
    buffer.save(path / "buffer.expbuf")


def resume(path: str | Path) -> tuple[TabularPolicy, ExperienceBuffer, int]:
    """Load a checkpoint written by ``checkpoint``; bit-exact round trip."""
    path = Path(path)
    try:
        meta = json.loads((path / "meta.json").read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ValueError(f"corrupt checkpoint at {path}: {e}") from None
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"checkpoint version mismatch: {meta.get('version')}")
    logits = np.load(path / "policy_logits.npy")
    policy = TabularPolicy(meta["problem_ids"], meta["w_cap"], logits)
    buffer = ExperienceBuffer.load(path / "buffer.expbuf")
    return policy, buffer, int(meta["step"])
