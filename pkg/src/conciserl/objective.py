"""Token-level clipped surrogate objective and its exact gradient.

Per group, the objective is the clipped-term sum over all tokens divided by
the group's total token count; the batch objective is the mean over groups.
Clipping is asymmetric (eps_low < eps_high), permitting larger updates in the
favorable direction. The gradient is derived analytically for the tabular
softmax policy: a token whose min picks the clipped-and-constant branch
contributes nothing, otherwise it contributes ratio * advantage times the
softmax score function at its state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .advantage import AdvantageVector, broadcast
from .core import RolloutGroup
from .env import TabularPolicy, replay_states


def token_ratio(new_logp: float, old_logp: float) -> float:
    """Importance ratio pi_theta / pi_theta_old for one token."""
    if not (np.isfinite(new_logp) and np.isfinite(old_logp)):
        raise ValueError("log-probabilities must be finite")
    return float(np.exp(new_logp - old_logp))


def clipped_term(ratio: float, advantage: float, eps_low: float, eps_high: float) -> float:
    """min(ratio * A, clip(ratio, 1 - eps_low, 1 + eps_high) * A)."""
    if not (0 < eps_low < eps_high):
        raise ValueError("need 0 < eps_low < eps_high")
    clipped = min(max(ratio, 1.0 - eps_low), 1.0 + eps_high)
    return min(ratio * advantage, clipped * advantage)


@dataclass(frozen=True)
class GroupTokens:
    """All tokens of one rollout group, flattened.

    ``old_logps`` are behavior-snapshot constants; new-policy log-probs are
    recomputed from the current parameters via (problem_index, states,
    actions) lookups.
    """

    problem_id: str
    problem_index: int
    states: np.ndarray      # (T,) work-counter state per token
    actions: np.ndarray     # (T,)
    old_logps: np.ndarray   # (T,)
    advantages: np.ndarray  # (T,) broadcast per-rollout advantages

    def __post_init__(self) -> None:
        n = len(self.actions)
        if n < 1:
            raise ValueError("empty group")
        if not (len(self.states) == len(self.old_logps) == len(self.advantages) == n):
            raise ValueError("per-token arrays must have equal length")


@dataclass(frozen=True)
class TokenBatch:
    groups: tuple[GroupTokens, ...]

    def __post_init__(self) -> None:
        if not self.groups:
            raise ValueError("empty batch")


def token_batch(
    groups: Sequence[RolloutGroup],
    advantages: Sequence[AdvantageVector],
    policy: TabularPolicy,
) -> TokenBatch:
    """Broadcast per-rollout advantages to tokens and flatten per group."""
    if len(groups) != len(advantages):
        raise ValueError("one AdvantageVector per group required")
    out = []
    for group, adv in zip(groups, advantages):
        if len(adv.values) != group.size:
            raise ValueError(f"advantage vector size mismatch for {group.problem_id!r}")
        pi = policy.problem_index(group.problem_id)
        states = [replay_states(r.actions, policy.w_cap) for r in group.rollouts]
        out.append(
            GroupTokens(
                problem_id=group.problem_id,
                problem_index=pi,
                states=np.concatenate(states),
                actions=np.concatenate(
                    [np.array(r.actions, dtype=np.intp) for r in group.rollouts]
                ),
                old_logps=np.concatenate(
                    [np.array(r.behavior_logps) for r in group.rollouts]
                ),
                advantages=np.concatenate(
                    [broadcast(a, r.length) for a, r in zip(adv.values, group.rollouts)]
                ),
            )
        )
    return TokenBatch(tuple(out))


def surrogate(
    batch: TokenBatch, policy: TabularPolicy, eps_low: float, eps_high: float
) -> float:
    """Batch objective: mean over groups of token-normalized clipped sums."""
    if not (0 < eps_low < eps_high):
        raise ValueError("need 0 < eps_low < eps_high")
    logp = policy.log_probs()
    total = 0.0
    for g in batch.groups:
        new_logps = logp[g.problem_index, g.states, g.actions]
        ratio = np.exp(new_logps - g.old_logps)
        clipped = np.clip(ratio, 1.0 - eps_low, 1.0 + eps_high)
        terms = np.minimum(ratio * g.advantages, clipped * g.advantages)
        total += terms.sum() / len(terms)
    return total / len(batch.groups)


def gradient(
    batch: TokenBatch, policy: TabularPolicy, eps_low: float, eps_high: float
) -> np.ndarray:
    """Exact gradient of ``surrogate`` w.r.t. the policy logits.

    At an exact tie between the two min branches the unclipped branch's
    gradient is used (ties are measure-zero under sampling).
    """
    if not (0 < eps_low < eps_high):
        raise ValueError("need 0 < eps_low < eps_high")
    logp = policy.log_probs()
    probs = np.exp(logp)
    grad = np.zeros_like(policy.logits)
    n_groups = len(batch.groups)
    for g in batch.groups:
        new_logps = logp[g.problem_index, g.states, g.actions]
        ratio = np.exp(new_logps - g.old_logps)
        clipped = np.clip(ratio, 1.0 - eps_low, 1.0 + eps_high)
        unclipped_val = ratio * g.advantages
        clipped_val = clipped * g.advantages
        active = unclipped_val <= clipped_val  # ties -> unclipped branch
        # d(ratio * A)/d logits = ratio * A * (onehot(action) - probs(state))
        weight = np.where(active, unclipped_val, 0.0) / (len(ratio) * n_groups)
        np.add.at(grad, (g.problem_index, g.states, g.actions), weight)
        np.add.at(
            grad,
            (g.problem_index, g.states),
            -weight[:, None] * probs[g.problem_index, g.states],
        )
    return grad
