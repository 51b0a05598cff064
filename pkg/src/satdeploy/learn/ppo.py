"""Clipped-surrogate policy-gradient optimisation for the small policies.

Advantages are discounted returns minus the value baseline, exponentially
smoothed along each episode; the value head regresses to the empirical
returns.  One update consumes a rollout batch with several full-batch
gradient passes against the sampling-time log probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .policy import CategoricalPolicy, evaluate_actions


class DivergenceError(RuntimeError):
    """Optimisation produced a non-finite loss."""


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters shared by both training stages.

    ``episodes`` counts outer iterations, ``epoch_size`` the per-iteration
    optimisation epochs, ``rollouts_per_epoch`` the fresh episodes each
    epoch collects.
    """

    episodes: int = 150
    epoch_size: int = 4
    rollouts_per_epoch: int = 4
    clip_ratio: float = 0.2
    discount: float = 0.99
    advantage_smoothing: float = 0.95
    learning_rate: float = 3e-4
    hidden_sizes: tuple[int, ...] = (64, 64)
    update_passes: int = 4
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    seed: int = 0
    keep_trajectories: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.clip_ratio < 1.0:
            raise ValueError("clip_ratio must lie in (0, 1)")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError("discount must lie in (0, 1]")
        if not 0.0 <= self.advantage_smoothing <= 1.0:
            raise ValueError("advantage_smoothing must lie in [0, 1]")
        if min(self.episodes, self.epoch_size, self.rollouts_per_epoch,
               self.update_passes) < 1:
            raise ValueError("loop sizes must be positive")


@dataclass
class Rollout:
    """Batched transitions; ``dones`` marks final steps of episodes."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    dones: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.rewards)
        if not (len(self.states) == len(self.actions) == len(self.log_probs)
                == len(self.values) == len(self.dones) == n):
            raise ValueError("rollout fields must share one length")

    def __len__(self) -> int:
        return len(self.rewards)

    @staticmethod
    def concatenate(parts: list["Rollout"]) -> "Rollout":
        return Rollout(
            states=np.concatenate([p.states for p in parts]),
            actions=np.concatenate([p.actions for p in parts]),
            rewards=np.concatenate([p.rewards for p in parts]),
            log_probs=np.concatenate([p.log_probs for p in parts]),
            values=np.concatenate([p.values for p in parts]),
            dones=np.concatenate([p.dones for p in parts]),
        )


def discounted_advantages(rewards: np.ndarray, values: np.ndarray,
                          dones: np.ndarray, discount: float,
                          smoothing: float) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed advantage estimates and value-regression targets.

    Per-step temporal differences are accumulated backwards with factor
    ``discount * smoothing``, restarting at episode ends; with smoothing 1
    this is exactly the discounted return minus the baseline.
    """
    n = len(rewards)
    advantages = np.zeros(n)
    carry = 0.0
    next_value = 0.0
    for i in reversed(range(n)):
        if dones[i]:
            carry = 0.0
            next_value = 0.0
        delta = rewards[i] + discount * next_value - values[i]
        carry = delta + discount * smoothing * carry
        advantages[i] = carry
        next_value = values[i]
    returns = advantages + values
    return advantages, returns


def ppo_loss(policy: CategoricalPolicy, states: torch.Tensor,
             actions: torch.Tensor, old_log_probs: torch.Tensor,
             advantages: torch.Tensor, returns: torch.Tensor,
             config: TrainConfig) -> tuple[torch.Tensor, dict]:
    """Clipped surrogate plus value regression minus entropy bonus.

    Returns the scalar loss and detached diagnostics.  Pure in the policy
    parameters given a fixed batch, which is what the finite-difference
    gradient check exercises.
    """
    log_probs, entropy, values = evaluate_actions(policy, states, actions)
    ratio = torch.exp(log_probs - old_log_probs)
    clipped = torch.clamp(ratio, 1.0 - config.clip_ratio, 1.0 + config.clip_ratio)
    surrogate = torch.min(ratio * advantages, clipped * advantages)
    policy_loss = -surrogate.mean()
    value_loss = ((values - returns) ** 2).mean()
    entropy_mean = entropy.mean()
    loss = (policy_loss + config.value_coef * value_loss
            - config.entropy_coef * entropy_mean)
    with torch.no_grad():
        clip_fraction = float(
            ((ratio < 1.0 - config.clip_ratio)
             | (ratio > 1.0 + config.clip_ratio)).double().mean()
        )
    stats = {
        "loss": float(loss.detach()),
        "policy_loss": float(policy_loss.detach()),
        "value_loss": float(value_loss.detach()),
        "entropy": float(entropy_mean.detach()),
        "clip_fraction": clip_fraction,
    }
    return loss, stats


def normalized(advantages: np.ndarray) -> np.ndarray:
    std = advantages.std()
    if std < 1e-12:
        return advantages - advantages.mean()
    return (advantages - advantages.mean()) / std


def ppo_update(policy: CategoricalPolicy, optimizer: torch.optim.Optimizer,
               rollout: Rollout, config: TrainConfig) -> dict:
    """Run ``update_passes`` gradient steps on one rollout batch."""
    if len(rollout) == 0:
        raise ValueError("rollout is empty")
    advantages, returns = discounted_advantages(
        rollout.rewards, rollout.values, rollout.dones,
        config.discount, config.advantage_smoothing,
    )
    states = torch.as_tensor(rollout.states, dtype=torch.float64)
    actions = torch.as_tensor(rollout.actions, dtype=torch.int64)
    old_log_probs = torch.as_tensor(rollout.log_probs, dtype=torch.float64)
    adv_t = torch.as_tensor(normalized(advantages), dtype=torch.float64)
    ret_t = torch.as_tensor(returns, dtype=torch.float64)

    stats: dict = {}
    for _ in range(config.update_passes):
        loss, stats = ppo_loss(policy, states, actions, old_log_probs, adv_t,
                               ret_t, config)
        if not np.isfinite(stats["loss"]):
            raise DivergenceError(f"non-finite loss: {stats}")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
    return stats
