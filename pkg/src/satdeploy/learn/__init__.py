"""Policies, the clipped-surrogate optimiser, training loops, and baselines."""

from .baselines import CapacityError, hpa_baseline, robust_hpa_baseline
from .policy import (
    CategoricalPolicy,
    evaluate_actions,
    greedy_action,
    load_checkpoint,
    sample_action,
    save_checkpoint,
    state_value,
)
from .ppo import (
    DivergenceError,
    Rollout,
    TrainConfig,
    discounted_advantages,
    ppo_loss,
    ppo_update,
)
from .training import (
    MsrarlResult,
    NoFeasiblePlacementError,
    Stage1Result,
    VanillaResult,
    greedy_core_placement,
    greedy_schedule,
    play_adversarial_episode,
    play_stage2_episode,
    train_msrarl,
    train_stage1,
    train_vanilla,
)

__all__ = [
    "CapacityError",
    "CategoricalPolicy",
    "DivergenceError",
    "MsrarlResult",
    "NoFeasiblePlacementError",
    "Rollout",
    "Stage1Result",
    "TrainConfig",
    "VanillaResult",
    "discounted_advantages",
    "evaluate_actions",
    "greedy_action",
    "greedy_core_placement",
    "greedy_schedule",
    "hpa_baseline",
    "load_checkpoint",
    "play_adversarial_episode",
    "play_stage2_episode",
    "ppo_loss",
    "ppo_update",
    "robust_hpa_baseline",
    "sample_action",
    "save_checkpoint",
    "state_value",
    "train_msrarl",
    "train_stage1",
    "train_vanilla",
]
