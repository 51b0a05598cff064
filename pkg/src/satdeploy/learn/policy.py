"""Factorized categorical policies over small feed-forward networks.

A policy owns ``num_heads`` independent categorical heads of equal class
count plus a scalar value head; an action is one class index per head.
Protagonist actions use one head per satellite with ``alpha + 1`` classes,
adversary actions one head per region with ``2 * phi + 1`` classes, and the
core-placement policy a single head over satellites.  Factorizing keeps the
combinatorial per-satellite action space tractable; the joint log
probability is the per-head sum.

Everything runs in float64 on CPU and all randomness flows through
explicit generators, so identical seeds give identical weights and samples.
"""

from __future__ import annotations

import json
import math

import numpy as np
import torch
from torch import nn


class CategoricalPolicy(nn.Module):
    """MLP trunk with factorized categorical heads and a value head."""

    def __init__(self, input_dim: int, num_heads: int, classes_per_head: int,
                 hidden_sizes: tuple[int, ...] = (64, 64), seed: int = 0):
        super().__init__()
        if num_heads < 1 or classes_per_head < 1:
            raise ValueError("need at least one head and one class")
        self.input_dim = input_dim
        self.num_heads = num_heads
        self.classes_per_head = classes_per_head
        self.hidden_sizes = tuple(hidden_sizes)
        self.seed = seed

        layers: list[nn.Module] = []
        width = input_dim
        for size in hidden_sizes:
            layers.append(nn.Linear(width, size, dtype=torch.float64))
            layers.append(nn.Tanh())
            width = size
        self.trunk = nn.Sequential(*layers)
        self.logit_head = nn.Linear(width, num_heads * classes_per_head,
                                    dtype=torch.float64)
        self.value_head = nn.Linear(width, 1, dtype=torch.float64)
        self._init_weights(seed)

    def _init_weights(self, seed: int) -> None:
        gen = torch.Generator()
        gen.manual_seed(seed)
        for module in self.modules():
            if isinstance(module, nn.Linear):
                bound = 1.0 / math.sqrt(module.in_features)
                with torch.no_grad():
                    module.weight.uniform_(-bound, bound, generator=gen)
                    module.bias.uniform_(-bound, bound, generator=gen)

    def forward(self, states: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Head logits (batch, heads, classes) and value estimates (batch,)."""
        squeeze = states.dim() == 1
        if squeeze:
            states = states.unsqueeze(0)
        hidden = self.trunk(states)
        logits = self.logit_head(hidden).view(-1, self.num_heads,
                                              self.classes_per_head)
        values = self.value_head(hidden).squeeze(-1)
        if squeeze:
            return logits.squeeze(0), values.squeeze(0)
        return logits, values

    def head_probabilities(self, state: np.ndarray) -> np.ndarray:
        """Per-head class probabilities for one state."""
        with torch.no_grad():
            logits, _ = self.forward(torch.as_tensor(state, dtype=torch.float64))
        return torch.softmax(logits, dim=-1).numpy()

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())


def sample_action(policy: CategoricalPolicy, state: np.ndarray,
                  generator: torch.Generator) -> tuple[np.ndarray, float]:
    """Sample one class per head; return indices and the joint log probability."""
    state_t = torch.as_tensor(state, dtype=torch.float64)
    if state_t.shape != (policy.input_dim,):
        raise ValueError(f"state must have shape ({policy.input_dim},)")
    with torch.no_grad():
        logits, _ = policy.forward(state_t)
        probs = torch.softmax(logits, dim=-1)
        picks = torch.multinomial(probs, 1, generator=generator).squeeze(-1)
        log_probs = torch.log_softmax(logits, dim=-1)
        joint = log_probs.gather(-1, picks.unsqueeze(-1)).sum()
    return picks.numpy().astype(np.int64), float(joint)


def greedy_action(policy: CategoricalPolicy, state: np.ndarray) -> np.ndarray:
    """Most likely class per head; argmax resolves ties to the lowest index."""
    with torch.no_grad():
        logits, _ = policy.forward(torch.as_tensor(state, dtype=torch.float64))
    return logits.argmax(dim=-1).numpy().astype(np.int64)


def state_value(policy: CategoricalPolicy, state: np.ndarray) -> float:
    with torch.no_grad():
        _, value = policy.forward(torch.as_tensor(state, dtype=torch.float64))
    return float(value)


def evaluate_actions(policy: CategoricalPolicy, states: torch.Tensor,
                     actions: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor,
                                                     torch.Tensor]:
    """Joint log probs, per-state entropy, and values for a batch (differentiable)."""
    logits, values = policy.forward(states)
    log_probs = torch.log_softmax(logits, dim=-1)
    joint = log_probs.gather(-1, actions.unsqueeze(-1)).squeeze(-1).sum(dim=-1)
    probs = torch.softmax(logits, dim=-1)
    entropy = -(probs * log_probs).sum(dim=-1).sum(dim=-1)
    return joint, entropy, values


def save_checkpoint(path, policy: CategoricalPolicy, *, seed: int,
                    iteration: int, config_hash: str = "",
                    extra: dict | None = None) -> None:
    """Persist a policy as npz arrays plus a JSON metadata record."""
    meta = {
        "input_dim": policy.input_dim,
        "num_heads": policy.num_heads,
        "classes_per_head": policy.classes_per_head,
        "hidden_sizes": list(policy.hidden_sizes),
        "seed": seed,
        "iteration": iteration,
        "config_hash": config_hash,
        **(extra or {}),
    }
    arrays = {
        key: value.detach().numpy()
        for key, value in policy.state_dict().items()
    }
    np.savez(path, __meta__=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path) -> tuple[CategoricalPolicy, dict]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        arrays = {key: data[key] for key in data.files if key != "__meta__"}
    policy = CategoricalPolicy(
        input_dim=meta["input_dim"],
        num_heads=meta["num_heads"],
        classes_per_head=meta["classes_per_head"],
        hidden_sizes=tuple(meta["hidden_sizes"]),
        seed=meta.get("seed", 0),
    )
    policy.load_state_dict(
        {key: torch.as_tensor(value) for key, value in arrays.items()}
    )
    return policy, meta
