"""Training loops: core placement, alternating adversarial training, vanilla.

The alternating loop freezes one side while the other trains: each outer
iteration first improves the protagonist for ``epoch_size`` epochs against
the frozen adversary (fresh rollouts every epoch), then improves the
adversary against the frozen protagonist.  A vanilla run is the same
protagonist loop with no adversary and nominal requests.

Every random draw flows through a role-specific generator derived from the
run seed, so identical configurations reproduce identical trajectories and
curves; with box width zero the adversarial loop and a vanilla run visit
bitwise-identical protagonist trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from ..env import CorePlacementEnv, DeploymentEnv, InfeasibleSchemeError
from .policy import CategoricalPolicy, greedy_action, sample_action, state_value
from .ppo import DivergenceError, Rollout, TrainConfig, ppo_update

_ROLE_OFFSETS = {
    "prot_init": 1,
    "adv_init": 2,
    "prot_sample": 3,
    "adv_sample": 4,
    "prot_frozen": 5,
    "adv_frozen": 6,
    "stage1_init": 7,
    "stage1_sample": 8,
}


def role_generator(seed: int, role: str) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(seed * 7919 + _ROLE_OFFSETS[role])
    return gen


def role_seed(seed: int, role: str) -> int:
    return seed * 7919 + _ROLE_OFFSETS[role]


class NoFeasiblePlacementError(RuntimeError):
    """Greedy decoding found no capacity-feasible core placement."""


# ---------------------------------------------------------------------------
# Stage one: core placement
# ---------------------------------------------------------------------------


@dataclass
class Stage1Result:
    policy: CategoricalPolicy
    placement: np.ndarray
    feasible: bool
    latency_ms: float
    curve: list[dict]


def train_stage1(env: CorePlacementEnv, config: TrainConfig) -> Stage1Result:
    """Episode-by-episode policy-gradient training of the placement policy.

    Each episode is rolled out with the current stochastic policy and
    immediately used for one update.  The returned placement is greedily
    decoded (most probable satellite first, ties to the lowest id, skipping
    capacity-violating choices) and certified against the core constraints.
    """
    policy = CategoricalPolicy(
        input_dim=env.state_dim,
        num_heads=1,
        classes_per_head=env.num_actions,
        hidden_sizes=config.hidden_sizes,
        seed=role_seed(config.seed, "stage1_init"),
    )
    optimizer = torch.optim.Adam(policy.parameters(), lr=config.learning_rate)
    gen = role_generator(config.seed, "stage1_sample")
    curve: list[dict] = []
    for episode in range(config.episodes):
        rollout, episode_return = _collect_stage1_episode(env, policy, gen)
        stats = ppo_update(policy, optimizer, rollout, config)
        curve.append({"iteration": episode, "mean_return": episode_return, **stats})
    placement, latency = greedy_core_placement(env, policy)
    return Stage1Result(
        policy=policy,
        placement=placement,
        feasible=True,
        latency_ms=latency,
        curve=curve,
    )


def _collect_stage1_episode(env: CorePlacementEnv, policy: CategoricalPolicy,
                            gen: torch.Generator) -> tuple[Rollout, float]:
    states, actions, rewards, log_probs, values, dones = [], [], [], [], [], []
    state = env.reset()
    done = False
    while not done:
        value = state_value(policy, state)
        classes, log_prob = sample_action(policy, state, gen)
        next_state, reward, done, _ = env.step(int(classes[0]))
        states.append(state)
        actions.append(classes)
        rewards.append(reward)
        log_probs.append(log_prob)
        values.append(value)
        dones.append(done)
        state = next_state
    rollout = Rollout(
        states=np.array(states),
        actions=np.array(actions),
        rewards=np.array(rewards, dtype=float),
        log_probs=np.array(log_probs, dtype=float),
        values=np.array(values, dtype=float),
        dones=np.array(dones, dtype=bool),
    )
    return rollout, float(sum(rewards))


def greedy_core_placement(env: CorePlacementEnv,
                          policy: CategoricalPolicy) -> tuple[np.ndarray, float]:
    """Decode a feasible placement, preferring high-probability satellites."""
    app, graph = env.app, env.graph
    demands = np.array([m.demands for m in app.core], dtype=float)
    placement = np.zeros((app.num_core, graph.size), dtype=np.int64)
    for index in range(app.num_core):
        state = np.concatenate(
            [placement.reshape(-1).astype(np.float64), [float(index)]]
        )
        probs = policy.head_probabilities(state)[0]
        order = np.lexsort((np.arange(graph.size), -probs))
        placed = False
        for sat in order:
            trial = placement.copy()
            trial[index, sat] += 1
            load = demands.T @ trial
            if (load[:, sat] <= env.capacities[sat] + 1e-9).all():
                placement = trial
                placed = True
                break
        if not placed:
            raise NoFeasiblePlacementError(
                f"no satellite can host core microservice {app.core[index].name}"
            )
    return placement, env.core_placement_latency(placement)


# ---------------------------------------------------------------------------
# Stage two: adversarial and vanilla training
# ---------------------------------------------------------------------------


@dataclass
class EpisodeTrace:
    """Both sides of one stage-two episode."""

    protagonist: Rollout
    adversary: Rollout | None
    protagonist_return: float
    adversary_return: float


def play_stage2_episode(
    env: DeploymentEnv,
    protagonist: CategoricalPolicy,
    adversary: CategoricalPolicy | None,
    prot_gen: torch.Generator,
    adv_gen: torch.Generator | None,
    greedy: bool = False,
) -> EpisodeTrace:
    """Roll one episode; the adversary (when present) acts at slot boundaries.

    The adversary's reward for the perturbation of slot ``t`` settles after
    the protagonist finishes the slot, so its transitions are assembled
    from the environment's slot sums once the episode ends.
    """
    phi = env.config.phi
    num_light = env.app.num_light
    state = env.reset()

    p_states, p_actions, p_rewards, p_logps, p_values, p_dones = [], [], [], [], [], []
    a_states, a_actions, a_logps, a_values = [], [], [], []

    done = False
    step = 0
    while not done:
        if adversary is not None and step % num_light == 0:
            adv_state = env.adversary_state()
            classes, logp = sample_action(adversary, adv_state, adv_gen)
            env.adversary_step(classes - phi)
            a_states.append(adv_state)
            a_actions.append(classes)
            a_logps.append(logp)
            a_values.append(state_value(adversary, adv_state))
            state = env.protagonist_state()
        value = state_value(protagonist, state)
        if greedy:
            classes = greedy_action(protagonist, state)
            logp = 0.0
        else:
            classes, logp = sample_action(protagonist, state, prot_gen)
        next_state, reward, done, _ = env.protagonist_step(classes)
        p_states.append(state)
        p_actions.append(classes)
        p_rewards.append(reward)
        p_logps.append(logp)
        p_values.append(value)
        p_dones.append(done)
        state = next_state
        step += 1

    prot_rollout = Rollout(
        states=np.array(p_states),
        actions=np.array(p_actions),
        rewards=np.array(p_rewards, dtype=float),
        log_probs=np.array(p_logps, dtype=float),
        values=np.array(p_values, dtype=float),
        dones=np.array(p_dones, dtype=bool),
    )
    adv_rollout = None
    adversary_return = 0.0
    if adversary is not None:
        slots = env.config.slots
        a_rewards = [env.adversary_reward(t) for t in range(slots)]
        adv_rollout = Rollout(
            states=np.array(a_states),
            actions=np.array(a_actions),
            rewards=np.array(a_rewards, dtype=float),
            log_probs=np.array(a_logps, dtype=float),
            values=np.array(a_values, dtype=float),
            dones=np.array([t == slots - 1 for t in range(slots)], dtype=bool),
        )
        adversary_return = float(sum(a_rewards))
    return EpisodeTrace(
        protagonist=prot_rollout,
        adversary=adv_rollout,
        protagonist_return=float(sum(p_rewards)),
        adversary_return=adversary_return,
    )


@dataclass
class AdversarialEpisodeResult:
    protagonist_return: float
    adversary_return: float


def play_adversarial_episode(env: DeploymentEnv, protagonist: CategoricalPolicy,
                             adversary: CategoricalPolicy,
                             seed: int) -> AdversarialEpisodeResult:
    """One seeded stochastic episode between two fixed policies."""
    prot_gen = torch.Generator()
    prot_gen.manual_seed(seed * 2 + 1)
    adv_gen = torch.Generator()
    adv_gen.manual_seed(seed * 2 + 2)
    trace = play_stage2_episode(env, protagonist, adversary, prot_gen, adv_gen)
    return AdversarialEpisodeResult(
        protagonist_return=trace.protagonist_return,
        adversary_return=trace.adversary_return,
    )


@dataclass
class MsrarlResult:
    protagonist: CategoricalPolicy
    adversary: CategoricalPolicy
    curves: list[dict]
    schedule_log: list[tuple[int, str, int]]
    protagonist_trajectories: list[dict] = field(default_factory=list)
    diverged: bool = False


def train_msrarl(env: DeploymentEnv, config: TrainConfig) -> MsrarlResult:
    """Alternating adversarial training of protagonist and adversary.

    Per outer iteration the protagonist trains for ``epoch_size`` epochs
    against the frozen adversary, then the adversary trains for
    ``epoch_size`` epochs against the frozen protagonist; every epoch
    collects ``rollouts_per_epoch`` fresh episodes and runs one update.
    Divergence raises with the partial result attached.
    """
    if env.config.realization != "adversary":
        raise ValueError("adversarial training needs realization mode 'adversary'")
    protagonist = CategoricalPolicy(
        input_dim=env.protagonist_state_dim,
        num_heads=env.regions,
        classes_per_head=env.config.alpha + 1,
        hidden_sizes=config.hidden_sizes,
        seed=role_seed(config.seed, "prot_init"),
    )
    adversary = CategoricalPolicy(
        input_dim=env.adversary_state_dim,
        num_heads=env.regions,
        classes_per_head=2 * env.config.phi + 1,
        hidden_sizes=config.hidden_sizes,
        seed=role_seed(config.seed, "adv_init"),
    )
    prot_opt = torch.optim.Adam(protagonist.parameters(), lr=config.learning_rate)
    adv_opt = torch.optim.Adam(adversary.parameters(), lr=config.learning_rate)
    gens = {role: role_generator(config.seed, role)
            for role in ("prot_sample", "adv_sample", "prot_frozen", "adv_frozen")}

    result = MsrarlResult(protagonist, adversary, [], [])
    try:
        for iteration in range(config.episodes):
            for epoch in range(config.epoch_size):
                result.schedule_log.append((iteration, "protagonist", epoch))
                traces = [
                    play_stage2_episode(env, protagonist, adversary,
                                        gens["prot_sample"], gens["adv_frozen"])
                    for _ in range(config.rollouts_per_epoch)
                ]
                rollout = Rollout.concatenate([t.protagonist for t in traces])
                stats = ppo_update(protagonist, prot_opt, rollout, config)
                result.curves.append({
                    "iteration": iteration, "phase": "protagonist", "epoch": epoch,
                    "mean_return": float(np.mean(
                        [t.protagonist_return for t in traces])),
                    **stats,
                })
                if config.keep_trajectories:
                    result.protagonist_trajectories.append({
                        "iteration": iteration, "epoch": epoch,
                        "states": rollout.states.copy(),
                        "actions": rollout.actions.copy(),
                        "rewards": rollout.rewards.copy(),
                    })
            for epoch in range(config.epoch_size):
                result.schedule_log.append((iteration, "adversary", epoch))
                traces = [
                    play_stage2_episode(env, protagonist, adversary,
                                        gens["prot_frozen"], gens["adv_sample"])
                    for _ in range(config.rollouts_per_epoch)
                ]
                rollout = Rollout.concatenate([t.adversary for t in traces])
                stats = ppo_update(adversary, adv_opt, rollout, config)
                result.curves.append({
                    "iteration": iteration, "phase": "adversary", "epoch": epoch,
                    "mean_return": float(np.mean(
                        [t.adversary_return for t in traces])),
                    **stats,
                })
    except DivergenceError as err:
        result.diverged = True
        err.partial_result = result
        raise
    return result


@dataclass
class VanillaResult:
    policy: CategoricalPolicy
    curves: list[dict]
    protagonist_trajectories: list[dict] = field(default_factory=list)


def train_vanilla(env: DeploymentEnv, config: TrainConfig) -> VanillaResult:
    """Single-agent training against the nominal request process.

    Runs the same protagonist loop as the adversarial trainer with the
    adversary absent; role generators match, so a zero-width adversarial
    run visits identical protagonist trajectories.
    """
    policy = CategoricalPolicy(
        input_dim=env.protagonist_state_dim,
        num_heads=env.regions,
        classes_per_head=env.config.alpha + 1,
        hidden_sizes=config.hidden_sizes,
        seed=role_seed(config.seed, "prot_init"),
    )
    optimizer = torch.optim.Adam(policy.parameters(), lr=config.learning_rate)
    gen = role_generator(config.seed, "prot_sample")
    result = VanillaResult(policy, [])
    for iteration in range(config.episodes):
        for epoch in range(config.epoch_size):
            traces = [
                play_stage2_episode(env, policy, None, gen, None)
                for _ in range(config.rollouts_per_epoch)
            ]
            rollout = Rollout.concatenate([t.protagonist for t in traces])
            stats = ppo_update(policy, optimizer, rollout, config)
            result.curves.append({
                "iteration": iteration, "phase": "protagonist", "epoch": epoch,
                "mean_return": float(np.mean([t.protagonist_return for t in traces])),
                **stats,
            })
            if config.keep_trajectories:
                result.protagonist_trajectories.append({
                    "iteration": iteration, "epoch": epoch,
                    "states": rollout.states.copy(),
                    "actions": rollout.actions.copy(),
                    "rewards": rollout.rewards.copy(),
                })
    return result


def greedy_schedule(env: DeploymentEnv,
                    policy: CategoricalPolicy) -> tuple[np.ndarray, list[dict]]:
    """Greedy-decode a full light schedule in the environment's mode.

    Returns the schedule (completeness-repaired: any absent microservice
    gets one instance on the lowest-id satellite with room) together with
    the realized per-chain request counts the decode observed.
    """
    from ..env import ensure_completeness

    env.reset()
    state = env.protagonist_state()
    done = False
    while not done:
        classes = greedy_action(policy, state)
        state, _, done, _ = env.protagonist_step(classes)
    light = env.light_schedule
    for t in range(light.shape[0]):
        light[t] = ensure_completeness(light[t], env.app, env.core, env.capacities)
    realized = [env.realized_chain_counts(t) for t in range(env.config.slots)]
    return light, realized
