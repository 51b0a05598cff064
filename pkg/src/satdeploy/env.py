"""Decision environments for the two deployment stages.

Stage one places each core microservice exactly once on the grid, one
placement per step, with a terminal bonus that falls with the core chain's
latency.  Stage two is an episodic game over ``slots`` decision epochs: a
protagonist sets per-satellite copy counts of one light microservice per
step (``num_light`` steps per slot) while an optional adversary injects
bounded request perturbations once per slot.  Rewards decompose into a
per-step term, an end-of-slot cost term, and an episode-end term combining
total light costs with QoS violations.

Episodes are fixed length: resource-violating protagonist actions are
clipped to the largest feasible counts (and punished) instead of aborting.
One environment instance is single-writer; run independent instances for
parallel rollouts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constellation import ConstellationGraph
from .perf import (
    chain_latency,
    cost_light_deploy_slot,
    cost_light_keep_slot,
    cost_light_parallel_slot,
    processing_latency,
    propagation_latency,
    transmission_latency,
)
from .routing import RoutingConfig, RoutingInfeasibleError, Task, solve_routing, qos_violations
from .workload import AppGraph, RequestScenario

REALIZATION_MODES = ("adversary", "nominal", "worst_case", "low_case", "sample")


class InfeasibleSchemeError(RuntimeError):
    """A fixed scheme fails its feasibility constraints."""


@dataclass(frozen=True)
class FeasibilityReport:
    """Per-constraint diagnostics of a (core, one-slot light) scheme."""

    core_complete: bool
    light_complete: bool
    core_within_capacity: bool
    light_within_capacity: bool
    issues: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return (self.core_complete and self.light_complete
                and self.core_within_capacity and self.light_within_capacity)

    def __bool__(self) -> bool:
        return self.ok


def scheme_feasible(core: np.ndarray, y_slot: np.ndarray, app: AppGraph,
                    capacities: np.ndarray) -> FeasibilityReport:
    """Check completeness and resource constraints of one slot's scheme.

    Completeness needs every microservice deployed at least once; capacity
    needs core demands alone, and core plus light demands, to fit every
    satellite's per-resource capacity.
    """
    core = np.asarray(core, dtype=np.int64)
    y_slot = np.asarray(y_slot, dtype=np.int64)
    capacities = np.asarray(capacities, dtype=float)
    issues: list[str] = []

    core_complete = True
    for i, svc in enumerate(app.core):
        if core[i].sum() < 1:
            core_complete = False
            issues.append(f"core microservice {svc.name} is not deployed")
    light_complete = True
    for i, svc in enumerate(app.light):
        if y_slot[i].sum() < 1:
            light_complete = False
            issues.append(f"light microservice {svc.name} is not deployed")

    core_demands = np.array([m.demands for m in app.core], dtype=float)
    light_demands = np.array([m.demands for m in app.light], dtype=float)
    core_load = core_demands.T @ core if app.num_core else np.zeros_like(capacities.T)
    light_load = light_demands.T @ y_slot if app.num_light else np.zeros_like(capacities.T)

    core_ok = bool((core_load.T <= capacities + 1e-9).all())
    if not core_ok:
        issues.append("core deployment exceeds satellite capacity")
    both_ok = bool(((core_load + light_load).T <= capacities + 1e-9).all())
    if not both_ok:
        issues.append("core plus light deployment exceeds satellite capacity")

    return FeasibilityReport(core_complete, light_complete, core_ok, both_ok,
                             tuple(issues))


def ensure_completeness(y_slot: np.ndarray, app: AppGraph, core: np.ndarray,
                        capacities: np.ndarray) -> np.ndarray:
    """Return a copy with one instance added for any absent microservice.

    The instance lands on the lowest-id satellite with room for it; raises
    when no satellite can host one.
    """
    y_slot = np.asarray(y_slot, dtype=np.int64).copy()
    core = np.asarray(core, dtype=np.int64)
    capacities = np.asarray(capacities, dtype=float)
    core_demands = np.array([m.demands for m in app.core], dtype=float)
    light_demands = np.array([m.demands for m in app.light], dtype=float)
    core_load = (core_demands.T @ core).T if app.num_core else np.zeros_like(capacities)
    for i, svc in enumerate(app.light):
        if y_slot[i].sum() >= 1:
            continue
        placed = False
        for d in range(y_slot.shape[1]):
            light_load = light_demands.T @ y_slot
            used = core_load[d] + light_load[:, d]
            if (used + np.array(svc.demands) <= capacities[d] + 1e-9).all():
                y_slot[i, d] = 1
                placed = True
                break
        if not placed:
            raise InfeasibleSchemeError(
                f"no satellite can host a completeness instance of {svc.name}"
            )
    return y_slot


@dataclass(frozen=True)
class EnvConfig:
    """Shared knobs of both stages.

    Sign conventions are enforced: violation/cost/QoS weights are negative,
    success rewards positive.  ``alpha`` bounds per-satellite copies a
    single protagonist action may request; ``phi`` is the request-box
    width.
    """

    slots: int
    qos_bound_ms: float
    phi: int = 0
    alpha: int = 3
    step_violation_reward: float = -5.0
    step_success_reward: float = 1.0
    slot_cost_weight: float = -0.01
    total_cost_weight: float = -0.01
    qos_violation_weight: float = -10.0
    place_violation_reward: float = -5.0
    place_success_reward: float = 1.0
    latency_weight: float = 0.01
    stage1_max_steps: int = 0
    realization: str = "adversary"

    def __post_init__(self) -> None:
        if self.slots < 1:
            raise ValueError("slots must be positive")
        if self.phi < 0:
            raise ValueError("phi must be non-negative")
        if self.alpha < 1:
            raise ValueError("alpha must be at least 1")
        if self.step_violation_reward >= 0 or self.place_violation_reward >= 0:
            raise ValueError("violation rewards must be negative")
        if self.step_success_reward <= 0 or self.place_success_reward <= 0:
            raise ValueError("success rewards must be positive")
        if (self.slot_cost_weight >= 0 or self.total_cost_weight >= 0
                or self.qos_violation_weight >= 0):
            raise ValueError("cost and QoS weights must be negative")
        if self.latency_weight <= 0:
            raise ValueError("latency weight must be positive")
        if self.realization not in REALIZATION_MODES:
            raise ValueError(f"realization must be one of {REALIZATION_MODES}")


@dataclass(frozen=True)
class StepRecord:
    """One protagonist transition for audit logs and bookkeeping tests."""

    step: int
    slot: int
    service_index: int
    action: tuple[int, ...]
    applied: tuple[int, ...]
    step_reward: float
    slot_reward: float
    terminal_reward: float
    reward: float


def protagonist_state_vector(marking: np.ndarray, step: int,
                             service_index: int) -> np.ndarray:
    """Flatten the marking matrix row by row and append step and service."""
    return np.concatenate(
        [marking.reshape(-1).astype(np.float64), [float(step), float(service_index)]]
    )


def adversary_state_vector(marking_prev: np.ndarray, round_index: int) -> np.ndarray:
    return np.concatenate(
        [marking_prev.reshape(-1).astype(np.float64), [float(round_index)]]
    )


class CorePlacementEnv:
    """One-shot core placement, one microservice per step.

    State is the binary placement grid plus the index of the microservice
    being placed.  Overfull placements are rejected with a punishment and
    the same microservice is retried; the episode truncates after
    ``stage1_max_steps`` attempts (default ``20 * num_core``).
    """

    def __init__(self, graph: ConstellationGraph, app: AppGraph, config: EnvConfig):
        if app.num_core == 0:
            raise ValueError("application has no core microservices to place")
        self.graph = graph
        self.app = app
        self.config = config
        self.capacities = np.array([n.capacities for n in graph.nodes], dtype=float)
        self.max_steps = config.stage1_max_steps or 20 * app.num_core
        self._placement: np.ndarray | None = None
        self._service = 0
        self._step = 0
        self._done = True

    @property
    def state_dim(self) -> int:
        return self.app.num_core * self.graph.size + 1

    @property
    def num_actions(self) -> int:
        return self.graph.size

    def reset(self) -> np.ndarray:
        self._placement = np.zeros((self.app.num_core, self.graph.size), dtype=np.int64)
        self._service = 0
        self._step = 0
        self._done = False
        return self._state()

    def _state(self) -> np.ndarray:
        return np.concatenate(
            [self._placement.reshape(-1).astype(np.float64), [float(self._service)]]
        )

    def step(self, action: int) -> tuple[np.ndarray, float, bool, dict]:
        if self._done:
            raise RuntimeError("episode is finished; call reset()")
        if not 0 <= action < self.graph.size:
            raise ValueError(f"action {action} out of range [0, {self.graph.size})")
        self._step += 1
        info: dict = {"placed": False, "truncated": False}

        trial = self._placement.copy()
        trial[self._service, action] += 1
        demands = np.array([m.demands for m in self.app.core], dtype=float)
        load = demands.T @ trial
        if (load[:, action] <= self.capacities[action] + 1e-9).all():
            self._placement = trial
            self._service += 1
            reward = self.config.place_success_reward
            info["placed"] = True
            if self._service == self.app.num_core:
                self._done = True
                latency = self.core_placement_latency(self._placement)
                reward += -self.config.latency_weight * latency
                info["terminal_latency_ms"] = latency
        else:
            reward = self.config.place_violation_reward
            if self._step >= self.max_steps:
                self._done = True
                info["truncated"] = True
        if not self._done and self._step >= self.max_steps:
            self._done = True
            info["truncated"] = True
        return self._state(), reward, self._done, info

    @property
    def placement(self) -> np.ndarray:
        return self._placement.copy()

    def core_placement_latency(self, core: np.ndarray, t_ms: float = 0.0) -> float:
        """Summed latency of each chain's core members under a placement.

        Core members are walked in chain order; each pair contributes the
        link terms plus the downstream member's processing.  The first core
        member of a chain contributes processing only.
        """
        core = np.asarray(core, dtype=np.int64)
        hosts = {}
        for i, svc in enumerate(self.app.core):
            sats = np.flatnonzero(core[i])
            if sats.size == 0:
                raise InfeasibleSchemeError(f"core microservice {svc.name} unplaced")
            hosts[svc.name] = int(sats[0])
        total = 0.0
        for cname in self.app.chains:
            members = self.app.core_chain(cname)
            prev: str | None = None
            for name in members:
                host = hosts[name]
                total += processing_latency(self.app.services[name], self.graph, host)
                if prev is not None:
                    total += transmission_latency(
                        self.graph, self.app.services[prev], hosts[prev], host
                    )
                    total += propagation_latency(self.graph, hosts[prev], host, t_ms)
                prev = name
        return total


class DeploymentEnv:
    """Per-slot light deployment with an optional request adversary.

    The protagonist sees the marking matrix (realized requests in row 0,
    per-microservice deployment counts below); rows hold the most recently
    set values, so early-slot states still show the previous slot's counts
    for later microservices.  ``adversary_step`` may only run at a slot
    boundary and perturbs the upcoming slot; the adversary observes the
    marking matrix captured at its previous decision, one round behind.
    """

    def __init__(
        self,
        graph: ConstellationGraph,
        app: AppGraph,
        scenario: RequestScenario,
        core: np.ndarray,
        config: EnvConfig,
        routing_config: RoutingConfig | None = None,
    ):
        if app.num_light == 0:
            raise ValueError("application has no light microservices to deploy")
        if scenario.regions != graph.size:
            raise ValueError("scenario regions must match constellation size")
        if scenario.slots < config.slots:
            raise ValueError("scenario has fewer slots than the episode needs")
        for cname in scenario.chain_tasks:
            if cname not in app.chains:
                raise ValueError(f"scenario references unknown chain {cname}")
        core = np.asarray(core, dtype=np.int64)
        capacities = np.array([n.capacities for n in graph.nodes], dtype=float)
        report = scheme_feasible(core, np.ones((app.num_light, graph.size)), app,
                                 capacities)
        if not (report.core_complete and report.core_within_capacity):
            raise InfeasibleSchemeError("; ".join(report.issues))

        self.graph = graph
        self.app = app
        self.scenario = scenario
        self.core = core
        self.config = config
        self.routing_config = routing_config or RoutingConfig()
        self.capacities = capacities
        core_demands = np.array([m.demands for m in app.core], dtype=float)
        self.core_load = (
            (core_demands.T @ core).T if app.num_core else np.zeros_like(capacities)
        )
        self.light_demands = np.array([m.demands for m in app.light], dtype=float)
        self._rng = np.random.default_rng(0)
        self._done = True

    # -- dimensions ----------------------------------------------------------

    @property
    def num_light(self) -> int:
        return self.app.num_light

    @property
    def regions(self) -> int:
        return self.graph.size

    @property
    def episode_length(self) -> int:
        return self.config.slots * self.app.num_light

    @property
    def protagonist_state_dim(self) -> int:
        return (1 + self.app.num_light) * self.graph.size + 2

    @property
    def adversary_state_dim(self) -> int:
        return (1 + self.app.num_light) * self.graph.size + 1

    # -- lifecycle -----------------------------------------------------------

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._step_index = 0
        self._adv_round = 0
        self._done = False
        self._light = np.zeros(
            (self.config.slots, self.app.num_light, self.graph.size), dtype=np.int64
        )
        self._marking = np.zeros((1 + self.app.num_light, self.graph.size),
                                 dtype=np.int64)
        self._realized_chains: list[dict[str, np.ndarray]] = []
        self._slot_rewards: list[list[float]] = [[] for _ in range(self.config.slots)]
        self._trajectory: list[StepRecord] = []
        self._start_slot(0)
        self._adv_snapshot = self._marking.copy()
        return self.protagonist_state()

    def _start_slot(self, t: int) -> None:
        realized = realize_slot(self.scenario, t, self.config.realization,
                                self.config.phi, rng=self._rng)
        self._realized_chains.append(realized)
        row0 = np.zeros(self.graph.size, dtype=np.int64)
        for arr in realized.values():
            row0 += arr
        self._marking[0] = row0

    # -- states --------------------------------------------------------------

    def protagonist_state(self) -> np.ndarray:
        return protagonist_state_vector(self._marking, self._step_index,
                                        self._current_service())

    def adversary_state(self) -> np.ndarray:
        return adversary_state_vector(self._adv_snapshot, self._adv_round)

    def _current_service(self) -> int:
        if self._done:
            return 0
        return self._step_index % self.app.num_light

    def current_slot(self) -> int:
        return min(self._step_index // self.app.num_light, self.config.slots - 1)

    # -- protagonist ---------------------------------------------------------

    def protagonist_step(self, action: np.ndarray) -> tuple[np.ndarray, float, bool, dict]:
        if self._done:
            raise RuntimeError("episode is finished; call reset()")
        action = np.asarray(action, dtype=np.int64)
        if action.shape != (self.graph.size,):
            raise ValueError(f"action must have shape ({self.graph.size},)")
        if (action < 0).any() or (action > self.config.alpha).any():
            raise ValueError(f"action entries must lie in [0, {self.config.alpha}]")

        t = self._step_index // self.app.num_light
        u = self._step_index % self.app.num_light

        max_feasible = self._max_feasible_counts(t, u)
        applied = np.minimum(action, max_feasible)
        violated = bool((action > max_feasible).any())
        self._light[t, u] = applied
        self._marking[1 + u] = applied

        step_reward = (self.config.step_violation_reward if violated
                       else self.config.step_success_reward)
        slot_reward = 0.0
        terminal_reward = 0.0
        if u == self.app.num_light - 1:
            slot_cost = (
                cost_light_deploy_slot(self._light, self.app.light, t)
                + cost_light_keep_slot(self._light, self.app.light, t)
                + cost_light_parallel_slot(self._light, self.app.light, t)
            )
            slot_reward = self.config.slot_cost_weight * slot_cost
        if self._step_index == self.episode_length - 1:
            total_cost = sum(
                cost_light_deploy_slot(self._light, self.app.light, s)
                + cost_light_keep_slot(self._light, self.app.light, s)
                + cost_light_parallel_slot(self._light, self.app.light, s)
                for s in range(self.config.slots)
            )
            qos_total = sum(self._slot_qos(s)[0] for s in range(self.config.slots))
            terminal_reward = (self.config.total_cost_weight * total_cost
                               + self.config.qos_violation_weight * qos_total)
        reward = step_reward + slot_reward + terminal_reward
        self._slot_rewards[t].append(reward)
        self._trajectory.append(StepRecord(
            step=self._step_index, slot=t, service_index=u,
            action=tuple(int(a) for a in action),
            applied=tuple(int(a) for a in applied),
            step_reward=step_reward, slot_reward=slot_reward,
            terminal_reward=terminal_reward, reward=reward,
        ))

        self._step_index += 1
        if self._step_index == self.episode_length:
            self._done = True
        elif self._step_index % self.app.num_light == 0:
            self._start_slot(self._step_index // self.app.num_light)
        info = {
            "violated": violated,
            "applied": applied.copy(),
            "slot": t,
            "service_index": u,
            "step_reward": step_reward,
            "slot_reward": slot_reward,
            "terminal_reward": terminal_reward,
        }
        return self.protagonist_state(), reward, self._done, info

    def _max_feasible_counts(self, t: int, u: int) -> np.ndarray:
        """Largest copy count of service ``u`` each satellite can still host."""
        other = self._light[t].copy()
        other[u] = 0
        light_load = (self.light_demands.T @ other).T
        free = self.capacities - self.core_load - light_load
        demands = self.light_demands[u]
        out = np.full(self.graph.size, self.config.alpha, dtype=np.int64)
        for j, need in enumerate(demands):
            if need > 0:
                out = np.minimum(out, np.floor(free[:, j] / need + 1e-9).astype(np.int64))
        return np.maximum(out, 0)

    # -- adversary -----------------------------------------------------------

    def adversary_step(self, action: np.ndarray) -> tuple[np.ndarray, float]:
        """Perturb the upcoming slot's requests; entries bounded by ``phi``.

        Only legal at a slot boundary before any protagonist step of that
        slot.  The returned reward settles the adversary's previous action:
        the negated sum of the protagonist rewards of the slot just
        completed (0 before any slot has finished).
        """
        if self._done:
            raise RuntimeError("episode is finished; call reset()")
        if self.config.realization != "adversary":
            raise RuntimeError("adversary steps need realization mode 'adversary'")
        if self._step_index % self.app.num_light != 0:
            raise RuntimeError("adversary may only act at a slot boundary")
        action = np.asarray(action, dtype=np.int64)
        if action.shape != (self.graph.size,):
            raise ValueError(f"action must have shape ({self.graph.size},)")
        if (np.abs(action) > self.config.phi).any():
            raise ValueError(f"perturbation entries must lie in [-{self.config.phi}, "
                             f"{self.config.phi}]")

        t = self._step_index // self.app.num_light
        reward = self.adversary_reward(t - 1) if t > 0 else 0.0
        # Re-realize the upcoming slot with this perturbation.
        self._realized_chains.pop()
        nominal = {c: arr[t].copy() for c, arr in self.scenario.chain_tasks.items()}
        realized = _apply_perturbation(nominal, action)
        self._realized_chains.append(realized)
        row0 = np.zeros(self.graph.size, dtype=np.int64)
        for arr in realized.values():
            row0 += arr
        self._marking[0] = row0

        self._adv_snapshot = self._marking.copy()
        self._adv_round += 1
        return self.adversary_state(), reward

    def adversary_reward(self, slot: int) -> float:
        """Negated sum of the protagonist rewards logged for ``slot``."""
        return -sum(self._slot_rewards[slot])

    # -- bookkeeping and metrics ----------------------------------------------

    @property
    def trajectory(self) -> list[StepRecord]:
        return list(self._trajectory)

    @property
    def light_schedule(self) -> np.ndarray:
        return self._light.copy()

    def realized_region_tasks(self, t: int) -> np.ndarray:
        out = np.zeros(self.graph.size, dtype=np.int64)
        for arr in self._realized_chains[t].values():
            out += arr
        return out

    def realized_chain_counts(self, t: int) -> dict[str, np.ndarray]:
        return {c: arr.copy() for c, arr in self._realized_chains[t].items()}

    def realized_tasks(self, t: int) -> list[Task]:
        tasks: list[Task] = []
        for cname in self.app.chains:
            counts = self._realized_chains[t].get(cname)
            if counts is None:
                continue
            for region in range(self.graph.size):
                tasks.extend(Task(cname, region) for _ in range(int(counts[region])))
        return tasks

    def _slot_qos(self, t: int) -> tuple[int, list[float]]:
        """QoS violations of slot ``t`` under the realized requests.

        A light microservice with zero instances makes every task of the
        slot unservable, which counts each one as a violation.
        """
        tasks = self.realized_tasks(t)
        if not tasks:
            return 0, []
        try:
            routing = solve_routing(tasks, self._light[t], self.app, self.graph,
                                    self.routing_config)
        except RoutingInfeasibleError:
            return len(tasks), [float("inf")] * len(tasks)
        return qos_violations(routing, self.config.qos_bound_ms, self.graph, self.app)

    def slot_unserved(self, t: int) -> int:
        """Tasks of slot ``t`` that found no spare serving capacity."""
        tasks = self.realized_tasks(t)
        if not tasks:
            return 0
        try:
            routing = solve_routing(tasks, self._light[t], self.app, self.graph,
                                    self.routing_config)
        except RoutingInfeasibleError:
            return len(tasks)
        return sum(routing.overloaded)


def realize_slot(scenario: RequestScenario, t: int, mode: str, phi: int,
                 rng: np.random.Generator | None = None,
                 perturbation: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Per-chain realized request counts for one slot.

    ``adversary`` applies the given perturbation (nominal when absent),
    ``nominal`` none, ``worst_case`` the +phi box corner in every region
    (demand surge), ``low_case`` the -phi corner clamped at zero (demand
    lull), and ``sample`` a uniform integer draw from the box.
    """
    if mode not in REALIZATION_MODES:
        raise ValueError(f"realization must be one of {REALIZATION_MODES}")
    nominal = {c: arr[t].copy() for c, arr in scenario.chain_tasks.items()}
    regions = scenario.regions
    if mode == "adversary":
        delta = perturbation
    elif mode == "nominal":
        delta = None
    elif mode == "worst_case":
        delta = np.full(regions, phi, dtype=np.int64)
    elif mode == "low_case":
        delta = np.full(regions, -phi, dtype=np.int64)
    else:
        if rng is None:
            raise ValueError("sample mode needs a random generator")
        delta = rng.integers(-phi, phi + 1, regions)
    return _apply_perturbation(nominal, delta)


def realize_scenario(scenario: RequestScenario, slots: int, mode: str, phi: int,
                     seed: int = 0) -> list[dict[str, np.ndarray]]:
    """Realize ``slots`` consecutive slots under one deterministic mode."""
    rng = np.random.default_rng(seed)
    return [realize_slot(scenario, t, mode, phi, rng=rng) for t in range(slots)]


@dataclass(frozen=True)
class SlotReport:
    """Evaluation of one slot of a schedule under realized requests."""

    slot: int
    realized_total: int
    processed: int
    unserved: int
    qos_violations: int
    deployed: int
    latencies: tuple[float, ...]
    cost_deploy: float
    cost_keep: float
    cost_parallel: float
    feasible: bool


@dataclass(frozen=True)
class ScheduleReport:
    """Evaluation of a full light schedule against a fixed core scheme."""

    slots: tuple[SlotReport, ...]
    total_cost: float
    total_qos_violations: int
    total_deployed: int
    all_feasible: bool

    @property
    def processed_per_slot(self) -> list[int]:
        return [s.processed for s in self.slots]

    @property
    def deployed_per_slot(self) -> list[int]:
        return [s.deployed for s in self.slots]


def evaluate_schedule(
    graph: ConstellationGraph,
    app: AppGraph,
    core: np.ndarray,
    light: np.ndarray,
    realized: list[dict[str, np.ndarray]],
    qos_bound_ms: float,
    routing_config: RoutingConfig | None = None,
) -> ScheduleReport:
    """Score a schedule against realized requests, slot by slot.

    A task is processed when every light hop found spare serving capacity;
    QoS violations additionally count tasks whose light-chain latency
    exceeds the bound.  Feasibility covers completeness and both resource
    constraints per slot.
    """
    routing_config = routing_config or RoutingConfig()
    core = np.asarray(core, dtype=np.int64)
    light = np.asarray(light, dtype=np.int64)
    capacities = np.array([n.capacities for n in graph.nodes], dtype=float)
    slot_reports: list[SlotReport] = []
    for t, chain_counts in enumerate(realized):
        tasks: list[Task] = []
        for cname in app.chains:
            counts = chain_counts.get(cname)
            if counts is None:
                continue
            for region in range(graph.size):
                tasks.extend(Task(cname, region) for _ in range(int(counts[region])))
        realized_total = len(tasks)
        if not tasks:
            unserved = 0
            violations = 0
            latencies: list[float] = []
        else:
            try:
                routing = solve_routing(tasks, light[t], app, graph, routing_config)
            except RoutingInfeasibleError:
                routing = None
            if routing is None:
                unserved = realized_total
                violations = realized_total
                latencies = [float("inf")] * realized_total
            else:
                unserved = sum(routing.overloaded)
                violations, latencies = qos_violations(
                    routing, qos_bound_ms, graph, app
                )
        report = scheme_feasible(core, light[t], app, capacities)
        slot_reports.append(SlotReport(
            slot=t,
            realized_total=realized_total,
            processed=realized_total - unserved,
            unserved=unserved,
            qos_violations=violations,
            deployed=int(light[t].sum()),
            latencies=tuple(latencies),
            cost_deploy=cost_light_deploy_slot(light, app.light, t),
            cost_keep=cost_light_keep_slot(light, app.light, t),
            cost_parallel=cost_light_parallel_slot(light, app.light, t),
            feasible=report.ok,
        ))
    total_cost = sum(s.cost_deploy + s.cost_keep + s.cost_parallel
                     for s in slot_reports)
    return ScheduleReport(
        slots=tuple(slot_reports),
        total_cost=total_cost,
        total_qos_violations=sum(s.qos_violations for s in slot_reports),
        total_deployed=sum(s.deployed for s in slot_reports),
        all_feasible=all(s.feasible for s in slot_reports),
    )


def _apply_perturbation(nominal: dict[str, np.ndarray],
                        delta: np.ndarray | None) -> dict[str, np.ndarray]:
    """Apply a per-region request delta to per-chain counts, clamped at zero.

    Positive deltas add to the first chain in declaration order; negative
    deltas drain chains in order without driving any count below zero.
    """
    realized = {c: arr.copy() for c, arr in nominal.items()}
    if delta is None:
        return realized
    chains = list(realized)
    for region, change in enumerate(delta):
        change = int(change)
        if change > 0:
            realized[chains[0]][region] += change
        elif change < 0:
            remaining = -change
            for cname in chains:
                take = min(remaining, int(realized[cname][region]))
                realized[cname][region] -= take
                remaining -= take
                if remaining == 0:
                    break
    return realized
