"""Per-slot task-to-instance routing and QoS evaluation.

Each task is one raw image entering one task chain from one region; routing
assigns every light-chain hop of every task to a satellite hosting an
instance of that microservice.  The assignment objective is the summed
grid-coordinate Euclidean hop length (anchored at the task's origin region)
plus a large punishment on per-instance capacity overflow.  Assignment uses
the mesh-grid metric; QoS evaluation uses the physical latency model.

Small instances are solved exactly by exhaustive enumeration; larger ones
fall back to a declared greedy (outputs carry an ``exact``/``greedy`` tag).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .constellation import ConstellationGraph
from .perf import chain_latency
from .workload import AppGraph


class RoutingInfeasibleError(RuntimeError):
    """Some required microservice has no deployed instance."""


@dataclass(frozen=True)
class Task:
    """One raw request: the chain it enters and its origin region/satellite."""

    chain: str
    region: int


@dataclass(frozen=True)
class RoutingConfig:
    """Knobs of the assignment solver.

    ``overload_punishment`` must dwarf any achievable grid-distance sum so
    capacity overflow dominates the objective.  ``exact_search_cap`` bounds
    the assignment-space size handled by brute force.
    """

    overload_punishment: float = 1e6
    exact_search_cap: int = 50_000


@dataclass(frozen=True)
class RoutingMatrix:
    """Assignment of every task's light-chain hops to satellites.

    ``assignments[z][p]`` is the satellite serving task ``z`` at its p-th
    light hop.  ``overloaded[z]`` marks tasks that landed on an instance
    beyond its per-slot serving capacity at some hop (in task order).
    """

    tasks: tuple[Task, ...]
    assignments: tuple[tuple[int, ...], ...]
    mode: str
    objective: float
    overloaded: tuple[bool, ...]


def tasks_from_counts(counts: np.ndarray, chain: str) -> list[Task]:
    """Expand per-region counts into tasks, regions ascending."""
    counts = np.asarray(counts, dtype=np.int64)
    return [
        Task(chain=chain, region=region)
        for region in range(counts.size)
        for _ in range(int(counts[region]))
    ]


def _grid_distance(graph: ConstellationGraph, a: int, b: int) -> float:
    (p1, s1), (p2, s2) = graph.grid_coord(a), graph.grid_coord(b)
    return math.hypot(p1 - p2, s1 - s2)


def _objective(
    graph: ConstellationGraph,
    tasks: list[Task],
    hops_per_task: list[list[int]],
    assignments: list[tuple[int, ...]],
    y_slot: np.ndarray,
    capacities: np.ndarray,
    punishment: float,
) -> float:
    distance = 0.0
    counts = np.zeros_like(y_slot)
    for task, hops, row in zip(tasks, hops_per_task, assignments):
        prev = task.region
        for m_idx, sat in zip(hops, row):
            distance += _grid_distance(graph, prev, sat)
            counts[m_idx, sat] += 1
            prev = sat
    overflow = int(np.maximum(0, counts - capacities).sum())
    return distance + punishment * overflow


def _mark_overloaded(
    tasks: list[Task],
    hops_per_task: list[list[int]],
    assignments: list[tuple[int, ...]],
    capacities: np.ndarray,
) -> list[bool]:
    used = np.zeros_like(capacities)
    flags = [False] * len(tasks)
    for z, (hops, row) in enumerate(zip(hops_per_task, assignments)):
        for m_idx, sat in zip(hops, row):
            used[m_idx, sat] += 1
            if used[m_idx, sat] > capacities[m_idx, sat]:
                flags[z] = True
    return flags


def solve_routing(
    task_counts: np.ndarray | list[Task],
    y_slot: np.ndarray,
    app: AppGraph,
    graph: ConstellationGraph,
    config: RoutingConfig | None = None,
    chain: str | None = None,
) -> RoutingMatrix:
    """Assign every task's light-chain hops to deployed instances.

    ``task_counts`` is either a per-region count vector (single-chain
    shortcut; ``chain`` defaults to the app's only chain) or an explicit
    task list.  Instances of microservice ``m`` on satellite ``d`` serve at
    most ``y[m, d] * parallel_capacity`` tasks; assignments beyond that are
    allowed but punished and tagged overloaded.

    Tasks enumerate in (chain, region, repetition) order; all tie-breaks
    are total orders, so identical inputs give identical matrices.
    """
    config = config or RoutingConfig()
    y_slot = np.asarray(y_slot, dtype=np.int64)
    if isinstance(task_counts, (list, tuple)):
        tasks = list(task_counts)
    else:
        if chain is None:
            if len(app.chains) != 1:
                raise ValueError("chain must be named for multi-chain apps")
            chain = next(iter(app.chains))
        tasks = tasks_from_counts(task_counts, chain)

    if not tasks:
        return RoutingMatrix((), (), "exact", 0.0, ())

    hops_per_task = [
        [app.light_index(m) for m in app.light_chain(task.chain)] for task in tasks
    ]
    instance_sats: dict[int, list[int]] = {}
    for hops in hops_per_task:
        for m_idx in hops:
            if m_idx not in instance_sats:
                sats = [d for d in range(y_slot.shape[1]) if y_slot[m_idx, d] >= 1]
                if not sats:
                    raise RoutingInfeasibleError(
                        f"microservice {app.light[m_idx].name} has no deployed instance"
                    )
                instance_sats[m_idx] = sats

    capacities = y_slot * np.array(
        [[m.parallel_capacity] for m in app.light], dtype=np.int64
    )

    space = 1
    exact = True
    for hops in hops_per_task:
        for m_idx in hops:
            space *= len(instance_sats[m_idx])
            if space > config.exact_search_cap:
                exact = False
                break
        if not exact:
            break

    if exact:
        assignments = _solve_exact(
            graph, tasks, hops_per_task, instance_sats, y_slot, capacities, config
        )
        mode = "exact"
    else:
        assignments = _solve_greedy(
            graph, tasks, hops_per_task, instance_sats, capacities
        )
        mode = "greedy"

    objective = _objective(
        graph, tasks, hops_per_task, assignments, y_slot, capacities,
        config.overload_punishment,
    )
    overloaded = _mark_overloaded(tasks, hops_per_task, assignments, capacities)
    return RoutingMatrix(
        tasks=tuple(tasks),
        assignments=tuple(assignments),
        mode=mode,
        objective=objective,
        overloaded=tuple(overloaded),
    )


def _solve_exact(graph, tasks, hops_per_task, instance_sats, y_slot, capacities,
                 config) -> list[tuple[int, ...]]:
    slot_domains: list[list[int]] = []
    shape: list[int] = []
    for hops in hops_per_task:
        shape.append(len(hops))
        for m_idx in hops:
            slot_domains.append(instance_sats[m_idx])

    best_obj = math.inf
    best: tuple[int, ...] | None = None
    for flat in itertools.product(*slot_domains):
        rows: list[tuple[int, ...]] = []
        pos = 0
        for width in shape:
            rows.append(flat[pos:pos + width])
            pos += width
        obj = _objective(
            graph, tasks, hops_per_task, rows, y_slot, capacities,
            config.overload_punishment,
        )
        if obj < best_obj or (obj == best_obj and flat < best):
            best_obj = obj
            best = flat
    rows = []
    pos = 0
    for width in shape:
        rows.append(best[pos:pos + width])
        pos += width
    return rows


def _solve_greedy(graph, tasks, hops_per_task, instance_sats,
                  capacities) -> list[tuple[int, ...]]:
    remaining = capacities.astype(np.int64).copy()
    assignments: list[tuple[int, ...]] = []
    for task, hops in zip(tasks, hops_per_task):
        prev = task.region
        row: list[int] = []
        for m_idx in hops:
            with_room = [d for d in instance_sats[m_idx] if remaining[m_idx, d] > 0]
            pool = with_room if with_room else instance_sats[m_idx]
            sat = min(pool, key=lambda d: (_grid_distance(graph, prev, d), d))
            remaining[m_idx, sat] -= 1
            row.append(sat)
            prev = sat
        assignments.append(tuple(row))
    return assignments


def qos_violations(
    routing: RoutingMatrix,
    qos_bound_ms: float,
    graph: ConstellationGraph,
    app: AppGraph,
    t_ms: float = 0.0,
) -> tuple[int, list[float]]:
    """Count tasks violating the service bound; return per-task latencies.

    A task violates when its light-chain latency exceeds ``qos_bound_ms``
    or when it was routed onto an instance past its serving capacity (no
    spare slot means the request cannot be served in time).
    """
    latencies: list[float] = []
    violations = 0
    for task, row, overloaded in zip(routing.tasks, routing.assignments,
                                     routing.overloaded):
        light = app.light_chain(task.chain)
        latency = chain_latency(graph, app, light, list(row), t_ms)
        latencies.append(latency)
        if overloaded or latency > qos_bound_ms:
            violations += 1
    return violations, latencies
