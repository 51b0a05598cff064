"""Autoscaling heuristics: per-satellite instance sizing with overflow shift.

The plain heuristic sizes each satellite to its local nominal demand
(one instance per ``parallel_capacity`` requests, rounded up); the robust
variant sizes to nominal plus the box width.  Instances that exceed a
satellite's remaining resources shift to the nearest satellite with room
(mesh-grid metric, lowest id on ties).  A microservice with no demand
anywhere still gets one instance so the application stays complete.
"""

from __future__ import annotations

import math

import numpy as np

from ..env import DeploymentEnv
from ..workload import RequestScenario


class CapacityError(RuntimeError):
    """The constellation cannot host the required instances."""


def hpa_baseline(scenario: RequestScenario, env: DeploymentEnv) -> np.ndarray:
    """Instance schedule sized to the nominal demand."""
    return _autoscale(scenario, env, phi=0)


def robust_hpa_baseline(scenario: RequestScenario, env: DeploymentEnv,
                        phi: int) -> np.ndarray:
    """Instance schedule sized to nominal demand plus the box width."""
    if phi < 0:
        raise ValueError("phi must be non-negative")
    return _autoscale(scenario, env, phi=phi)


def _autoscale(scenario: RequestScenario, env: DeploymentEnv, phi: int) -> np.ndarray:
    app, graph = env.app, env.graph
    slots = env.config.slots
    light = np.zeros((slots, app.num_light, graph.size), dtype=np.int64)
    light_demands = np.array([m.demands for m in app.light], dtype=float)

    for t in range(slots):
        demand = scenario.demand(t, app)
        for m_idx, svc in enumerate(app.light):
            wanted = np.ceil((demand[m_idx] + phi) / svc.parallel_capacity)
            wanted = wanted.astype(np.int64)
            for d in range(graph.size):
                count = int(wanted[d])
                if count == 0:
                    continue
                room = _room_for(env, light_demands, light[t], m_idx, d)
                placed = min(count, room)
                light[t, m_idx, d] = placed
                for _ in range(count - placed):
                    _shift_one(env, graph, light_demands, light[t], m_idx, d, svc.name)
            if light[t, m_idx].sum() == 0:
                _shift_one(env, graph, light_demands, light[t], m_idx, 0, svc.name,
                           include_source=True)
    return light


def _room_for(env: DeploymentEnv, light_demands: np.ndarray, y_slot: np.ndarray,
              m_idx: int, d: int) -> int:
    """How many more copies of microservice ``m_idx`` satellite ``d`` can take."""
    other = y_slot.copy()
    other[m_idx, d] = 0
    load = light_demands.T @ other
    free = env.capacities[d] - env.core_load[d] - load[:, d]
    room = math.inf
    for j, need in enumerate(light_demands[m_idx]):
        if need > 0:
            room = min(room, math.floor(free[j] / need + 1e-9))
    if math.isinf(room):
        return 10 ** 9
    return max(0, int(room))


def _shift_one(env: DeploymentEnv, graph, light_demands: np.ndarray,
               y_slot: np.ndarray, m_idx: int, source: int, name: str,
               include_source: bool = False) -> None:
    """Place one displaced instance on the nearest satellite with room."""
    (p1, s1) = graph.grid_coord(source)
    candidates = []
    for d in range(graph.size):
        if d == source and not include_source:
            continue
        current = int(y_slot[m_idx, d])
        if _room_for(env, light_demands, y_slot, m_idx, d) > current:
            (p2, s2) = graph.grid_coord(d)
            candidates.append((math.hypot(p1 - p2, s1 - s2), d))
    if not candidates:
        raise CapacityError(
            f"total capacity insufficient for microservice {name}"
        )
    _, best = min(candidates)
    y_slot[m_idx, best] += 1
