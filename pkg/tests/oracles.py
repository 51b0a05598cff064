"""Independent reference implementations used to cross-check the package.

Everything here deliberately avoids the code paths under test: positions
come from explicit 3-D rotation matrices, path metrics from exhaustive
simple-path enumeration, routing objectives from brute-force assignment
search, game values from simplex grids and support enumeration, and
gradients from central finite differences.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import torch

EARTH_ROTATION_DEG_PER_MS = 360.0 / 86_164_090.5


# -- geometry -----------------------------------------------------------------


def rotation_position(radius_km, inclination_deg, ascending_node_deg,
                      angular_velocity_deg_per_ms, initial_phase_deg, t_ms):
    """Sub-satellite point via rotation matrices in an Earth-fixed frame."""
    mu = math.radians(angular_velocity_deg_per_ms * t_ms + initial_phase_deg)
    inc = math.radians(inclination_deg)
    node = math.radians(ascending_node_deg - EARTH_ROTATION_DEG_PER_MS * t_ms)
    in_plane = np.array([math.cos(mu), math.sin(mu), 0.0])
    rot_x = np.array([
        [1.0, 0.0, 0.0],
        [0.0, math.cos(inc), -math.sin(inc)],
        [0.0, math.sin(inc), math.cos(inc)],
    ])
    rot_z = np.array([
        [math.cos(node), -math.sin(node), 0.0],
        [math.sin(node), math.cos(node), 0.0],
        [0.0, 0.0, 1.0],
    ])
    unit = rot_z @ rot_x @ in_plane
    lat = math.degrees(math.asin(np.clip(unit[2], -1.0, 1.0)))
    lon = math.degrees(math.atan2(unit[1], unit[0]))
    return lat, lon, radius_km * unit


def chord_between(vec_u: np.ndarray, vec_v: np.ndarray) -> float:
    return float(np.linalg.norm(vec_u - vec_v))


def enumerate_simple_paths(neighbors: dict[int, tuple[int, ...]], src: int,
                           dst: int) -> list[list[int]]:
    """All simple paths of a small graph via depth-first search."""
    paths: list[list[int]] = []

    def walk(node: int, seen: list[int]) -> None:
        if node == dst:
            paths.append(list(seen))
            return
        for nxt in neighbors[node]:
            if nxt not in seen:
                seen.append(nxt)
                walk(nxt, seen)
                seen.pop()

    walk(src, [src])
    return paths


# -- routing ------------------------------------------------------------------


def brute_force_routing(graph, tasks, hops_per_task, instance_sats, capacities,
                        punishment):
    """Minimum assignment objective by exhaustive search.

    Mirrors the published objective: summed grid-Euclidean hop lengths
    anchored at the origin region plus a punishment on per-instance
    overflow.  Returns (best objective, best flat assignment tuple).
    """
    domains = []
    for hops in hops_per_task:
        for m_idx in hops:
            domains.append(instance_sats[m_idx])

    def coord(sat):
        return graph.grid_coord(sat)

    best_obj = math.inf
    best = None
    for flat in itertools.product(*domains):
        counts = np.zeros_like(capacities)
        distance = 0.0
        pos = 0
        for task, hops in zip(tasks, hops_per_task):
            prev = coord(task.region)
            for m_idx in hops:
                sat = flat[pos]
                cur = coord(sat)
                distance += math.hypot(prev[0] - cur[0], prev[1] - cur[1])
                counts[m_idx, sat] += 1
                prev = cur
                pos += 1
        overflow = int(np.maximum(0, counts - capacities).sum())
        obj = distance + punishment * overflow
        if obj < best_obj:
            best_obj = obj
            best = flat
    return best_obj, best


# -- latency ------------------------------------------------------------------


def timeline_chain_latency(graph, app, chain, placement, t_ms):
    """Event-by-event finish time of a path chain (equals the summed terms)."""
    clock = 0.0
    for p, name in enumerate(chain):
        svc = app.services[name]
        host = placement[p]
        if p > 0:
            upstream = app.services[chain[p - 1]]
            src = placement[p - 1]
            if src != host:
                metrics = graph.path_metrics(src, host, t_ms)
                clock += upstream.output_bits / metrics.rate_bits_per_ms
                clock += metrics.distance_km / 299.792458
        clock += svc.compute_bits / graph.nodes[host].compute_speed
    return clock


# -- matrix games ---------------------------------------------------------------


def simplex_grid(dim: int, steps: int):
    """All probability vectors with entries in multiples of 1/steps."""
    for cuts in itertools.combinations_with_replacement(range(steps + 1), dim - 1):
        parts = [cuts[0]] + [b - a for a, b in zip(cuts, cuts[1:])] + [steps - cuts[-1]]
        yield np.array(parts, dtype=float) / steps


def grid_maximin(payoff: np.ndarray, steps: int = 60) -> float:
    """Max over a y-simplex grid of the worst pure-column payoff."""
    best = -math.inf
    for y in simplex_grid(payoff.shape[0], steps):
        worst = float((y @ payoff).min())
        best = max(best, worst)
    return best


def support_enumeration_value(payoff: np.ndarray) -> float:
    """Game value via support enumeration on small square-ish games.

    For every support pair of equal size, solve the indifference equations
    and keep solutions that form mutual best responses.
    """
    m, n = payoff.shape
    for size in range(1, min(m, n) + 1):
        for rows in itertools.combinations(range(m), size):
            for cols in itertools.combinations(range(n), size):
                sub = payoff[np.ix_(rows, cols)]
                try:
                    a = np.vstack([np.hstack([sub.T, -np.ones((size, 1))]),
                                   np.hstack([np.ones((1, size)), np.zeros((1, 1))])])
                    sol_y = np.linalg.solve(a, np.concatenate([np.zeros(size), [1.0]]))
                    b = np.vstack([np.hstack([sub, -np.ones((size, 1))]),
                                   np.hstack([np.ones((1, size)), np.zeros((1, 1))])])
                    sol_z = np.linalg.solve(b, np.concatenate([np.zeros(size), [1.0]]))
                except np.linalg.LinAlgError:
                    continue
                y_part, vy = sol_y[:-1], sol_y[-1]
                z_part, vz = sol_z[:-1], sol_z[-1]
                if (y_part < -1e-9).any() or (z_part < -1e-9).any():
                    continue
                if abs(vy - vz) > 1e-7:
                    continue
                y = np.zeros(m)
                y[list(rows)] = np.clip(y_part, 0.0, None)
                z = np.zeros(n)
                z[list(cols)] = np.clip(z_part, 0.0, None)
                y /= y.sum()
                z /= z.sum()
                value = float(y @ payoff @ z)
                if ((payoff @ z).max() <= value + 1e-7
                        and (y @ payoff).min() >= value - 1e-7):
                    return value
    raise RuntimeError("no equilibrium found by support enumeration")


# -- gradients ------------------------------------------------------------------


def finite_difference_gradient(loss_fn, policy, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar loss over all policy parameters."""
    grads = []
    with torch.no_grad():
        for param in policy.parameters():
            flat = param.view(-1)
            grad = torch.zeros_like(flat)
            for i in range(flat.numel()):
                original = float(flat[i])
                flat[i] = original + eps
                high = float(loss_fn())
                flat[i] = original - eps
                low = float(loss_fn())
                flat[i] = original
                grad[i] = (high - low) / (2.0 * eps)
            grads.append(grad.clone())
    return torch.cat(grads).numpy()
