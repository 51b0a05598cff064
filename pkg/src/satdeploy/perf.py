"""Latency and money-cost models over deployment schemes.

Latency of a chain element is transmission (upstream output over the
bottleneck ISL rate) plus propagation (multi-hop path distance over the
speed of light) plus processing (compute bits over host speed).  The first
element of a chain pays processing only.  When a chain element has several
predecessors inside the chain, the last-arriving predecessor's data defines
its transmission and propagation terms.

Costs split into: core deployment+upkeep charged on the one-shot core
scheme, light deployment charged on positive slot-to-slot increments, and
light upkeep/parallel charged per deployed copy per slot.

All functions here are pure over immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constellation import ConstellationGraph
from .workload import AppGraph, Microservice

SPEED_OF_LIGHT_KM_PER_MS = 299.792458


@dataclass(frozen=True)
class DeploymentScheme:
    """Core matrix (num_core, D) placed at t=0 and light tensor (T, num_light, D)."""

    core: np.ndarray
    light: np.ndarray

    def __post_init__(self) -> None:
        core = np.asarray(self.core, dtype=np.int64)
        light = np.asarray(self.light, dtype=np.int64)
        if core.ndim != 2 or light.ndim != 3:
            raise ValueError("core must be 2-D and light 3-D")
        if (core < 0).any() or (light < 0).any():
            raise ValueError("deployment counts must be non-negative")
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "light", light)


@dataclass(frozen=True)
class LatencyBreakdown:
    """Per-element latency split in milliseconds."""

    transmission_ms: float
    propagation_ms: float
    processing_ms: float

    @property
    def total_ms(self) -> float:
        return self.transmission_ms + self.propagation_ms + self.processing_ms


def propagation_latency(graph: ConstellationGraph, src: int, dst: int, t_ms: float,
                        first_in_chain: bool = False) -> float:
    """Multi-hop propagation delay in ms; zero for a chain's first element."""
    if first_in_chain or src == dst:
        return 0.0
    return graph.path_metrics(src, dst, t_ms).distance_km / SPEED_OF_LIGHT_KM_PER_MS


def transmission_latency(graph: ConstellationGraph, upstream: Microservice,
                         src: int, dst: int) -> float:
    """Time to push the upstream result over the path's bottleneck link."""
    if src == dst:
        return 0.0
    return upstream.output_bits / graph.path_metrics(src, dst, 0.0).rate_bits_per_ms


def processing_latency(service: Microservice, graph: ConstellationGraph,
                       host: int) -> float:
    return service.compute_bits / graph.nodes[host].compute_speed


def chain_latency(graph: ConstellationGraph, app: AppGraph, chain: list[str],
                  placement: list[int], t_ms: float) -> float:
    """Total latency of a chain under a per-element satellite placement.

    ``placement[p]`` hosts ``chain[p]``.  Each element contributes one
    latency term; elements with multiple in-chain predecessors take their
    transmission/propagation from the predecessor whose data arrives last.
    """
    total, _ = chain_latency_breakdown(graph, app, chain, placement, t_ms)
    return total


def chain_latency_breakdown(
    graph: ConstellationGraph, app: AppGraph, chain: list[str],
    placement: list[int], t_ms: float,
) -> tuple[float, list[LatencyBreakdown]]:
    if len(placement) < len(chain):
        raise ValueError("placement must cover every chain element")
    hosts = {m: placement[p] for p, m in enumerate(chain)}
    finish: dict[str, float] = {}
    parts: list[LatencyBreakdown] = []
    for p, name in enumerate(chain):
        service = app.services[name]
        host = placement[p]
        proc = processing_latency(service, graph, host)
        preds = [u for u in chain[:p] if (u, name) in app.edges]
        if not preds:
            parts.append(LatencyBreakdown(0.0, 0.0, proc))
            finish[name] = proc
            continue
        # Last-arriving predecessor drives this element's link terms.
        best: tuple[float, float, float] | None = None
        for u in preds:
            tr = transmission_latency(graph, app.services[u], hosts[u], host)
            pp = propagation_latency(graph, hosts[u], host, t_ms)
            arrival = finish[u] + tr + pp
            if best is None or arrival > best[0]:
                best = (arrival, tr, pp)
        arrival, tr, pp = best
        parts.append(LatencyBreakdown(tr, pp, proc))
        finish[name] = arrival + proc
    return sum(b.total_ms for b in parts), parts


# -- money costs ---------------------------------------------------------------


def _check_light_shape(light: np.ndarray, services: list[Microservice]) -> np.ndarray:
    light = np.asarray(light)
    if light.ndim != 3 or light.shape[1] != len(services):
        raise ValueError(
            f"light tensor shape {light.shape} does not match {len(services)} microservices"
        )
    return light


def cost_core(core: np.ndarray, services: list[Microservice], slots: int) -> float:
    """Deployment plus per-slot upkeep of the one-shot core scheme."""
    core = np.asarray(core)
    if core.ndim != 2 or core.shape[0] != len(services):
        raise ValueError(
            f"core matrix shape {core.shape} does not match {len(services)} microservices"
        )
    total = 0.0
    for i, svc in enumerate(services):
        count = float(core[i].sum())
        total += svc.price_deploy * count + slots * svc.price_keep * count
    return total


def cost_light_deploy_slot(light: np.ndarray, services: list[Microservice],
                           t: int) -> float:
    """Deployment cost of slot ``t``: entrywise positive increments over slot t-1.

    Slot 0 carries no deployment charge (only increments between slots are
    billed).
    """
    light = _check_light_shape(light, services)
    if t == 0:
        return 0.0
    inc = np.maximum(0, light[t] - light[t - 1])
    return float(sum(svc.price_deploy * inc[i].sum() for i, svc in enumerate(services)))


def cost_light_keep_slot(light: np.ndarray, services: list[Microservice],
                         t: int) -> float:
    light = _check_light_shape(light, services)
    return float(sum(svc.price_keep * light[t, i].sum() for i, svc in enumerate(services)))


def cost_light_parallel_slot(light: np.ndarray, services: list[Microservice],
                             t: int) -> float:
    light = _check_light_shape(light, services)
    return float(
        sum(svc.price_parallel * light[t, i].sum() for i, svc in enumerate(services))
    )


def cost_light_deploy(light: np.ndarray, services: list[Microservice]) -> float:
    light = _check_light_shape(light, services)
    return sum(cost_light_deploy_slot(light, services, t) for t in range(light.shape[0]))


def cost_light_keep(light: np.ndarray, services: list[Microservice]) -> float:
    light = _check_light_shape(light, services)
    return sum(cost_light_keep_slot(light, services, t) for t in range(light.shape[0]))


def cost_light_parallel(light: np.ndarray, services: list[Microservice]) -> float:
    light = _check_light_shape(light, services)
    return sum(
        cost_light_parallel_slot(light, services, t) for t in range(light.shape[0])
    )
