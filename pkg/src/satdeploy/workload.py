"""Microservice application model, request scenarios, and box uncertainty.

An application is a DAG of microservices split into *light* modules
(re-deployable every slot) and *core* modules (placed once up front).  Task
types are ordered chains through the DAG.  Demand is a per-slot matrix of
integer request counts per region; uncertainty is a max-norm box of width
``phi`` around the nominal counts, with negative counts clamped out of the
admissible set (request counts are physical).

All types are immutable value objects and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

LIGHT = "light"
CORE = "core"


@dataclass(frozen=True)
class Microservice:
    """One deployable module and its prices.

    ``demands`` lists per-resource-type requirements, ``compute_bits`` the
    work one request costs, ``output_bits`` the result size shipped to the
    next module, ``parallel_capacity`` how many requests one deployed copy
    serves per slot.
    """

    name: str
    kind: str
    demands: tuple[float, ...]
    compute_bits: float
    output_bits: float
    parallel_capacity: int
    price_deploy: float
    price_keep: float
    price_parallel: float

    def __post_init__(self) -> None:
        if self.kind not in (LIGHT, CORE):
            raise ValueError(f"kind must be '{LIGHT}' or '{CORE}'")
        if self.compute_bits <= 0:
            raise ValueError("compute_bits must be positive")
        if self.output_bits < 0:
            raise ValueError("output_bits must be non-negative")
        if self.parallel_capacity < 1:
            raise ValueError("parallel_capacity must be at least 1")
        if any(d < 0 for d in self.demands):
            raise ValueError("resource demands must be non-negative")
        if min(self.price_deploy, self.price_keep, self.price_parallel) < 0:
            raise ValueError("prices must be non-negative")


class AppGraph:
    """Directed acyclic application graph with named task chains.

    Light and core microservices get stable indices (``light_index`` /
    ``core_index``) in declaration order; deployment matrices are indexed
    by those.  Every chain must be a path along the data-flow edges.
    """

    def __init__(self, microservices: list[Microservice],
                 edges: list[tuple[str, str]],
                 chains: dict[str, list[str]]):
        names = [m.name for m in microservices]
        if len(set(names)) != len(names):
            raise ValueError("duplicate microservice names")
        self.services: dict[str, Microservice] = {m.name: m for m in microservices}
        self.light = [m for m in microservices if m.kind == LIGHT]
        self.core = [m for m in microservices if m.kind == CORE]
        self._light_index = {m.name: i for i, m in enumerate(self.light)}
        self._core_index = {m.name: i for i, m in enumerate(self.core)}

        for a, b in edges:
            if a not in self.services or b not in self.services:
                raise ValueError(f"edge ({a}, {b}) references unknown microservice")
        self.edges: set[tuple[str, str]] = set(edges)
        self._check_acyclic()

        if not chains:
            raise ValueError("at least one task chain is required")
        for cname, seq in chains.items():
            if not seq:
                raise ValueError(f"chain '{cname}' is empty")
            for m in seq:
                if m not in self.services:
                    raise ValueError(f"chain '{cname}' references unknown microservice {m}")
            for a, b in zip(seq, seq[1:]):
                if (a, b) not in self.edges:
                    raise ValueError(f"chain '{cname}' is not a path: missing edge ({a}, {b})")
        self.chains: dict[str, list[str]] = {k: list(v) for k, v in chains.items()}

    def _check_acyclic(self) -> None:
        indegree = {n: 0 for n in self.services}
        for _, b in self.edges:
            indegree[b] += 1
        queue = [n for n, d in indegree.items() if d == 0]
        seen = 0
        while queue:
            n = queue.pop()
            seen += 1
            for a, b in self.edges:
                if a == n:
                    indegree[b] -= 1
                    if indegree[b] == 0:
                        queue.append(b)
        if seen != len(self.services):
            raise ValueError("data-flow edges contain a cycle")

    @property
    def num_light(self) -> int:
        return len(self.light)

    @property
    def num_core(self) -> int:
        return len(self.core)

    def light_index(self, name: str) -> int:
        return self._light_index[name]

    def core_index(self, name: str) -> int:
        return self._core_index[name]

    def predecessors(self, name: str) -> list[str]:
        return sorted(a for a, b in self.edges if b == name)

    def light_chain(self, chain_name: str) -> list[str]:
        """Light-microservice subsequence of a chain (routing/QoS hops)."""
        return [m for m in self.chains[chain_name] if self.services[m].kind == LIGHT]

    def core_chain(self, chain_name: str) -> list[str]:
        return [m for m in self.chains[chain_name] if self.services[m].kind == CORE]


def spread_total(total: int, regions: int) -> np.ndarray:
    """Deterministically spread a request total over regions.

    Every region gets ``total // regions``; the remainder goes one-by-one
    to the lowest region ids.
    """
    if total < 0:
        raise ValueError("total must be non-negative")
    base, rem = divmod(total, regions)
    out = np.full(regions, base, dtype=np.int64)
    out[:rem] += 1
    return out


@dataclass(frozen=True)
class RequestScenario:
    """Nominal request counts per slot, region, and task chain.

    ``chain_tasks`` maps chain name -> (slots, regions) array of raw task
    counts (one task = one raw image entering that chain).  Per-microservice
    demand rows derive from chain membership: each task touches each of its
    chain's microservices exactly once.
    """

    slots: int
    regions: int
    chain_tasks: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.slots < 1 or self.regions < 1:
            raise ValueError("slots and regions must be positive")
        for cname, arr in self.chain_tasks.items():
            arr = np.asarray(arr, dtype=np.int64)
            if arr.shape != (self.slots, self.regions):
                raise ValueError(
                    f"chain '{cname}' tasks must have shape ({self.slots}, {self.regions})"
                )
            if (arr < 0).any():
                raise ValueError("task counts must be non-negative")
            object.__setattr__(self, "chain_tasks",
                               {**self.chain_tasks, cname: arr})

    @classmethod
    def from_totals(cls, totals: dict[str, list[int]], regions: int) -> "RequestScenario":
        """Build from per-slot chain totals using the round-robin spread."""
        slot_counts = {len(v) for v in totals.values()}
        if len(slot_counts) != 1:
            raise ValueError("all chains must list the same number of slots")
        slots = slot_counts.pop()
        chain_tasks = {
            cname: np.stack([spread_total(tot, regions) for tot in per_slot])
            for cname, per_slot in totals.items()
        }
        return cls(slots=slots, regions=regions, chain_tasks=chain_tasks)

    def region_tasks(self, t: int) -> np.ndarray:
        """Total raw tasks entering per region at slot ``t`` (request row 0)."""
        out = np.zeros(self.regions, dtype=np.int64)
        for arr in self.chain_tasks.values():
            out += arr[t]
        return out

    def demand(self, t: int, app: AppGraph) -> np.ndarray:
        """Per-light-microservice demand matrix (num_light, regions) at ``t``."""
        out = np.zeros((app.num_light, self.regions), dtype=np.int64)
        for cname, arr in self.chain_tasks.items():
            for m in app.light_chain(cname):
                out[app.light_index(m)] += arr[t]
        return out


@dataclass(frozen=True)
class UncertaintyBox:
    """Max-norm ball of integer width ``phi`` around a nominal matrix."""

    phi: int

    def __post_init__(self) -> None:
        if self.phi < 0:
            raise ValueError("box width must be non-negative")


def box_contains(nominal: np.ndarray, candidate: np.ndarray, phi: int) -> bool:
    """Whether ``candidate`` lies in the width-``phi`` box around ``nominal``.

    Membership needs every entry within ``phi`` of the nominal value and no
    negative entries.
    """
    nominal = np.asarray(nominal)
    candidate = np.asarray(candidate)
    if nominal.shape != candidate.shape:
        raise ValueError(f"shape mismatch: {nominal.shape} vs {candidate.shape}")
    if (candidate < 0).any():
        return False
    return bool(np.max(np.abs(candidate - nominal), initial=0) <= phi)


def worst_case_parallel_slack(y_row: np.ndarray, parallel_capacity: int,
                              nominal_row: np.ndarray, phi: int) -> int:
    """Worst-case slack of the parallel-serving constraint for one microservice.

    Returns ``min over the box of sum_s(y_s * k - z_s)``; the minimum sits at
    the upper box corner because the sum is linear in ``z``, so this equals
    ``sum(y) * k - sum(nominal + phi)``.  The constraint holds over the whole
    box iff the result is non-negative.
    """
    y_row = np.asarray(y_row, dtype=np.int64)
    nominal_row = np.asarray(nominal_row, dtype=np.int64)
    if y_row.shape != nominal_row.shape:
        raise ValueError(f"shape mismatch: {y_row.shape} vs {nominal_row.shape}")
    capacity = int(y_row.sum()) * int(parallel_capacity)
    worst_demand = int(nominal_row.sum()) + phi * nominal_row.size
    return capacity - worst_demand


def enumerate_box_vertices(nominal: np.ndarray, phi: int,
                           cap: int = 1_000_000) -> Iterator[np.ndarray]:
    """Yield every integer matrix inside the box, clamped at zero.

    Entry ``e`` ranges over ``[max(0, e - phi), e + phi]``.  Raises when the
    number of points would exceed ``cap`` (this is a desk-scale exhaustive
    tool, not a production path).
    """
    nominal = np.asarray(nominal, dtype=np.int64)
    flat = nominal.reshape(-1)
    lowers = np.maximum(0, flat - phi)
    uppers = flat + phi
    total = 1
    for lo, up in zip(lowers, uppers):
        total *= int(up - lo + 1)
        if total > cap:
            raise ValueError(f"box has more than {cap} integer points")

    def rec(idx: int, current: np.ndarray) -> Iterator[np.ndarray]:
        if idx == flat.size:
            yield current.reshape(nominal.shape).copy()
            return
        for value in range(int(lowers[idx]), int(uppers[idx]) + 1):
            current[idx] = value
            yield from rec(idx + 1, current)

    yield from rec(0, np.zeros_like(flat))
