"""Walker-Star constellation geometry.

Satellites live on ``planes x per_plane`` circular orbits and are addressed
by a flat node id ``plane * per_plane + slot``.  Every satellite keeps four
inter-satellite links (ISLs): two neighbours within its plane and one in
each adjacent plane, with wrap-around on both axes.  Degenerate grids
(``planes`` or ``per_plane`` of 2) collapse duplicate links and end up with
fewer than four neighbours.

Positions are sub-satellite points (latitude, longitude in degrees) in an
Earth-fixed frame; distances are straight-line chords in kilometres.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

EARTH_RADIUS_KM = 6371.0
# Earth rotation rate, degrees per millisecond (sidereal day of 86164.0905 s).
EARTH_ROTATION_DEG_PER_MS = 360.0 / 86_164_090.5


@dataclass(frozen=True)
class OrbitalElements:
    """Circular-orbit elements of one satellite.

    ``radius_km`` is Earth radius plus orbit altitude.  Angles are degrees;
    ``angular_velocity_deg_per_ms`` is the satellite's own orbital rate.
    """

    radius_km: float
    inclination_deg: float
    ascending_node_deg: float
    angular_velocity_deg_per_ms: float
    initial_phase_deg: float

    def __post_init__(self) -> None:
        if self.radius_km <= EARTH_RADIUS_KM:
            raise ValueError(f"radius_km must exceed {EARTH_RADIUS_KM} km")
        if self.angular_velocity_deg_per_ms <= 0:
            raise ValueError("angular velocity must be positive")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ValueError("inclination must lie in [0, 180] degrees")


@dataclass(frozen=True)
class SatelliteNode:
    """One satellite: orbital elements plus its edge-compute envelope.

    ``capacities`` holds one non-negative amount per resource type (the
    bundled configs use CPU cores, memory GB, GPU cores, watts);
    ``compute_speed`` is bits per millisecond.
    """

    node_id: int
    elements: OrbitalElements
    capacities: tuple[float, ...]
    compute_speed: float

    def __post_init__(self) -> None:
        if any(c < 0 for c in self.capacities):
            raise ValueError("capacities must be non-negative")
        if self.compute_speed <= 0:
            raise ValueError("compute_speed must be positive")


@dataclass(frozen=True)
class PathMetrics:
    """Aggregates along a multi-hop ISL path."""

    distance_km: float
    rate_bits_per_ms: float
    hops: int


def position(node: SatelliteNode, t_ms: float) -> tuple[float, float]:
    """Sub-satellite latitude/longitude (degrees) at time ``t_ms``.

    The phase angle advances as ``mu = omega1 * t + gamma``; latitude is
    ``asin(sin i * sin mu)`` and longitude combines the ascending node, the
    in-plane angle (via the two-argument arctangent, so the full orbit is
    tracked instead of a folded half-plane) and Earth rotation.  Longitude
    is normalised to (-180, 180].
    """
    el = node.elements
    mu = math.radians(el.angular_velocity_deg_per_ms * t_ms + el.initial_phase_deg)
    inc = math.radians(el.inclination_deg)
    lat = math.degrees(math.asin(math.sin(inc) * math.sin(mu)))
    lon = (
        el.ascending_node_deg
        + math.degrees(math.atan2(math.cos(inc) * math.sin(mu), math.cos(mu)))
        - EARTH_ROTATION_DEG_PER_MS * t_ms
    )
    lon = lon % 360.0
    if lon > 180.0:
        lon -= 360.0
    return lat, lon


def chord_distance_km(radius_km: float, pos_u: tuple[float, float],
                      pos_v: tuple[float, float]) -> float:
    """Straight-line distance between two points on a sphere of ``radius_km``."""
    phi_u, lam_u = (math.radians(a) for a in pos_u)
    phi_v, lam_v = (math.radians(a) for a in pos_v)
    inner = (
        1.0
        - math.cos(phi_u) * math.cos(phi_v) * math.cos(lam_u - lam_v)
        - math.sin(phi_u) * math.sin(phi_v)
    )
    # Rounding can push the bracket a hair below zero for coincident points.
    return math.sqrt(max(0.0, 2.0 * radius_km * radius_km * inner))


class ConstellationGraph:
    """Immutable Walker-Star mesh of satellites joined by ISLs.

    Construction wires the grid topology and rejects mixed-altitude node
    sets (the chord-distance model assumes one shared orbital radius).
    Instances are safe for concurrent readers; ``position``/``distance``
    are pure functions of the graph and ``t``.
    """

    def __init__(self, planes: int, per_plane: int, nodes: list[SatelliteNode],
                 link_rate: float,
                 link_rate_overrides: dict[tuple[int, int], float] | None = None):
        if planes < 1 or per_plane < 1:
            raise ValueError("planes and per_plane must be at least 1")
        if len(nodes) != planes * per_plane:
            raise ValueError("node count must equal planes * per_plane")
        if link_rate <= 0:
            raise ValueError("link rate must be positive")
        radii = {n.elements.radius_km for n in nodes}
        if len(radii) > 1:
            raise ValueError("all satellites must share one orbital radius")

        self.planes = planes
        self.per_plane = per_plane
        self.nodes = tuple(nodes)
        self._rates: dict[tuple[int, int], float] = {}
        for u, v in self._grid_edges():
            self._rates[(u, v)] = link_rate
        for (u, v), rate in (link_rate_overrides or {}).items():
            key = (min(u, v), max(u, v))
            if key not in self._rates:
                raise ValueError(f"no ISL between satellites {u} and {v}")
            if rate <= 0:
                raise ValueError("link rate must be positive")
            self._rates[key] = rate
        self._neighbors: dict[int, tuple[int, ...]] = {
            u: tuple(sorted(v for v in self._adjacent(u))) for u in range(len(nodes))
        }
        self._check_connected()

    # -- topology -----------------------------------------------------------

    def _grid_edges(self) -> set[tuple[int, int]]:
        edges: set[tuple[int, int]] = set()
        for u in range(self.size):
            for v in self._adjacent(u):
                if u != v:
                    edges.add((min(u, v), max(u, v)))
        return edges

    def _adjacent(self, u: int) -> set[int]:
        plane, slot = self.grid_coord(u)
        cand = {
            plane * self.per_plane + (slot + 1) % self.per_plane,
            plane * self.per_plane + (slot - 1) % self.per_plane,
            ((plane + 1) % self.planes) * self.per_plane + slot,
            ((plane - 1) % self.planes) * self.per_plane + slot,
        }
        cand.discard(u)
        return cand

    def _check_connected(self) -> None:
        if self.size == 1:
            return
        seen = {0}
        frontier = deque([0])
        while frontier:
            u = frontier.popleft()
            for v in self._neighbors[u]:
                if v not in seen:
                    seen.add(v)
                    frontier.append(v)
        if len(seen) != self.size:
            raise ValueError("ISL grid is not connected")

    @property
    def size(self) -> int:
        return self.planes * self.per_plane

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self._neighbors[u]

    def isl_edges(self) -> set[tuple[int, int]]:
        return set(self._rates)

    def link_rate(self, u: int, v: int) -> float:
        key = (min(u, v), max(u, v))
        if key not in self._rates:
            raise KeyError(f"satellites {u} and {v} are not ISL neighbours")
        return self._rates[key]

    # -- geometry ------------------------------------------------------------

    def grid_coord(self, sat_id: int) -> tuple[int, int]:
        """Mesh coordinate (plane, slot) of a node id; inverse of
        ``id = plane * per_plane + slot``."""
        if not 0 <= sat_id < self.size:
            raise ValueError(f"satellite id {sat_id} out of range [0, {self.size})")
        return sat_id // self.per_plane, sat_id % self.per_plane

    def distance(self, u: int, v: int, t_ms: float) -> float:
        """Chord distance in km between satellites ``u`` and ``v`` at ``t_ms``."""
        if u == v:
            return 0.0
        radius = self.nodes[u].elements.radius_km
        return chord_distance_km(
            radius, position(self.nodes[u], t_ms), position(self.nodes[v], t_ms)
        )

    def path_metrics(self, src: int, dst: int, t_ms: float) -> PathMetrics:
        """Shortest-hop ISL path aggregates from ``src`` to ``dst``.

        Ties between equal-hop paths break toward the smallest lexicographic
        node sequence.  Distance is the sum of per-hop chords at ``t_ms``;
        the rate is the bottleneck (minimum) link rate.  ``src == dst``
        yields ``(0, inf, 0)``.
        """
        path = self.shortest_path(src, dst)
        if len(path) == 1:
            return PathMetrics(0.0, math.inf, 0)
        dist = 0.0
        rate = math.inf
        for a, b in zip(path, path[1:]):
            dist += self.distance(a, b, t_ms)
            rate = min(rate, self.link_rate(a, b))
        return PathMetrics(dist, rate, len(path) - 1)

    def shortest_path(self, src: int, dst: int) -> list[int]:
        """Minimum-hop node sequence, lexicographically smallest among ties."""
        self.grid_coord(src)
        self.grid_coord(dst)
        if src == dst:
            return [src]
        hops = {dst: 0}
        frontier = deque([dst])
        while frontier:
            u = frontier.popleft()
            for v in self._neighbors[u]:
                if v not in hops:
                    hops[v] = hops[u] + 1
                    frontier.append(v)
        path = [src]
        cur = src
        while cur != dst:
            cur = min(v for v in self._neighbors[cur] if hops[v] == hops[cur] - 1)
            path.append(cur)
        return path


def build_walker_star(
    planes: int,
    per_plane: int,
    altitude_km: float,
    inclination_deg: float,
    angular_velocity_deg_per_ms: float,
    capacities: tuple[float, ...],
    compute_speed: float,
    link_rate: float,
    link_rate_overrides: dict[tuple[int, int], float] | None = None,
) -> ConstellationGraph:
    """Build a homogeneous Walker-Star grid.

    Planes spread their ascending nodes over 180 degrees
    (``Omega = plane * 180 / planes``) and slots phase evenly within a plane
    (``gamma = slot * 360 / per_plane``).
    """
    nodes = []
    for plane in range(planes):
        for slot in range(per_plane):
            elements = OrbitalElements(
                radius_km=EARTH_RADIUS_KM + altitude_km,
                inclination_deg=inclination_deg,
                ascending_node_deg=plane * 180.0 / planes,
                angular_velocity_deg_per_ms=angular_velocity_deg_per_ms,
                initial_phase_deg=slot * 360.0 / per_plane,
            )
            nodes.append(
                SatelliteNode(
                    node_id=plane * per_plane + slot,
                    elements=elements,
                    capacities=tuple(capacities),
                    compute_speed=compute_speed,
                )
            )
    return ConstellationGraph(planes, per_plane, nodes, link_rate, link_rate_overrides)
