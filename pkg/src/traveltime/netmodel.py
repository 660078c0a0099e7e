"""Road-network data model: geodesy, speed resolution, edge times, SCC reduction."""

from __future__ import annotations

import csv
import enum
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import CoincidentPoints, EmptyNetwork, FormatError, NonPositiveInput

EARTH_RADIUS_M = 6_371_000.0
MPH_TO_KPH = 1.609344

DEFAULT_SPEEDS_KPH: dict[str, float] = {
    "motorway": 100.0,
    "trunk": 90.0,
    "primary": 65.0,
    "secondary": 55.0,
    "tertiary": 50.0,
    "unclassified": 40.0,
    "residential": 30.0,
    "living_street": 10.0,
    "service": 20.0,
}
UNKNOWN_CLASS_KPH = 40.0


class ControlKind(enum.Enum):
    SIGNAL = "Signal"
    STOP = "Stop"
    CROSSING = "Crossing"
    GIVE_WAY = "GiveWay"
    MINI_ROUNDABOUT = "MiniRoundabout"
    NONE = "None"


# Order used by feature vectors and delay tables.
COUNTED_CONTROLS = (
    ControlKind.SIGNAL,
    ControlKind.STOP,
    ControlKind.CROSSING,
    ControlKind.GIVE_WAY,
    ControlKind.MINI_ROUNDABOUT,
)


@dataclass(frozen=True)
class GeoPoint:
    lat_deg: float
    lon_deg: float

    def __post_init__(self):
        lat, lon = float(self.lat_deg), float(self.lon_deg)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValueError(f"non-finite coordinate ({lat}, {lon})")
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise ValueError(f"longitude {lon} outside [-180, 180)")
        if lon == 180.0:
            lon = -180.0  # same meridian; keeps the half-open range
        object.__setattr__(self, "lat_deg", lat)
        object.__setattr__(self, "lon_deg", lon)


@dataclass(frozen=True)
class RoadNode:
    id: int
    point: GeoPoint
    control: ControlKind = ControlKind.NONE


def edge_traversal_time_s(length_m: float, speed_kph: float) -> float:
    """Seconds needed to drive ``length_m`` at a constant ``speed_kph``."""
    if not length_m > 0 or not speed_kph > 0:
        raise NonPositiveInput(
            f"length_m={length_m!r} and speed_kph={speed_kph!r} must both be > 0"
        )
    return length_m / (speed_kph / 3.6)


@dataclass(frozen=True)
class RoadEdge:
    edge_id: int
    from_node: int
    to_node: int
    length_m: float
    speed_kph: float
    self_loop: bool = False
    traversal_s: float = field(init=False)

    def __post_init__(self):
        if self.from_node == self.to_node and not self.self_loop:
            raise ValueError(
                f"edge {self.edge_id}: from_node == to_node without self_loop flag"
            )
        object.__setattr__(
            self, "traversal_s", edge_traversal_time_s(self.length_m, self.speed_kph)
        )


@dataclass(frozen=True)
class RoadNetwork:
    """Directed multigraph of road nodes and speed-attributed edges.

    Build it with :meth:`from_parts`; the adjacency is derived, never supplied.
    Treat instances as immutable.
    """

    nodes: Mapping[int, RoadNode]
    edges: Mapping[int, RoadEdge]
    out_edges: Mapping[int, tuple[int, ...]]

    @classmethod
    def from_parts(cls, nodes: Iterable[RoadNode], edges: Iterable[RoadEdge]) -> "RoadNetwork":
        node_map: dict[int, RoadNode] = {}
        for n in nodes:
            if n.id in node_map:
                raise ValueError(f"duplicate node id {n.id}")
            node_map[n.id] = n
        edge_map: dict[int, RoadEdge] = {}
        adj: dict[int, list[int]] = {nid: [] for nid in node_map}
        for e in edges:
            if e.edge_id in edge_map:
                raise ValueError(f"duplicate edge id {e.edge_id}")
            for end in (e.from_node, e.to_node):
                if end not in node_map:
                    raise ValueError(f"edge {e.edge_id} references unknown node {end}")
            edge_map[e.edge_id] = e
            adj[e.from_node].append(e.edge_id)
        return cls(node_map, edge_map, {k: tuple(v) for k, v in adj.items()})

    def __len__(self) -> int:
        return len(self.nodes)

    def point(self, node_id: int) -> GeoPoint:
        return self.nodes[node_id].point

    def successors(self, node_id: int) -> Iterable[RoadEdge]:
        for eid in self.out_edges[node_id]:
            yield self.edges[eid]

    def street_degree(self) -> dict[int, int]:
        """Number of distinct undirected neighbours per node, ignoring self-loops."""
        nbrs: dict[int, set[int]] = {nid: set() for nid in self.nodes}
        for e in self.edges.values():
            if e.from_node != e.to_node:
                nbrs[e.from_node].add(e.to_node)
                nbrs[e.to_node].add(e.from_node)
        return {nid: len(s) for nid, s in nbrs.items()}

    def subnetwork(self, keep: Iterable[int]) -> "RoadNetwork":
        keep = set(keep)
        nodes = [self.nodes[n] for n in sorted(keep)]
        edges = [
            e
            for _, e in sorted(self.edges.items())
            if e.from_node in keep and e.to_node in keep
        ]
        return RoadNetwork.from_parts(nodes, edges)


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on a sphere of radius 6,371 km."""
    phi1 = math.radians(a.lat_deg)
    phi2 = math.radians(b.lat_deg)
    dphi = phi2 - phi1
    dlmb = math.radians(b.lon_deg - a.lon_deg)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    h = min(1.0, max(0.0, h))
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(h))


def bearing_deg(a: GeoPoint, b: GeoPoint) -> float:
    """Initial compass bearing from ``a`` towards ``b`` in [0, 360), clockwise from north."""
    if a == b:
        raise CoincidentPoints(f"bearing undefined between identical points {a}")
    phi1 = math.radians(a.lat_deg)
    phi2 = math.radians(b.lat_deg)
    dlmb = math.radians(b.lon_deg - a.lon_deg)
    y = math.sin(dlmb) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlmb)
    deg = math.degrees(math.atan2(y, x)) % 360.0
    # -0.0 and values a hair under 360 both collapse here
    return 0.0 if deg == 360.0 or deg == 0.0 else deg


_MAXSPEED_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(mph)?\s*$", re.IGNORECASE)


def parse_maxspeed(raw: str | None) -> float | None:
    """Parse an OSM ``maxspeed`` value to km/h.

    Returns None when the text is not a plain number or a number followed by
    ``mph``; callers fall back to the highway-class default.
    """
    if raw is None:
        return None
    m = _MAXSPEED_RE.match(raw)
    if m is None:
        return None
    value = float(m.group(1))
    if value <= 0:
        return None
    return value * MPH_TO_KPH if m.group(2) else value


def fallback_speed_kph(highway: str | None, table: Mapping[str, float] = DEFAULT_SPEEDS_KPH) -> float:
    if highway is None:
        return UNKNOWN_CLASS_KPH
    if highway in table:
        return table[highway]
    if highway.endswith("_link") and highway[: -len("_link")] in table:
        return table[highway[: -len("_link")]]
    return UNKNOWN_CLASS_KPH


def load_speed_table(path: str | Path) -> dict[str, float]:
    """Read a ``highway_class,kph`` CSV into a fallback table."""
    table: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"highway_class", "kph"} <= set(reader.fieldnames):
            raise FormatError(f"{path}: expected header 'highway_class,kph'")
        for lineno, row in enumerate(reader, start=2):
            try:
                kph = float(row["kph"])
            except (TypeError, ValueError):
                raise FormatError(f"{path}:{lineno}: bad kph {row['kph']!r}") from None
            if not kph > 0:
                raise FormatError(f"{path}:{lineno}: kph must be > 0")
            table[row["highway_class"].strip()] = kph
    return table


def strongly_connected_components(net: RoadNetwork) -> list[list[int]]:
    """Tarjan's algorithm, iterative so long chains don't hit the recursion limit."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0

    succ = {
        nid: sorted({net.edges[e].to_node for e in eids})
        for nid, eids in net.out_edges.items()
    }

    for root in sorted(net.nodes):
        if root in index:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(succ[root]))]
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ[w])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return comps


def largest_scc(net: RoadNetwork) -> RoadNetwork:
    """Induced sub-network on the largest strongly connected component.

    Ties go to the component with more nodes, then more internal edges, then
    the smallest minimum node id. Node and edge ids are preserved.
    """
    if len(net.nodes) == 0:
        raise EmptyNetwork("cannot reduce an empty network")
    comps = strongly_connected_components(net)
    owner = {n: i for i, comp in enumerate(comps) for n in comp}
    internal = [0] * len(comps)
    for e in net.edges.values():
        c = owner[e.from_node]
        if owner[e.to_node] == c:
            internal[c] += 1
    best = min(
        range(len(comps)),
        key=lambda i: (-len(comps[i]), -internal[i], comps[i][0]),
    )
    if len(comps[best]) == len(net.nodes):
        return net
    return net.subnetwork(comps[best])
