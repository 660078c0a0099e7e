"""OSM XML ingestion: parse nodes/ways and assemble a drivable RoadNetwork."""

from __future__ import annotations

import io
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Mapping, Sequence

from .errors import DanglingNodeRef, DuplicateId, EmptyNetwork, MalformedXml
from .netmodel import (
    DEFAULT_SPEEDS_KPH,
    ControlKind,
    GeoPoint,
    RoadEdge,
    RoadNetwork,
    RoadNode,
    fallback_speed_kph,
    haversine_m,
    largest_scc,
    parse_maxspeed,
)

DRIVABLE_CLASSES = frozenset(
    [
        "motorway",
        "trunk",
        "primary",
        "secondary",
        "tertiary",
        "unclassified",
        "residential",
        "living_street",
        "service",
    ]
)
DRIVABLE_HIGHWAYS = DRIVABLE_CLASSES | {c + "_link" for c in DRIVABLE_CLASSES}

NODE_CONTROL_TAGS = {
    "traffic_signals": ControlKind.SIGNAL,
    "stop": ControlKind.STOP,
    "crossing": ControlKind.CROSSING,
    "give_way": ControlKind.GIVE_WAY,
    "mini_roundabout": ControlKind.MINI_ROUNDABOUT,
}

ONEWAY_FORWARD = {"yes", "true", "1"}
ONEWAY_REVERSE = {"-1", "reverse"}


@dataclass
class RawNode:
    id: int
    lat: float
    lon: float
    tags: dict[str, str] = field(default_factory=dict)


@dataclass
class RawWay:
    id: int
    refs: list[int]
    tags: dict[str, str] = field(default_factory=dict)


def _int_attr(elem: ET.Element, name: str, where: str) -> int:
    try:
        return int(elem.attrib[name])
    except (KeyError, ValueError):
        raise MalformedXml(f"{where}: {elem.tag} has missing or non-integer '{name}'") from None


def _tags(elem: ET.Element) -> dict[str, str]:
    return {t.attrib["k"]: t.attrib.get("v", "") for t in elem.iter("tag") if "k" in t.attrib}


def parse_osm_xml(
    document: BinaryIO | bytes | str | Path, source: str = "<document>"
) -> tuple[list[RawNode], list[RawWay]]:
    """Parse the node/way subset of an OSM XML document.

    ``document`` may be a path, raw bytes, or a binary stream. Nodes lacking
    ``lat``/``lon`` are skipped; relations and unknown elements are ignored.
    """
    if isinstance(document, (str, Path)):
        source = str(document)
        stream: BinaryIO = open(document, "rb")
    elif isinstance(document, bytes):
        stream = io.BytesIO(document)
    else:
        stream = document

    nodes: list[RawNode] = []
    ways: list[RawWay] = []
    seen_nodes: set[int] = set()
    seen_ways: set[int] = set()
    try:
        context = ET.iterparse(stream, events=("start", "end"))
        root = None
        for event, elem in context:
            if root is None:
                root = elem
                if elem.tag != "osm":
                    raise MalformedXml(f"{source}: root element is <{elem.tag}>, expected <osm>")
                continue
            if event != "end":
                continue
            if elem.tag == "node":
                nid = _int_attr(elem, "id", source)
                if "lat" in elem.attrib and "lon" in elem.attrib:
                    if nid in seen_nodes:
                        raise DuplicateId(f"{source}: node id {nid} appears more than once")
                    seen_nodes.add(nid)
                    try:
                        lat, lon = float(elem.attrib["lat"]), float(elem.attrib["lon"])
                    except ValueError:
                        raise MalformedXml(f"{source}: node {nid} has non-numeric lat/lon") from None
                    nodes.append(RawNode(nid, lat, lon, _tags(elem)))
                elem.clear()
            elif elem.tag == "way":
                wid = _int_attr(elem, "id", source)
                if wid in seen_ways:
                    raise DuplicateId(f"{source}: way id {wid} appears more than once")
                seen_ways.add(wid)
                refs = [_int_attr(nd, "ref", f"{source} way {wid}") for nd in elem.iter("nd")]
                ways.append(RawWay(wid, refs, _tags(elem)))
                elem.clear()
        if root is None:
            raise MalformedXml(f"{source}: empty document")
    except ET.ParseError as exc:
        line, col = exc.position
        raise MalformedXml(f"{source}: line {line}, column {col}: {exc}") from None
    finally:
        if isinstance(document, (str, Path)):
            stream.close()
    return nodes, ways


def _direction(tags: Mapping[str, str]) -> tuple[bool, bool]:
    oneway = tags.get("oneway", "").strip().lower()
    if oneway in ONEWAY_FORWARD:
        return True, False
    if oneway in ONEWAY_REVERSE:
        return False, True
    return True, True


def build_network(
    nodes: Sequence[RawNode],
    ways: Sequence[RawWay],
    fallback_speeds: Mapping[str, float] = DEFAULT_SPEEDS_KPH,
    drivable: frozenset[str] = DRIVABLE_HIGHWAYS,
) -> RoadNetwork:
    """Assemble the drivable directed network and reduce it to its largest SCC.

    Edge ids follow document order of ways, then segment order within a way,
    forward edge before reverse edge.
    """
    raw_by_id = {n.id: n for n in nodes}
    road_nodes: dict[int, RoadNode] = {}
    edges: list[RoadEdge] = []

    def node_for(nid: int, way_id: int) -> RoadNode:
        if nid not in road_nodes:
            raw = raw_by_id.get(nid)
            if raw is None:
                raise DanglingNodeRef(f"way {way_id} references missing node {nid}")
            control = NODE_CONTROL_TAGS.get(raw.tags.get("highway", ""), ControlKind.NONE)
            road_nodes[nid] = RoadNode(nid, GeoPoint(raw.lat, raw.lon), control)
        return road_nodes[nid]

    for way in ways:
        highway = way.tags.get("highway")
        if highway not in drivable or len(way.refs) < 2:
            continue
        forward, backward = _direction(way.tags)
        speed = parse_maxspeed(way.tags.get("maxspeed"))
        if speed is None:
            speed = fallback_speed_kph(highway, fallback_speeds)
        for u, v in zip(way.refs, way.refs[1:]):
            a, b = node_for(u, way.id), node_for(v, way.id)
            if u == v:
                continue
            length = haversine_m(a.point, b.point)
            if length <= 0:
                continue  # distinct ids at identical coordinates carry no geometry
            if forward:
                edges.append(RoadEdge(len(edges), u, v, length, speed))
            if backward:
                edges.append(RoadEdge(len(edges), v, u, length, speed))

    if not road_nodes:
        raise EmptyNetwork("no drivable ways in input")
    net = RoadNetwork.from_parts(road_nodes.values(), edges)
    return largest_scc(net)
