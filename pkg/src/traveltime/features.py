"""Route feature extraction: naive time, control counts, turn counts."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import astuple, dataclass, fields

from .netmodel import COUNTED_CONTROLS, RoadNetwork, bearing_deg
from .routing import Route


class TurnClass(enum.Enum):
    STRAIGHT = "Straight"
    SLIGHT_LEFT = "SlightLeft"
    LEFT = "Left"
    SLIGHT_RIGHT = "SlightRight"
    RIGHT = "Right"
    UTURN = "UTurn"


MIRROR = {
    TurnClass.STRAIGHT: TurnClass.STRAIGHT,
    TurnClass.UTURN: TurnClass.UTURN,
    TurnClass.LEFT: TurnClass.RIGHT,
    TurnClass.RIGHT: TurnClass.LEFT,
    TurnClass.SLIGHT_LEFT: TurnClass.SLIGHT_RIGHT,
    TurnClass.SLIGHT_RIGHT: TurnClass.SLIGHT_LEFT,
}

# Order matches the FeatureVector turn fields.
COUNTED_TURNS = (
    TurnClass.LEFT,
    TurnClass.SLIGHT_LEFT,
    TurnClass.RIGHT,
    TurnClass.SLIGHT_RIGHT,
    TurnClass.UTURN,
)


@dataclass(frozen=True)
class FeatureVector:
    naive_tt_s: float = 0.0
    n_signal: int = 0
    n_stop: int = 0
    n_crossing: int = 0
    n_give_way: int = 0
    n_mini_roundabout: int = 0
    n_left: int = 0
    n_slight_left: int = 0
    n_right: int = 0
    n_slight_right: int = 0
    n_uturn: int = 0

    def as_row(self) -> list[float]:
        return [float(v) for v in astuple(self)]

    @property
    def control_counts(self) -> tuple[int, ...]:
        return (self.n_signal, self.n_stop, self.n_crossing, self.n_give_way, self.n_mini_roundabout)

    @property
    def turn_counts(self) -> tuple[int, ...]:
        return (self.n_left, self.n_slight_left, self.n_right, self.n_slight_right, self.n_uturn)


FEATURE_NAMES: tuple[str, ...] = tuple(f.name for f in fields(FeatureVector))


def normalize_deflection(deg: float) -> float:
    """Wrap an angle into (-180, 180]."""
    d = deg % 360.0
    if d > 180.0:
        d -= 360.0
    return d


def classify_turn(deflection_deg: float) -> TurnClass:
    """Bin a signed deflection (positive = clockwise = right) into a turn class.

    Bins are half-open on the upper end, [0,45), [45,90), [90,135), with the
    U-turn bin closed at 180.
    """
    a = abs(deflection_deg)
    if a < 45.0:
        return TurnClass.STRAIGHT
    if a >= 135.0:
        return TurnClass.UTURN
    right = deflection_deg > 0
    if a < 90.0:
        return TurnClass.SLIGHT_RIGHT if right else TurnClass.SLIGHT_LEFT
    return TurnClass.RIGHT if right else TurnClass.LEFT


# Deflections are snapped to this resolution. Great-circle bearings put a
# right-angle street-grid turn a fraction of a micro-degree off 90, which
# would otherwise scatter identical turns across the 90-degree bin edge.
DEFLECTION_DECIMALS = 4


def route_deflections(net: RoadNetwork, route: Route) -> list[float]:
    """Signed heading change at every interior node, in (-180, 180]."""
    nodes = route.node_seq
    if len(nodes) < 3:
        return []
    pts = [net.point(n) for n in nodes]
    headings = [bearing_deg(a, b) for a, b in zip(pts, pts[1:])]
    return [
        normalize_deflection(round(h1 - h0, DEFLECTION_DECIMALS))
        for h0, h1 in zip(headings, headings[1:])
    ]


def count_controls(net: RoadNetwork, route: Route) -> tuple[int, int, int, int, int]:
    """Control counts at interior route nodes; origin and destination are excluded."""
    seen = Counter(net.nodes[n].control for n in route.node_seq[1:-1])
    return tuple(seen[k] for k in COUNTED_CONTROLS)  # type: ignore[return-value]


def feature_vector(net: RoadNetwork, route: Route) -> FeatureVector:
    controls = count_controls(net, route)
    turns = Counter(classify_turn(d) for d in route_deflections(net, route))
    return FeatureVector(route.naive_tt_s, *controls, *(turns[t] for t in COUNTED_TURNS))
