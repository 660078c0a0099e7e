"""Synthetic lattice networks and a ground-truth travel-time oracle.

The oracle has a known additive delay structure so the whole pipeline can be
checked without proprietary reference times.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import BadProbabilities, FormatError
from .features import COUNTED_TURNS, FeatureVector, TurnClass
from .netmodel import (
    COUNTED_CONTROLS,
    ControlKind,
    GeoPoint,
    RoadEdge,
    RoadNetwork,
    RoadNode,
    haversine_m,
)
from .seeding import derive_seed

GRID_SPACING_DEG = 0.002

DEFAULT_CONTROL_PROBS: dict[str, float] = {
    "Signal": 0.15,
    "Stop": 0.15,
    "Crossing": 0.10,
    "GiveWay": 0.03,
    "MiniRoundabout": 0.02,
}
DEFAULT_SPEED_SET: tuple[float, ...] = (30.0, 40.0, 50.0, 60.0)


def _default_control_delays() -> dict[str, float]:
    return {"Signal": 25.0, "Stop": 8.0, "Crossing": 3.0, "GiveWay": 4.0, "MiniRoundabout": 6.0}


def _default_turn_delays() -> dict[str, float]:
    return {"Left": 10.0, "SlightLeft": 4.0, "Right": 5.0, "SlightRight": 2.0, "UTurn": 20.0, "Straight": 0.0}


@dataclass(frozen=True)
class DelayModel:
    control_delays: dict[str, float] = field(default_factory=_default_control_delays)
    turn_delays: dict[str, float] = field(default_factory=_default_turn_delays)
    gamma: float = 0.10
    noise_sigma_s: float = 10.0

    def __post_init__(self):
        known_c = {k.value for k in COUNTED_CONTROLS}
        known_t = {t.value for t in TurnClass}
        if not set(self.control_delays) <= known_c:
            raise ValueError(f"unknown control kinds {sorted(set(self.control_delays) - known_c)}")
        if not set(self.turn_delays) <= known_t:
            raise ValueError(f"unknown turn classes {sorted(set(self.turn_delays) - known_t)}")
        values = list(self.control_delays.values()) + list(self.turn_delays.values())
        if any(v < 0 for v in values) or self.gamma < 0 or self.noise_sigma_s < 0:
            raise ValueError("delays, gamma and noise_sigma_s must be non-negative")

    def expected(self, fv: FeatureVector) -> float:
        """Noise-free travel time for a feature vector."""
        t = fv.naive_tt_s * (1.0 + self.gamma)
        for kind, count in zip(COUNTED_CONTROLS, fv.control_counts):
            t += count * self.control_delays.get(kind.value, 0.0)
        for turn, count in zip(COUNTED_TURNS, fv.turn_counts):
            t += count * self.turn_delays.get(turn.value, 0.0)
        return t

    @classmethod
    def load(cls, path: str | Path) -> "DelayModel":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
            return cls(**data)
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: bad delay model ({exc})") from None

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")


def grid_network(
    rows: int,
    cols: int,
    seed: int,
    control_probs: Mapping[str, float] | None = None,
    speed_set: Sequence[float] = DEFAULT_SPEED_SET,
) -> RoadNetwork:
    """A rows x cols lattice at 0.002 degree spacing anchored at (0, 0).

    Node ``r * cols + c`` sits at row r, column c. Each street segment gets one
    speed from ``speed_set`` shared by both directions. Edge ids run over
    horizontal segments then vertical ones, forward (increasing id) edge first.
    """
    if rows < 2 or cols < 2:
        raise ValueError("grid needs at least 2 rows and 2 columns")
    probs = dict(DEFAULT_CONTROL_PROBS if control_probs is None else control_probs)
    kinds = [k.value for k in COUNTED_CONTROLS]
    if not set(probs) <= set(kinds):
        raise BadProbabilities(f"unknown control kinds {sorted(set(probs) - set(kinds))}")
    p = np.array([float(probs.get(k, 0.0)) for k in kinds])
    if (p < 0).any() or p.sum() > 1.0 + 1e-12:
        raise BadProbabilities(f"control probabilities must be >= 0 and sum to <= 1, got {probs}")
    if not speed_set or any(s <= 0 for s in speed_set):
        raise ValueError("speed_set must hold positive speeds")

    rng = np.random.default_rng(seed)
    all_kinds = list(COUNTED_CONTROLS) + [ControlKind.NONE]
    all_p = np.append(p, max(0.0, 1.0 - p.sum()))
    all_p /= all_p.sum()
    draws = rng.choice(len(all_kinds), size=rows * cols, p=all_p)

    nodes = [
        RoadNode(
            r * cols + c,
            GeoPoint(r * GRID_SPACING_DEG, c * GRID_SPACING_DEG),
            all_kinds[draws[r * cols + c]],
        )
        for r in range(rows)
        for c in range(cols)
    ]
    segments = [(r * cols + c, r * cols + c + 1) for r in range(rows) for c in range(cols - 1)]
    segments += [(r * cols + c, (r + 1) * cols + c) for r in range(rows - 1) for c in range(cols)]
    speeds = rng.choice(np.asarray(speed_set, dtype=float), size=len(segments))

    edges = []
    for (u, v), kph in zip(segments, speeds):
        length = haversine_m(nodes[u].point, nodes[v].point)
        edges.append(RoadEdge(len(edges), u, v, length, float(kph)))
        edges.append(RoadEdge(len(edges), v, u, length, float(kph)))
    return RoadNetwork.from_parts(nodes, edges)


def synthetic_truth(fv: FeatureVector, model: DelayModel, seed: int, pair_id: int) -> float:
    """Reference travel time: the delay model plus N(0, sigma) noise, floored at 1 s."""
    t = model.expected(fv)
    if model.noise_sigma_s > 0:
        rng = np.random.default_rng(derive_seed(seed, pair_id))
        t += float(rng.normal(0.0, model.noise_sigma_s))
    return max(1.0, t)
