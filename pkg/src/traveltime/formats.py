"""Readers and writers for the pipeline's on-disk formats.

All CSVs are comma-separated UTF-8 with a header row and LF line endings.
Errors name the offending file and line.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import FormatError
from .features import FEATURE_NAMES, FeatureVector
from .netmodel import ControlKind, GeoPoint, RoadEdge, RoadNetwork, RoadNode
from .routing import ODPair, Route

NETWORK_FORMAT_VERSION = 1

OD_HEADER = ("pair_id", "origin", "destination")
FEATURE_HEADER = ("pair_id",) + FEATURE_NAMES
REFERENCE_HEADER = ("pair_id", "actual_s")
PREDICTION_HEADER = ("pair_id", "predicted_s")


def _ensure_parent(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(_ensure_parent(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def read_csv(path: str | Path, header: Sequence[str]) -> Iterator[tuple[int, dict[str, str]]]:
    """Yield (line number, row) pairs after checking the header holds ``header``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FormatError(f"{path}: empty file, expected header {','.join(header)}")
        missing = [h for h in header if h not in reader.fieldnames]
        if missing:
            raise FormatError(f"{path}: header lacks {missing}; expected {','.join(header)}")
        for row in reader:
            yield reader.line_num, row


def _num(path, line, row, key, kind=float):
    try:
        return kind(row[key])
    except (TypeError, ValueError):
        raise FormatError(f"{path}:{line}: bad {key} value {row[key]!r}") from None


def _unique_ids(path, records):
    seen = set()
    for line, pid in records:
        if pid in seen:
            raise FormatError(f"{path}:{line}: duplicate pair_id {pid}")
        seen.add(pid)


# network cache -------------------------------------------------------------

def network_to_dict(net: RoadNetwork) -> dict:
    return {
        "format_version": NETWORK_FORMAT_VERSION,
        "nodes": [
            {"id": n.id, "lat": n.point.lat_deg, "lon": n.point.lon_deg, "control": n.control.value}
            for _, n in sorted(net.nodes.items())
        ],
        "edges": [
            {
                "id": e.edge_id,
                "from": e.from_node,
                "to": e.to_node,
                "length_m": e.length_m,
                "speed_kph": e.speed_kph,
                "self_loop": e.self_loop,
            }
            for _, e in sorted(net.edges.items())
        ],
        "adjacency": {str(k): list(v) for k, v in sorted(net.out_edges.items())},
    }


def network_from_dict(d: dict, source: str = "<network>") -> RoadNetwork:
    if d.get("format_version") != NETWORK_FORMAT_VERSION:
        raise FormatError(f"{source}: unsupported network format_version {d.get('format_version')!r}")
    try:
        nodes = [
            RoadNode(int(n["id"]), GeoPoint(n["lat"], n["lon"]), ControlKind(n["control"]))
            for n in d["nodes"]
        ]
        edges = [
            RoadEdge(int(e["id"]), int(e["from"]), int(e["to"]), float(e["length_m"]),
                     float(e["speed_kph"]), bool(e.get("self_loop", False)))
            for e in d["edges"]
        ]
        net = RoadNetwork.from_parts(nodes, edges)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{source}: malformed network ({exc})") from None
    if "adjacency" in d:
        stored = {int(k): sorted(v) for k, v in d["adjacency"].items()}
        derived = {k: sorted(v) for k, v in net.out_edges.items()}
        if stored != derived:
            raise FormatError(f"{source}: adjacency does not match the edge list")
    return net


def save_network(net: RoadNetwork, path: str | Path) -> None:
    _ensure_parent(path).write_text(json.dumps(network_to_dict(net)) + "\n", encoding="utf-8")


def load_network(path: str | Path) -> RoadNetwork:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None
    return network_from_dict(d, str(path))


# OD pairs ------------------------------------------------------------------

def write_od(path: str | Path, pairs: Iterable[ODPair]) -> None:
    write_csv(path, OD_HEADER, ((p.pair_id, p.origin, p.destination) for p in pairs))


def read_od(path: str | Path) -> list[ODPair]:
    out = []
    lines = []
    for line, row in read_csv(path, OD_HEADER):
        p = ODPair(*(_num(path, line, row, k, int) for k in OD_HEADER))
        if p.origin == p.destination:
            raise FormatError(f"{path}:{line}: origin equals destination")
        out.append(p)
        lines.append((line, p.pair_id))
    _unique_ids(path, lines)
    return out


def read_whitelist(path: str | Path) -> list[tuple[int, int]]:
    return [
        (_num(path, line, row, "origin", int), _num(path, line, row, "destination", int))
        for line, row in read_csv(path, ("origin", "destination"))
    ]


# routes --------------------------------------------------------------------

def write_routes(path: str | Path, pair_ids: Sequence[int], routes: Sequence[Route]) -> None:
    with open(_ensure_parent(path), "w", encoding="utf-8", newline="\n") as fh:
        for pid, r in zip(pair_ids, routes):
            rec = {
                "pair_id": pid,
                "node_seq": list(r.node_seq),
                "edge_seq": list(r.edge_seq),
                "naive_tt_s": r.naive_tt_s,
                "length_m": r.length_m,
            }
            fh.write(json.dumps(rec) + "\n")


def read_routes(path: str | Path) -> list[tuple[int, Route]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                rec = json.loads(text)
                route = Route(
                    tuple(int(n) for n in rec["node_seq"]),
                    tuple(int(e) for e in rec.get("edge_seq", ())),
                    float(rec["naive_tt_s"]),
                    float(rec["length_m"]),
                )
                out.append((int(rec["pair_id"]), route))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{line}: bad route record ({exc})") from None
    return out


# features ------------------------------------------------------------------

def write_features(path: str | Path, pair_ids: Sequence[int], vectors: Sequence[FeatureVector]) -> None:
    write_csv(path, FEATURE_HEADER, ([pid, *astuple_fv(fv)] for pid, fv in zip(pair_ids, vectors)))


def astuple_fv(fv: FeatureVector) -> list:
    return [getattr(fv, name) for name in FEATURE_NAMES]


def read_features(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Return (pair_ids, X) with X holding the 11 predictors in canonical order."""
    ids, rows, lines = [], [], []
    for line, row in read_csv(path, FEATURE_HEADER):
        pid = _num(path, line, row, "pair_id", int)
        vals = [_num(path, line, row, k) for k in FEATURE_NAMES]
        if not all(np.isfinite(vals)) or any(v < 0 for v in vals):
            raise FormatError(f"{path}:{line}: features must be finite and non-negative")
        ids.append(pid)
        rows.append(vals)
        lines.append((line, pid))
    _unique_ids(path, lines)
    return np.asarray(ids, dtype=np.int64), np.asarray(rows, dtype=np.float64).reshape(-1, len(FEATURE_NAMES))


def feature_vectors_from_matrix(X: np.ndarray) -> list[FeatureVector]:
    return [FeatureVector(float(r[0]), *(int(v) for v in r[1:])) for r in X]


# reference / predictions ---------------------------------------------------

def write_pairs(path: str | Path, header: Sequence[str], pair_ids: Sequence[int], values: Sequence[float]) -> None:
    write_csv(path, header, ([int(pid), float(v)] for pid, v in zip(pair_ids, values)))


def _read_values(path, header) -> dict[int, float]:
    out: dict[int, float] = {}
    for line, row in read_csv(path, header):
        pid = _num(path, line, row, "pair_id", int)
        if pid in out:
            raise FormatError(f"{path}:{line}: duplicate pair_id {pid}")
        out[pid] = _num(path, line, row, header[1])
    return out


def read_reference(path: str | Path) -> dict[int, float]:
    ref = _read_values(path, REFERENCE_HEADER)
    for pid, v in ref.items():
        if not v > 0:
            raise FormatError(f"{path}: pair_id {pid} has non-positive actual_s {v!r}")
    return ref


def read_predictions(path: str | Path) -> dict[int, float]:
    return _read_values(path, PREDICTION_HEADER)


def align(pair_ids: Sequence[int], values: dict[int, float], source: str) -> np.ndarray:
    """Look up ``values`` for every pair id, failing on the first missing one."""
    out = np.empty(len(pair_ids))
    for i, pid in enumerate(pair_ids):
        try:
            out[i] = values[int(pid)]
        except KeyError:
            raise FormatError(f"{source}: no record for pair_id {int(pid)}") from None
    return out
