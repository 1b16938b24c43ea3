"""WAN topology ingestion: GraphML (Topology Zoo style) and edge CSV readers,
great-circle delay matrix and degree-proportional flow profile."""

from __future__ import annotations

import csv
import io
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import EmptyTopology, MalformedInput, MissingCoordinates

EARTH_RADIUS_KM = 6371.0
FORMATS = ("graphml", "edge_csv")
DISTANCE_MODES = ("geodesic", "hops")


@dataclass(frozen=True)
class Node:
    node_id: int
    label: str
    latitude: float | None
    longitude: float | None

    @property
    def has_coordinates(self) -> bool:
        return self.latitude is not None and self.longitude is not None


@dataclass(frozen=True)
class Topology:
    nodes: tuple[Node, ...]
    links: tuple[tuple[int, int], ...]
    name: str = ""

    def __post_init__(self):
        n = len(self.nodes)
        for k, node in enumerate(self.nodes):
            if node.node_id != k:
                raise MalformedInput(f"node ids must be contiguous 0..N-1, got {node.node_id} at {k}")
        for a, b in self.links:
            if not (0 <= a < n and 0 <= b < n):
                raise MalformedInput(f"link ({a}, {b}) references a missing node")
            if a == b:
                raise MalformedInput(f"self-loop on node {a}")

    @property
    def n(self) -> int:
        return len(self.nodes)

    @classmethod
    def from_edges(cls, labels: Iterable[str], edges: Iterable[tuple[str, str]],
                   coords: dict[str, tuple[float, float]] | None = None, name: str = "") -> "Topology":
        """Build a normalized topology from string labels.

        Node order follows ``labels`` (then first appearance in ``edges``);
        self-loops are dropped, duplicate links in either direction collapse and
        links are stored sorted as (low, high) pairs.
        """
        coords = coords or {}
        index: dict[str, int] = {}
        for lab in labels:
            index.setdefault(lab, len(index))
        edges = list(edges)
        for a, b in edges:
            index.setdefault(a, len(index))
            index.setdefault(b, len(index))
        if not index:
            raise EmptyTopology("topology has no nodes")
        nodes = []
        for lab, k in index.items():
            lat, lon = coords.get(lab, (None, None))
            nodes.append(Node(k, lab, lat, lon))
        seen = set()
        links = []
        for a, b in edges:
            i, j = index[a], index[b]
            if i == j:
                continue
            key = (min(i, j), max(i, j))
            if key not in seen:
                seen.add(key)
                links.append(key)
        return cls(tuple(nodes), tuple(sorted(links)), name)


def _as_bytes(source) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if isinstance(source, (str, Path)):
        try:
            return Path(source).read_bytes()
        except OSError as exc:
            raise MalformedInput(f"cannot read {source}: {exc}") from exc
    return source.read()


def _float_or_none(value) -> float | None:
    if value is None or value == "":
        return None
    try:
        out = float(value)
    except (TypeError, ValueError) as exc:
        raise MalformedInput(f"bad coordinate value {value!r}") from exc
    if not math.isfinite(out):
        raise MalformedInput(f"non-finite coordinate {value!r}")
    return out


def _parse_graphml(data: bytes, name: str) -> Topology:
    try:
        g = nx.read_graphml(io.BytesIO(data), node_type=str)
    except (ET.ParseError, nx.NetworkXError, KeyError, ValueError) as exc:
        raise MalformedInput(f"unparseable GraphML: {exc}") from exc
    coords = {}
    labels = []
    for node, attrs in g.nodes(data=True):
        lowered = {str(k).lower(): v for k, v in attrs.items()}
        labels.append(node)
        lat = _float_or_none(lowered.get("latitude"))
        lon = _float_or_none(lowered.get("longitude"))
        if lat is not None and lon is not None:
            coords[node] = (lat, lon)
    topo = Topology.from_edges(labels, ((a, b) for a, b, *_ in g.edges), coords,
                               name or str(g.graph.get("name", "")))
    # keep the human-readable label when the file carries one
    nodes = []
    for node in topo.nodes:
        attrs = {str(k).lower(): v for k, v in g.nodes[node.label].items()}
        label = str(attrs.get("label", node.label))
        nodes.append(Node(node.node_id, label, node.latitude, node.longitude))
    return Topology(tuple(nodes), topo.links, topo.name)


def _parse_edge_csv(data: bytes, name: str) -> Topology:
    try:
        text = data.decode("utf-8")
        reader = csv.DictReader(io.StringIO(text))
        fields = [f.strip() for f in (reader.fieldnames or [])]
    except (UnicodeDecodeError, csv.Error) as exc:
        raise MalformedInput(f"unparseable edge CSV: {exc}") from exc
    if fields[:2] != ["src", "dst"]:
        raise MalformedInput("edge CSV header must start with src,dst")
    with_coords = set(fields) >= {"lat_src", "lon_src", "lat_dst", "lon_dst"}
    edges = []
    coords: dict[str, tuple[float, float]] = {}
    try:
        for row in reader:
            row = {k.strip(): (v or "").strip() for k, v in row.items() if k is not None}
            a, b = row["src"], row["dst"]
            if not a or not b:
                raise MalformedInput(f"empty endpoint in row {row}")
            edges.append((a, b))
            if with_coords:
                for lab, la, lo in ((a, "lat_src", "lon_src"), (b, "lat_dst", "lon_dst")):
                    lat, lon = _float_or_none(row.get(la)), _float_or_none(row.get(lo))
                    if lat is not None and lon is not None:
                        coords.setdefault(lab, (lat, lon))
    except csv.Error as exc:
        raise MalformedInput(f"unparseable edge CSV: {exc}") from exc
    return Topology.from_edges([], edges, coords, name)


def parse_topology(source: bytes | str | Path | BinaryIO, format: str = "graphml",
                   require_coordinates: bool = True, name: str = "") -> Topology:
    """Parse a topology from bytes, a path or a binary stream.

    ``require_coordinates=False`` accepts coordinate-free files; such topologies
    only support the ``hops`` distance mode.
    """
    if format not in FORMATS:
        raise MalformedInput(f"unknown topology format {format!r}")
    data = _as_bytes(source)
    if not name and isinstance(source, (str, Path)):
        name = Path(source).stem
    if format == "graphml":
        topo = _parse_graphml(data, name)
    else:
        topo = _parse_edge_csv(data, name)
    if topo.n == 0:
        raise EmptyTopology("topology has no nodes")
    if require_coordinates:
        missing = [n.label for n in topo.nodes if not n.has_coordinates]
        if missing:
            raise MissingCoordinates(f"nodes without latitude/longitude: {missing[:5]}")
    return topo


def load_topology(path: str | Path, format: str | None = None, **kwargs) -> Topology:
    path = Path(path)
    if format is None:
        format = "edge_csv" if path.suffix.lower() == ".csv" else "graphml"
    return parse_topology(path, format, **kwargs)


def to_graphml(t: Topology) -> bytes:
    g = nx.Graph(name=t.name)
    for node in t.nodes:
        attrs = {"label": node.label}
        if node.has_coordinates:
            attrs["Latitude"] = node.latitude
            attrs["Longitude"] = node.longitude
        g.add_node(str(node.node_id), **attrs)
    g.add_edges_from((str(a), str(b)) for a, b in t.links)
    buf = io.BytesIO()
    nx.write_graphml(g, buf)
    return buf.getvalue()


def _edge_csv_order(t: Topology) -> list[tuple[int, int]]:
    """Edge rows ordered so that nodes first appear in id order whenever some order allows it.

    Parsing numbers nodes by first appearance, so with this order a topology that came from an
    edge CSV is written back with the same ids.
    """
    adj: dict[int, list[int]] = {}
    for a, b in t.links:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    seen: set[int] = set()
    rows: list[tuple[int, int]] = []
    for k in sorted(adj):
        if k in seen:
            continue
        old = [j for j in adj[k] if j in seen]
        pair = (min(old), k) if old else (k, min(adj[k]))
        rows.append(pair)
        seen.update(pair)
    emitted = {tuple(sorted(r)) for r in rows}
    return rows + [l for l in t.links if l not in emitted]


def to_edge_csv(t: Topology) -> str:
    """Isolated nodes cannot be represented in this format and are lost."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["src", "dst", "lat_src", "lon_src", "lat_dst", "lon_dst"])
    for a, b in _edge_csv_order(t):
        na, nb = t.nodes[a], t.nodes[b]
        w.writerow([na.label, nb.label, repr(na.latitude) if na.has_coordinates else "",
                    repr(na.longitude) if na.has_coordinates else "",
                    repr(nb.latitude) if nb.has_coordinates else "",
                    repr(nb.longitude) if nb.has_coordinates else ""])
    return buf.getvalue()


def haversine_km(lat1, lon1, lat2, lon2):
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(lon2) - np.radians(lon1)
    h = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def distance_matrix(t: Topology, mode: str = "geodesic") -> np.ndarray:
    """Pairwise switch-controller delay proxy.

    ``geodesic``: great-circle km between node coordinates. ``hops``: shortest
    path hop count along links (requires a connected topology).
    """
    n = t.n
    if mode == "geodesic":
        missing = [node.label for node in t.nodes if not node.has_coordinates]
        if missing:
            raise MissingCoordinates(f"nodes without latitude/longitude: {missing[:5]}")
        lat = np.array([node.latitude for node in t.nodes], dtype=np.float64)
        lon = np.array([node.longitude for node in t.nodes], dtype=np.float64)
        iu, ju = np.triu_indices(n, k=1)
        d = np.zeros((n, n))
        d[iu, ju] = haversine_km(lat[iu], lon[iu], lat[ju], lon[ju])
        d[ju, iu] = d[iu, ju]
        return d
    if mode == "hops":
        if not t.links:
            if n == 1:
                return np.zeros((1, 1))
            raise MalformedInput("hop distances undefined for a topology without links")
        a = np.array([l[0] for l in t.links])
        b = np.array([l[1] for l in t.links])
        adj = csr_matrix((np.ones(len(a)), (a, b)), shape=(n, n))
        d = shortest_path(adj, directed=False, unweighted=True)
        if not np.all(np.isfinite(d)):
            raise MalformedInput("hop distances undefined for a disconnected topology")
        return np.triu(d, 1) + np.triu(d, 1).T
    raise ValueError(f"unknown distance mode {mode!r}")


def estimate_flows(t: Topology) -> np.ndarray:
    r = np.zeros(t.n, dtype=np.int64)
    for a, b in t.links:
        r[a] += 1
        r[b] += 1
    return r


def bundled(name: str) -> Path:
    """Path of a topology shipped in the package data directory."""
    path = Path(__file__).parent / "data" / f"{name}.graphml"
    if not path.exists():
        raise MalformedInput(f"no bundled topology named {name!r}")
    return path
