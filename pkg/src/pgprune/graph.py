"""Pose-graph data model: vertices, relative-pose edges, odometry chains.

The odometry edges of a graph form simple paths (one per mapping session):
no vertex has more than one incoming or outgoing odometry edge, and the
chain is acyclic. Loop-closure edges connect arbitrary vertex pairs. Every
edge carries a 3x3 positive-definite information matrix and a synthetic
provenance tag used by the evaluation harness to track measurements that
descend from a corrupted loop closure.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ._linalg import inv3, is_pd3, sym3
from .geometry import Pose2


class GraphError(ValueError):
    """Structural violation of the pose-graph invariants."""


class EdgeKind(enum.Enum):
    ODOMETRY = "odometry"
    LOOP_CLOSURE = "loop_closure"


class Provenance(enum.Enum):
    GENUINE = "genuine"
    CORRUPTED = "corrupted"


SYMMETRY_RTOL = 1e-12


def validate_information(info: np.ndarray, context: str = "") -> np.ndarray:
    """Check symmetry and positive definiteness; return a symmetrized copy."""
    info = np.asarray(info, dtype=float)
    if info.shape != (3, 3):
        raise GraphError(f"information matrix must be 3x3{context}")
    if not np.all(np.isfinite(info)):
        raise GraphError(f"information matrix has non-finite entries{context}")
    scale = max(np.abs(info).max(), 1.0)
    if np.abs(info - info.T).max() > SYMMETRY_RTOL * scale:
        raise GraphError(f"information matrix not symmetric{context}")
    info = sym3(info)
    if not is_pd3(info):
        raise GraphError(f"information matrix not positive definite{context}")
    return info


@dataclass(eq=False)
class Vertex:
    id: int
    pose: Pose2
    seq: int
    prunable: bool = True


@dataclass(eq=False)
class Edge:
    """Relative-pose constraint: pose of ``to`` expressed in ``from``'s frame."""

    from_id: int
    to_id: int
    measurement: Pose2
    info: np.ndarray
    kind: EdgeKind = EdgeKind.LOOP_CLOSURE
    provenance: Provenance = Provenance.GENUINE
    eid: int = -1  # assigned by the owning graph on insertion

    def covariance(self) -> np.ndarray:
        return inv3(self.info)

    def other(self, vertex_id: int) -> int:
        if vertex_id == self.from_id:
            return self.to_id
        if vertex_id == self.to_id:
            return self.from_id
        raise GraphError(f"vertex {vertex_id} not on edge ({self.from_id},{self.to_id})")

    def copy(self) -> "Edge":
        return Edge(
            from_id=self.from_id,
            to_id=self.to_id,
            measurement=self.measurement,
            info=self.info.copy(),
            kind=self.kind,
            provenance=self.provenance,
            eid=self.eid,
        )


@dataclass
class PoseGraph:
    """Mutable pose graph with an odometry-chain index.

    Single-writer: mutation invalidates concurrent traversals. Edge ids are
    assigned in insertion order, which makes every pruning pass replayable.
    """

    vertices: dict[int, Vertex] = field(default_factory=dict)
    edges: dict[int, Edge] = field(default_factory=dict)
    gauge_id: int | None = None

    def __post_init__(self):
        self._adj: dict[int, set[int]] = {v: set() for v in self.vertices}
        self._odo_in: dict[int, int] = {}
        self._odo_out: dict[int, int] = {}
        self._next_seq = max((v.seq for v in self.vertices.values()), default=-1) + 1
        self._next_eid = max(self.edges, default=-1) + 1
        for eid, e in self.edges.items():
            self._index_edge(eid, e)

    # -- construction ------------------------------------------------------

    def add_vertex(self, vid: int, pose: Pose2, prunable: bool = True) -> Vertex:
        if vid in self.vertices:
            raise GraphError(f"duplicate vertex id {vid}")
        v = Vertex(vid, pose, seq=self._next_seq, prunable=prunable)
        self._next_seq += 1
        self.vertices[vid] = v
        self._adj[vid] = set()
        return v

    def add_edge(self, edge: Edge, validate: bool = True) -> int:
        """Insert an edge. ``validate=False`` skips the information-matrix and
        odometry-cycle checks for edges constructed by already-validated
        internal operations; the odometry no-branching invariant is always
        enforced."""
        if edge.from_id == edge.to_id:
            raise GraphError(f"self-edge at vertex {edge.from_id}")
        for vid in (edge.from_id, edge.to_id):
            if vid not in self.vertices:
                raise GraphError(f"edge references unknown vertex {vid}")
        if edge.kind is EdgeKind.ODOMETRY:
            if edge.from_id in self._odo_out:
                raise GraphError(f"vertex {edge.from_id} already has an outgoing odometry edge")
            if edge.to_id in self._odo_in:
                raise GraphError(f"vertex {edge.to_id} already has an incoming odometry edge")
            if validate:
                self._check_odometry_cycle(edge)
        if validate:
            edge.info = validate_information(edge.info)
        eid = self._next_eid
        self._next_eid += 1
        edge.eid = eid
        self.edges[eid] = edge
        self._index_edge(eid, edge)
        return eid

    def _check_odometry_cycle(self, edge: Edge) -> None:
        # walking forward from to_id must not reach from_id, else a cycle forms
        cur = edge.to_id
        while cur is not None:
            if cur == edge.from_id:
                raise GraphError("odometry edge would close a cycle")
            nxt = self._odo_out.get(cur)
            cur = self.edges[nxt].to_id if nxt is not None else None

    def _index_edge(self, eid: int, edge: Edge) -> None:
        self._adj[edge.from_id].add(eid)
        self._adj[edge.to_id].add(eid)
        if edge.kind is EdgeKind.ODOMETRY:
            self._odo_out[edge.from_id] = eid
            self._odo_in[edge.to_id] = eid

    # -- removal -----------------------------------------------------------

    def remove_edge(self, eid: int) -> Edge:
        edge = self.edges.pop(eid)
        self._adj[edge.from_id].discard(eid)
        self._adj[edge.to_id].discard(eid)
        if edge.kind is EdgeKind.ODOMETRY:
            if self._odo_out.get(edge.from_id) == eid:
                del self._odo_out[edge.from_id]
            if self._odo_in.get(edge.to_id) == eid:
                del self._odo_in[edge.to_id]
        return edge

    def remove_vertex(self, vid: int) -> Vertex:
        for eid in list(self._adj[vid]):
            self.remove_edge(eid)
        del self._adj[vid]
        return self.vertices.pop(vid)

    # -- queries -----------------------------------------------------------

    def edges_at(self, vid: int) -> list[Edge]:
        """Adjacent edges in insertion (eid) order."""
        return [self.edges[eid] for eid in sorted(self._adj[vid])]

    def degree(self, vid: int) -> int:
        return len(self._adj[vid])

    def odo_in(self, vid: int) -> Edge | None:
        eid = self._odo_in.get(vid)
        return self.edges[eid] if eid is not None else None

    def odo_out(self, vid: int) -> Edge | None:
        eid = self._odo_out.get(vid)
        return self.edges[eid] if eid is not None else None

    def neighbors(self, vid: int) -> set[int]:
        return {self.edges[eid].other(vid) for eid in self._adj[vid]}

    def loop_edges(self) -> list[Edge]:
        return [e for e in self.edges.values() if e.kind is EdgeKind.LOOP_CLOSURE]

    def odometry_edges(self) -> list[Edge]:
        return [e for e in self.edges.values() if e.kind is EdgeKind.ODOMETRY]

    def find_edges(self, a: int, b: int) -> list[Edge]:
        """Edges between the unordered pair (a, b), in eid order."""
        if a not in self._adj or b not in self._adj:
            return []
        return [self.edges[eid] for eid in sorted(self._adj[a] & self._adj[b])]

    def num_vertices(self) -> int:
        return len(self.vertices)

    def num_edges(self) -> int:
        return len(self.edges)

    def effective_gauge(self) -> int:
        if self.gauge_id is not None and self.gauge_id in self.vertices:
            return self.gauge_id
        return min(self.vertices)

    def positions(self) -> dict[int, np.ndarray]:
        return {vid: v.pose.position() for vid, v in self.vertices.items()}

    def is_connected(self) -> bool:
        if len(self.vertices) <= 1:
            return True
        start = next(iter(self.vertices))
        seen = {start}
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            for eid in self._adj[cur]:
                nxt = self.edges[eid].other(cur)
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return len(seen) == len(self.vertices)

    def chain_endpoint_ids(self) -> set[int]:
        """Vertices missing an incoming or outgoing odometry edge (session boundaries)."""
        return {
            vid for vid in self.vertices if vid not in self._odo_in or vid not in self._odo_out
        }

    def copy(self) -> "PoseGraph":
        g = PoseGraph(gauge_id=self.gauge_id)
        g.vertices = {vid: Vertex(v.id, v.pose, v.seq, v.prunable) for vid, v in self.vertices.items()}
        g.edges = {eid: e.copy() for eid, e in self.edges.items()}
        g.__post_init__()
        return g


def graphs_equal(a: PoseGraph, b: PoseGraph, tol: float = 0.0) -> bool:
    """Exact (or toleranced) equality of vertices, edges, kinds, and gauge."""
    if set(a.vertices) != set(b.vertices):
        return False
    if a.gauge_id != b.gauge_id:
        return False
    for vid, va in a.vertices.items():
        vb = b.vertices[vid]
        if np.abs(va.pose.to_vec() - vb.pose.to_vec()).max() > tol:
            return False
    if len(a.edges) != len(b.edges):
        return False

    def edge_key(e: Edge):
        return (e.from_id, e.to_id, e.kind.value, e.provenance.value)

    ea = sorted(a.edges.values(), key=edge_key)
    eb = sorted(b.edges.values(), key=edge_key)
    for x, y in zip(ea, eb):
        if edge_key(x) != edge_key(y):
            return False
        if np.abs(x.measurement.to_vec() - y.measurement.to_vec()).max() > tol:
            return False
        if np.abs(x.info - y.info).max() > tol:
            return False
    return True
