"""Graph pruning: density-driven vertex removal, loop-closure-robust
marginalization, a Chow-Liu-tree marginalization baseline, and guarded
edge pruning.

Vertex pruning repeatedly marginalizes the prunable vertex with the
highest truncated scale-invariant density until every candidate is below
the density threshold or the candidate set has shrunk to its floor.
Densities are always computed over all vertices, prunable or not.

The default marginalization keeps every surviving vertex on the original
trajectory: loop closures of the removed vertex are moved forward or
backward along the odometry chain (toward whichever chain neighbor is
geometrically closer), and the chain itself is reconnected by a composed
odometry edge. Contradictions discovered while fusing edges resolve in
favor of odometry; two contradicting loop closures are both deleted. This
keeps the number of wrong loop closures from growing.

The Chow-Liu baseline instead composes pairwise constraints between all
neighbors of the removed vertex and keeps the maximum-weight spanning
tree. A single wrong edge among n at the removed vertex turns into n-1
wrong clique candidates, which is exactly the amplification the default
method avoids.

Edge pruning caps the number of edges per vertex, removing the adjacent
loop closures with the least information (smallest trace) first, and only
when the shortest path between the endpoints would not stretch by more
than a configured ratio. Odometry edges are never removed.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from ._linalg import det3
from .density import PointSet
from .edge_ops import (
    DEFAULT_MAHALANOBIS_GATE,
    CombineResult,
    Verdict,
    edge_combine,
    edge_compose,
    edge_invert,
)
from .graph import Edge, EdgeKind, GraphError, PoseGraph, Provenance


@dataclass(frozen=True)
class PruningConfig:
    """Thresholds steering both pruning passes.

    s_hat:  density threshold; vertices denser than this get marginalized.
    N_hat:  neighbor count the scale-invariant density is truncated to.
    n_hat:  floor on the prunable-vertex count; pruning stops at or below it.
    m_hat:  how many of the most recent vertices are protected.
    e_hat:  maximum edges per vertex enforced by edge pruning.
    d_hat:  largest allowed shortest-path stretch when removing an edge.
    """

    s_hat: float = 5.0
    N_hat: int = 10
    n_hat: int = 50
    m_hat: int = 50
    e_hat: int = 5
    d_hat: float = 5.0
    mahalanobis_gate: float = DEFAULT_MAHALANOBIS_GATE

    def __post_init__(self):
        if self.s_hat <= 0:
            raise ValueError("s_hat must be positive")
        if self.d_hat <= 1:
            raise ValueError("d_hat must exceed 1")
        if min(self.N_hat, self.n_hat, self.m_hat, self.e_hat) < 1:
            raise ValueError("count thresholds must be >= 1")


# evaluation presets; p_reference performs no pruning at all
PRESETS: dict[str, PruningConfig | None] = {
    "p_aggressive": PruningConfig(s_hat=5.0, N_hat=10, n_hat=50, m_hat=50, e_hat=5, d_hat=5.0),
    "p_cautious": PruningConfig(s_hat=15.0, N_hat=10, n_hat=50, m_hat=50, e_hat=5, d_hat=5.0),
    "p_reference": None,
}


class PruneError(GraphError):
    pass


# -- prune log ---------------------------------------------------------------


@dataclass
class CliqueStats:
    """Bookkeeping of one Chow-Liu clique construction."""

    n_edges: int
    n_corrupted_edges: int
    n_candidates: int
    n_corrupted_candidates: int
    n_retained: int
    n_retained_corrupted: int


@dataclass
class MargRecord:
    vertex: int
    method: str  # "sid" | "chow_liu"
    density: float
    gate: float
    verdicts: list[tuple[int, int, str]] = field(default_factory=list)
    clique: CliqueStats | None = None
    n_vertices_after: int = 0
    n_edges_after: int = 0

    def to_line(self) -> str:
        parts = [
            "MARG",
            f"method={self.method}",
            f"vertex={self.vertex}",
            f"density={self.density:.17g}",
            f"gate={self.gate:.17g}",
        ]
        if self.verdicts:
            vs = ";".join(f"{a}-{b}:{v}" for a, b, v in self.verdicts)
            parts.append(f"verdicts={vs}")
        if self.clique is not None:
            c = self.clique
            parts.append(
                f"clique={c.n_edges},{c.n_corrupted_edges},{c.n_candidates},"
                f"{c.n_corrupted_candidates},{c.n_retained},{c.n_retained_corrupted}"
            )
        parts.append(f"nv={self.n_vertices_after}")
        parts.append(f"ne={self.n_edges_after}")
        return " ".join(parts)


@dataclass
class EdgeRemovalRecord:
    eid: int
    from_id: int
    to_id: int
    trace: float
    detour_ratio: float
    n_vertices_after: int = 0
    n_edges_after: int = 0

    def to_line(self) -> str:
        return (
            f"EDGEDEL eid={self.eid} from={self.from_id} to={self.to_id} "
            f"trace={self.trace:.17g} ratio={self.detour_ratio:.17g} "
            f"nv={self.n_vertices_after} ne={self.n_edges_after}"
        )


@dataclass
class ExemptRecord:
    vertex: int

    def to_line(self) -> str:
        return f"EXEMPT vertex={self.vertex}"


@dataclass
class PruneLog:
    """Replayable record of every pruning action, one line per action."""

    records: list = field(default_factory=list)
    stop_reason: str = ""

    def append(self, record) -> None:
        self.records.append(record)

    def extend(self, other: "PruneLog") -> None:
        self.records.extend(other.records)

    def marginalizations(self) -> list[MargRecord]:
        return [r for r in self.records if isinstance(r, MargRecord)]

    def edge_removals(self) -> list[EdgeRemovalRecord]:
        return [r for r in self.records if isinstance(r, EdgeRemovalRecord)]

    def to_text(self) -> str:
        return "".join(r.to_line() + "\n" for r in self.records)

    @classmethod
    def from_text(cls, text: str) -> "PruneLog":
        log = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tag, *tokens = line.split()
            kv = dict(t.split("=", 1) for t in tokens)
            try:
                if tag == "MARG":
                    rec = MargRecord(
                        vertex=int(kv["vertex"]),
                        method=kv["method"],
                        density=float(kv["density"]),
                        gate=float(kv["gate"]),
                        n_vertices_after=int(kv.get("nv", 0)),
                        n_edges_after=int(kv.get("ne", 0)),
                    )
                    if "verdicts" in kv:
                        for item in kv["verdicts"].split(";"):
                            pair, verdict = item.split(":")
                            a, b = pair.split("-")
                            rec.verdicts.append((int(a), int(b), verdict))
                    if "clique" in kv:
                        rec.clique = CliqueStats(*map(int, kv["clique"].split(",")))
                    log.append(rec)
                elif tag == "EDGEDEL":
                    log.append(
                        EdgeRemovalRecord(
                            eid=int(kv["eid"]),
                            from_id=int(kv["from"]),
                            to_id=int(kv["to"]),
                            trace=float(kv["trace"]),
                            detour_ratio=float(kv["ratio"]),
                            n_vertices_after=int(kv.get("nv", 0)),
                            n_edges_after=int(kv.get("ne", 0)),
                        )
                    )
                elif tag == "EXEMPT":
                    log.append(ExemptRecord(vertex=int(kv["vertex"])))
                else:
                    raise ValueError(f"unknown record tag {tag!r}")
            except (KeyError, ValueError) as exc:
                raise PruneError(f"bad prune-log line {lineno}: {exc}") from None
        return log

    def replay(self, g: PoseGraph) -> PoseGraph:
        """Re-apply the logged actions to (a copy of) the original graph."""
        out = g.copy()
        for rec in self.records:
            if isinstance(rec, MargRecord):
                if rec.method == "sid":
                    marginalize_sid(out, rec.vertex, rec.gate)
                elif rec.method == "chow_liu":
                    marginalize_chow_liu(out, rec.vertex)
                else:
                    raise PruneError(f"unknown marginalization method {rec.method!r}")
            elif isinstance(rec, EdgeRemovalRecord):
                edge = out.edges.get(rec.eid)
                if edge is None or {edge.from_id, edge.to_id} != {rec.from_id, rec.to_id}:
                    raise PruneError(f"replay mismatch for edge record {rec}")
                out.remove_edge(rec.eid)
        return out


# -- marginalization ----------------------------------------------------------


def _insert_with_fusion(
    g: PoseGraph, new_edge: Edge, gate: float, verdicts: list[tuple[int, int, str]]
) -> None:
    """Insert an edge, merging it with any existing edge on the same pair.

    When exactly one of the pair is odometry, fusion runs in the odometry
    edge's frame so the fused edge keeps the chain's orientation.
    """
    existing = g.find_edges(new_edge.from_id, new_edge.to_id)
    if not existing:
        g.add_edge(new_edge, validate=False)
        return
    ex = existing[0]
    if new_edge.kind is EdgeKind.ODOMETRY and ex.kind is not EdgeKind.ODOMETRY:
        merged: CombineResult = edge_combine(new_edge, ex, gate)
    else:
        merged = edge_combine(ex, new_edge, gate)
    verdicts.append((new_edge.from_id, new_edge.to_id, merged.verdict.value))
    g.remove_edge(ex.eid)
    if merged.edge is not None:
        g.add_edge(merged.edge, validate=False)


def marginalize_sid(
    g: PoseGraph, vid: int, gate: float = DEFAULT_MAHALANOBIS_GATE
) -> tuple[PoseGraph, list[tuple[int, int, str]]]:
    """Remove a vertex by moving its loop closures along the odometry chain.

    The chain is reconnected with the composition of the vertex's two
    odometry edges. Each loop closure is re-anchored onto whichever chain
    neighbor is closer to its far endpoint. A chain head or tail simply
    collapses everything into its single chain neighbor. Mutates ``g`` and
    returns it together with the fusion verdicts encountered.
    """
    if vid not in g.vertices:
        raise PruneError(f"vertex {vid} not in graph")
    e_in, e_out = g.odo_in(vid), g.odo_out(vid)
    if e_in is None and e_out is None:
        raise PruneError(f"vertex {vid} is not on an odometry chain")
    v_prev = e_in.from_id if e_in else None
    v_next = e_out.to_id if e_out else None
    loops = [e.copy() for e in g.edges_at(vid) if e.kind is not EdgeKind.ODOMETRY]
    e_in = e_in.copy() if e_in else None
    e_out = e_out.copy() if e_out else None

    def pos(w: int) -> tuple[float, float]:
        p = g.vertices[w].pose
        return p.x, p.y

    new_edges: list[Edge] = []
    if e_in is not None and e_out is not None:
        new_edges.append(edge_compose(e_in, e_out))
        prev_xy, next_xy = pos(v_prev), pos(v_next)
    for e in loops:
        other = e.other(vid)
        if e_in is not None and e_out is not None:
            ox, oy = pos(other)
            d_in = math.hypot(prev_xy[0] - ox, prev_xy[1] - oy)
            d_out = math.hypot(next_xy[0] - ox, next_xy[1] - oy)
            move_back = d_in < d_out
        else:
            move_back = e_out is None  # only one chain neighbor exists
        if move_back:
            if other == v_prev:
                continue  # would be a self-edge
            out_of_v = e if e.from_id == vid else edge_invert(e)  # (v -> other)
            new_edges.append(edge_compose(e_in, out_of_v))  # (v_prev -> other)
        else:
            if other == v_next:
                continue
            into_v = e if e.to_id == vid else edge_invert(e)  # (other -> v)
            new_edges.append(edge_compose(into_v, e_out))  # (other -> v_next)

    g.remove_vertex(vid)
    verdicts: list[tuple[int, int, str]] = []
    for ne in new_edges:
        _insert_with_fusion(g, ne, gate, verdicts)
    return g, verdicts


def _clique_weight(edge: Edge) -> float:
    """Mutual-information proxy: certainty of the candidate constraint."""
    det = det3(np.eye(3) + edge.info)
    return 0.5 * math.log(det) if det > 0 else -math.inf


def _marginalize_chow_liu_impl(g: PoseGraph, vid: int) -> tuple[PoseGraph, CliqueStats]:
    if vid not in g.vertices:
        raise PruneError(f"vertex {vid} not in graph")
    adjacent = [e.copy() for e in g.edges_at(vid)]
    e_in, e_out = g.odo_in(vid), g.odo_out(vid)
    forced_pair = None
    if e_in is not None and e_out is not None:
        forced_pair = frozenset((e_in.from_id, e_out.to_id))

    # orient every adjacent edge both ways once, then compose one candidate
    # per pair of adjacent edges through the vertex
    into_v = [e.copy() if e.to_id == vid else edge_invert(e) for e in adjacent]  # (other -> v)
    out_of_v = [e.copy() if e.from_id == vid else edge_invert(e) for e in adjacent]  # (v -> other)
    candidates: list[Edge] = []
    n_corrupt_cand = 0
    for i in range(len(adjacent)):
        for j in range(i + 1, len(adjacent)):
            ea, eb = adjacent[i], adjacent[j]
            ii, jj = i, j
            if (
                ea.kind is EdgeKind.ODOMETRY
                and eb.kind is EdgeKind.ODOMETRY
                and ea.from_id == vid
            ):
                ii, jj = j, i  # keep the composed chain edge in chain direction
            a, b = adjacent[ii].other(vid), adjacent[jj].other(vid)
            if a == b:
                continue  # parallel edges to the same neighbor
            cand = edge_compose(into_v[ii], out_of_v[jj])
            candidates.append(cand)
            if cand.provenance is Provenance.CORRUPTED:
                n_corrupt_cand += 1

    # maximum-weight spanning tree over the neighbors; the composed
    # odometry shortcut is always kept so the chain stays intact
    parent: dict[int, int] = {}

    def find(x: int) -> int:
        while parent.get(x, x) != x:
            parent[x] = parent.get(parent[x], parent[x])
            x = parent[x]
        return x

    def union(x: int, y: int) -> bool:
        rx, ry = find(x), find(y)
        if rx == ry:
            return False
        parent[rx] = ry
        return True

    retained_ks: list[int] = []
    ordered = sorted(
        range(len(candidates)),
        key=lambda k: (-_clique_weight(candidates[k]), candidates[k].from_id, candidates[k].to_id, k),
    )
    if forced_pair is not None:
        for k, cand in enumerate(candidates):
            if frozenset((cand.from_id, cand.to_id)) == forced_pair and cand.kind is EdgeKind.ODOMETRY:
                union(cand.from_id, cand.to_id)
                retained_ks.append(k)
                break
    for k in ordered:
        if k in retained_ks:
            continue
        cand = candidates[k]
        if union(cand.from_id, cand.to_id):
            retained_ks.append(k)
    retained = [candidates[k] for k in retained_ks]

    g.remove_vertex(vid)
    sink: list[tuple[int, int, str]] = []
    for cand in retained:
        _insert_with_fusion(g, cand, math.inf, sink)  # baseline always fuses

    stats = CliqueStats(
        n_edges=len(adjacent),
        n_corrupted_edges=sum(1 for e in adjacent if e.provenance is Provenance.CORRUPTED),
        n_candidates=len(candidates),
        n_corrupted_candidates=n_corrupt_cand,
        n_retained=len(retained),
        n_retained_corrupted=sum(1 for e in retained if e.provenance is Provenance.CORRUPTED),
    )
    return g, stats


def marginalize_chow_liu(g: PoseGraph, vid: int) -> PoseGraph:
    """Baseline marginalization via a spanning tree over the neighbor clique."""
    out, _ = _marginalize_chow_liu_impl(g, vid)
    return out


# -- vertex pruning ------------------------------------------------------------


class _DensityCache:
    """Truncated densities for all points, updated incrementally on removal.

    A removal only affects points whose n_hat-nearest list contained the
    removed point, so a reverse index keeps refreshes local. Point
    positions never change here, so each point keeps a sorted surplus of
    nearest-neighbor candidates; on removal the next candidate slides in
    without touching the spatial index. Values always equal a full
    recomputation on the surviving point set.
    """

    _SURPLUS = 3  # candidate list holds SURPLUS * n_hat entries

    def __init__(self, ps: PointSet, n_hat: int):
        self.ps = ps
        self.n_hat = n_hat
        self.density: dict[int, float] = {}
        self._cand: dict[int, list[tuple[float, int]]] = {}  # (distance, id), sorted
        self._referenced_by: dict[int, set[int]] = {}
        self._removed: set[int] = set()
        for vid in ps.active_ids():
            self._refill(int(vid))
            self._publish(int(vid))

    def _refill(self, vid: int) -> None:
        k = min(self._SURPLUS * self.n_hat, max(self.ps.size() - 1, 1))
        nbrs = self.ps.knn(vid, k) if self.ps.size() > 1 else []
        p = self.ps.position(vid)
        px, py = float(p[0]), float(p[1])
        entries = []
        for n in nbrs:
            q = self.ps.position(n)
            d = math.hypot(float(q[0]) - px, float(q[1]) - py)
            entries.append((max(d, 1e-6), n))
        self._cand[vid] = entries

    def _publish(self, vid: int) -> None:
        """Recompute the density from the first n_hat live candidates and
        register reverse-map entries for exactly those."""
        head = self._cand[vid][: self.n_hat]
        for _, n in head:
            self._referenced_by.setdefault(n, set()).add(vid)
        self.density[vid] = sum(1.0 / d for d, _ in head) / math.pi

    def _refresh(self, vid: int) -> None:
        cand = [e for e in self._cand[vid] if e[1] not in self._removed]
        self._cand[vid] = cand
        if len(cand) < min(self.n_hat, self.ps.size() - 1):
            self._refill(vid)
        self._publish(vid)

    def remove(self, vid: int) -> list[int]:
        """Remove a point; returns the ids whose density was recomputed."""
        self.ps.remove(vid)
        self._removed.add(vid)
        affected = self._referenced_by.pop(vid, set())
        for _, n in self._cand.pop(vid)[: self.n_hat]:
            entry = self._referenced_by.get(n)
            if entry:
                entry.discard(vid)
        del self.density[vid]
        refreshed = [other for other in affected if other not in self._removed]
        for other in refreshed:
            self._refresh(other)
        return refreshed


def prunable_ids(g: PoseGraph, cfg: PruningConfig) -> set[int]:
    """Pruning candidates: everything except protected-recent vertices,
    odometry-chain endpoints, the gauge vertex, and vertices explicitly
    flagged as not prunable."""
    by_seq = sorted(g.vertices.values(), key=lambda v: v.seq)
    recent = {v.id for v in by_seq[-cfg.m_hat :]} if cfg.m_hat else set()
    excluded = recent | g.chain_endpoint_ids() | {g.effective_gauge()}
    return {v.id for v in g.vertices.values() if v.prunable and v.id not in excluded}


def prune_vertices(
    g: PoseGraph, cfg: PruningConfig, method: str = "sid"
) -> tuple[PoseGraph, PruneLog]:
    """Iteratively marginalize the densest prunable vertex.

    Stops as soon as the densest candidate is at or below ``s_hat`` or the
    candidate set has at most ``n_hat`` members. Returns a pruned copy and
    a replayable log; the input graph is not modified.
    """
    if method not in ("sid", "chow_liu"):
        raise ValueError(f"unknown marginalization method {method!r}")
    if not g.is_connected():
        raise PruneError("refusing to prune a disconnected graph")
    out = g.copy()
    log = PruneLog()
    if out.num_vertices() < 2:
        log.stop_reason = "too few vertices"
        return out, log

    cache = _DensityCache(
        PointSet({vid: v.pose.position() for vid, v in out.vertices.items()}), cfg.N_hat
    )
    # the protected sets never gain members while pruning only removes
    # interior, non-recent vertices, so compute them once
    candidates = prunable_ids(out, cfg)
    # lazy max-heap over (density, lower id wins ties); stale entries are
    # skipped when their density no longer matches the cache
    heap = [(-cache.density[v], v) for v in candidates]
    heapq.heapify(heap)
    while True:
        if len(candidates) <= cfg.n_hat:
            log.stop_reason = "prunable count at floor"
            break
        while heap and (heap[0][1] not in candidates or -heap[0][0] != cache.density[heap[0][1]]):
            heapq.heappop(heap)
        if not heap:
            log.stop_reason = "no prunable vertices"
            break
        density, vmax = -heap[0][0], heap[0][1]
        if density <= cfg.s_hat:
            log.stop_reason = "density below threshold"
            break
        rec = MargRecord(vertex=vmax, method=method, density=density, gate=cfg.mahalanobis_gate)
        if method == "sid":
            _, verdicts = marginalize_sid(out, vmax, cfg.mahalanobis_gate)
            rec.verdicts = verdicts
        else:
            _, rec.clique = _marginalize_chow_liu_impl(out, vmax)
            rec.gate = math.inf
        refreshed = cache.remove(vmax)
        candidates.discard(vmax)
        for other in refreshed:
            if other in candidates:
                heapq.heappush(heap, (-cache.density[other], other))
        rec.n_vertices_after = out.num_vertices()
        rec.n_edges_after = out.num_edges()
        log.append(rec)

    if out.num_vertices() >= 2 and not out.is_connected():
        raise PruneError("pruning disconnected the graph")
    return out, log


# -- edge pruning ---------------------------------------------------------------


def astar_len(g: PoseGraph, start: int, goal: int, excluded_eid: int | None = None) -> float:
    """Shortest-path length between two vertices with Euclidean edge weights,
    optionally ignoring one edge. Straight-line distance is the heuristic,
    which is admissible, so the result is exact. Returns inf if unreachable."""
    if start == goal:
        raise PruneError("astar_len needs distinct endpoints")
    pos = {vid: v.pose.position() for vid, v in g.vertices.items()}
    target = pos[goal]

    def heur(vid: int) -> float:
        return float(np.linalg.norm(pos[vid] - target))

    best = {start: 0.0}
    frontier = [(heur(start), start)]
    while frontier:
        f, cur = heapq.heappop(frontier)
        if cur == goal:
            return best[cur]
        if f > best.get(cur, math.inf) + heur(cur) + 1e-12:
            continue  # stale entry
        for edge in g.edges_at(cur):
            if edge.eid == excluded_eid:
                continue
            nxt = edge.other(cur)
            cand = best[cur] + float(np.linalg.norm(pos[cur] - pos[nxt]))
            if cand < best.get(nxt, math.inf):
                best[nxt] = cand
                heapq.heappush(frontier, (cand + heur(nxt), nxt))
    return math.inf


def detour_ratio(g: PoseGraph, edge: Edge) -> float:
    """Factor by which the shortest path between the edge's endpoints grows
    if the edge is removed."""
    direct = float(
        np.linalg.norm(
            g.vertices[edge.from_id].pose.position() - g.vertices[edge.to_id].pose.position()
        )
    )
    if direct <= 0.0:
        return math.inf
    return astar_len(g, edge.from_id, edge.to_id, excluded_eid=edge.eid) / direct


def prune_edges(g: PoseGraph, cfg: PruningConfig) -> tuple[PoseGraph, PruneLog]:
    """Cap the edge count per vertex at ``e_hat``.

    The vertex with the most adjacent edges goes first. Its adjacent loop
    closures are tried in ascending order of information trace; the first
    one whose removal keeps the endpoint detour ratio within ``d_hat`` is
    removed. A vertex where no candidate passes is exempted. Odometry
    edges are never candidates, and the detour guard means the graph can
    never be disconnected here."""
    out = g.copy()
    log = PruneLog()
    exempt: set[int] = set()
    while True:
        worst, worst_deg = None, cfg.e_hat
        for vid in out.vertices:
            deg = out.degree(vid)
            if vid in exempt or deg <= cfg.e_hat:
                continue
            if worst is None or deg > worst_deg or (deg == worst_deg and vid < worst):
                worst, worst_deg = vid, deg
        if worst is None:
            log.stop_reason = "all vertices within edge budget"
            break
        loops = [e for e in out.edges_at(worst) if e.kind is EdgeKind.LOOP_CLOSURE]
        loops.sort(key=lambda e: (float(np.trace(e.info)), e.eid))
        removed = False
        for edge in loops:
            ratio = detour_ratio(out, edge)
            if ratio <= cfg.d_hat:
                out.remove_edge(edge.eid)
                log.append(
                    EdgeRemovalRecord(
                        eid=edge.eid,
                        from_id=edge.from_id,
                        to_id=edge.to_id,
                        trace=float(np.trace(edge.info)),
                        detour_ratio=ratio,
                        n_vertices_after=out.num_vertices(),
                        n_edges_after=out.num_edges(),
                    )
                )
                removed = True
                break
        if not removed:
            exempt.add(worst)
            log.append(ExemptRecord(vertex=worst))
    if out.num_vertices() >= 2 and not out.is_connected():
        raise PruneError("edge pruning disconnected the graph")
    return out, log
