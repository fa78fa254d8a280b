"""Cap the number of edges per vertex without ever disconnecting the graph.

Edges with the least information (smallest trace) go first, and an edge
may only be removed if the shortest path between its endpoints stretches
by at most a configured ratio afterwards. Odometry edges are never touched.
"""

import numpy as np

from pgprune import Edge, EdgeKind, GridSpec, Pose2, PoseGraph, PruningConfig, astar_len, gen_grid, prune_edges

# the guard in isolation: a unit square whose closing edge is the only
# shortcut; removing it forces the 3-edge detour
square = PoseGraph(gauge_id=0)
for i, (x, y) in enumerate([(0, 0), (1, 0), (1, 1), (0, 1)]):
    square.add_vertex(i, Pose2(x, y, 0))
for i in range(3):
    square.add_edge(Edge(i, i + 1, Pose2(1, 0, 0), np.eye(3), kind=EdgeKind.ODOMETRY))
square.add_edge(Edge(3, 0, Pose2(0, -1, 0), np.eye(3), kind=EdgeKind.LOOP_CLOSURE))

closing = square.find_edges(3, 0)[0]
with_edge = astar_len(square, 3, 0)
without_edge = astar_len(square, 3, 0, excluded_eid=closing.eid)
print(f"unit square: path 3->0 is {with_edge:.1f} with the closing edge, "
      f"{without_edge:.1f} without it (detour ratio {without_edge / with_edge:.1f})")
for d_hat in (5.0, 2.0):
    out, log = prune_edges(square, PruningConfig(e_hat=1, d_hat=d_hat))
    verdict = "removed" if log.edge_removals() else "kept (guard refused)"
    print(f"  with detour limit {d_hat}: closing edge {verdict}")

# on a dense grid the cap reshapes the loop-closure distribution
print()
cfg = PruningConfig(e_hat=5, d_hat=5.0)
g, _ = gen_grid(GridSpec(20, 20, 1.0))
before = sorted(g.degree(v) for v in g.vertices)
out, log = prune_edges(g, cfg)
after = sorted(out.degree(v) for v in out.vertices)
print(f"20x20 grid: {g.num_edges()} -> {out.num_edges()} edges "
      f"({len(log.edge_removals())} loop closures removed)")
print(f"  max degree {before[-1]} -> {after[-1]} (cap {cfg.e_hat})")
print(f"  odometry edges kept: {len(out.odometry_edges())} of {len(g.odometry_edges())}")
print(f"  still connected: {out.is_connected()}")

ratios = [r.detour_ratio for r in log.edge_removals()]
print(f"  detour ratios of removed edges: min {min(ratios):.2f}, max {max(ratios):.2f} "
      f"(limit {cfg.d_hat})")
