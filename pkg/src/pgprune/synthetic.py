"""Synthetic pose-graph generators: grids, random trajectories, noise,
and loop-closure corruption.

All generators are pure functions of their specs and seeds. Measurements
of a freshly generated graph are exact (zero total error at the ground
truth poses); noise and corruption are applied as separate passes that
return modified copies.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2, relative_pose
from .graph import Edge, EdgeKind, PoseGraph, Provenance


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    spacing: float
    radius_factor: float = 1.5  # loop closures connect pairs within radius_factor*spacing

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ValueError("grid needs at least 2 rows and 2 cols")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    odo_sigma: tuple[float, float, float] = (0.02, 0.02, 0.01)
    loop_sigma: tuple[float, float, float] = (0.05, 0.05, 0.02)
    seed: int = 0

    def __post_init__(self):
        if any(s < 0 for s in self.odo_sigma + self.loop_sigma):
            raise ValueError("noise sigmas must be non-negative")


@dataclass(frozen=True)
class CorruptionSpec:
    fraction: float
    seed: int = 0
    bounds: tuple[float, float, float, float] | None = None  # xmin, xmax, ymin, ymax

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("corruption fraction must be in [0, 1]")


def _boustrophedon_positions(spec: GridSpec) -> np.ndarray:
    pts = []
    for row in range(spec.rows):
        cols = range(spec.cols) if row % 2 == 0 else range(spec.cols - 1, -1, -1)
        for col in cols:
            pts.append((col * spec.spacing, row * spec.spacing))
    return np.array(pts)


def _headings_along(points: np.ndarray) -> np.ndarray:
    th = np.zeros(len(points))
    diffs = points[1:] - points[:-1]
    th[:-1] = np.arctan2(diffs[:, 1], diffs[:, 0])
    th[-1] = th[-2] if len(points) > 1 else 0.0
    return th


def _add_loop_closures(g: PoseGraph, gt: dict[int, Pose2], radius: float) -> None:
    ids = sorted(gt)
    pts = np.array([gt[i].position() for i in ids])
    for a in range(len(ids)):
        d = np.linalg.norm(pts[a + 1 :] - pts[a], axis=1)
        for off in np.nonzero(d <= radius)[0]:
            b = a + 1 + off
            if ids[b] - ids[a] == 1:
                continue  # consecutive pair is already the odometry edge
            g.add_edge(
                Edge(
                    from_id=ids[a],
                    to_id=ids[b],
                    measurement=relative_pose(gt[ids[a]], gt[ids[b]]),
                    info=np.eye(3),
                    kind=EdgeKind.LOOP_CLOSURE,
                )
            )


def _graph_from_trajectory(points: np.ndarray, loop_radius: float) -> tuple[PoseGraph, dict[int, Pose2]]:
    headings = _headings_along(points)
    gt = {i: Pose2(points[i, 0], points[i, 1], headings[i]) for i in range(len(points))}
    g = PoseGraph(gauge_id=0)
    for i in range(len(points)):
        g.add_vertex(i, gt[i])
    for i in range(len(points) - 1):
        g.add_edge(
            Edge(
                from_id=i,
                to_id=i + 1,
                measurement=relative_pose(gt[i], gt[i + 1]),
                info=np.eye(3),
                kind=EdgeKind.ODOMETRY,
            )
        )
    _add_loop_closures(g, gt, loop_radius)
    return g, gt


def gen_grid(spec: GridSpec) -> tuple[PoseGraph, dict[int, Pose2]]:
    """Boustrophedon (lawnmower) sweep over a rows x cols grid.

    Odometry edges chain the traversal; loop closures connect every
    non-consecutive pair within radius_factor*spacing. Measurements are
    exact and all edges carry identity information.
    """
    points = _boustrophedon_positions(spec)
    return _graph_from_trajectory(points, spec.radius_factor * spec.spacing)


def gen_random_trajectory(
    steps: int,
    bounds: tuple[float, float, float, float] = (0.0, 20.0, 0.0, 20.0),
    seed: int = 0,
    step_len: float = 1.0,
    max_turn: float = 0.5,
    loop_radius: float = 1.5,
) -> tuple[PoseGraph, dict[int, Pose2]]:
    """Smooth random walk inside a rectangle, with proximity loop closures."""
    if steps < 2:
        raise ValueError("need at least 2 steps")
    xmin, xmax, ymin, ymax = bounds
    rng = np.random.default_rng(seed)
    pos = np.array([(xmin + xmax) / 2.0, (ymin + ymax) / 2.0])
    heading = rng.uniform(-math.pi, math.pi)
    pts = [pos.copy()]
    for _ in range(steps - 1):
        heading += rng.uniform(-max_turn, max_turn)
        for _ in range(64):
            cand = pos + step_len * np.array([math.cos(heading), math.sin(heading)])
            if xmin <= cand[0] <= xmax and ymin <= cand[1] <= ymax:
                break
            center = np.array([(xmin + xmax) / 2.0, (ymin + ymax) / 2.0])
            heading = math.atan2(center[1] - pos[1], center[0] - pos[0]) + rng.uniform(
                -max_turn, max_turn
            )
        pos = cand
        pts.append(pos.copy())
    return _graph_from_trajectory(np.array(pts), loop_radius)


def add_noise(g: PoseGraph, gt: dict[int, Pose2], noise: NoiseSpec) -> PoseGraph:
    """Perturb measurements with zero-mean Gaussian noise per edge kind and
    set information matrices to the inverse noise covariance.

    A kind whose sigmas are all zero is left untouched (measurements and
    information). Ground truth is never modified.
    """
    out = g.copy()
    rng = np.random.default_rng(noise.seed)
    sigmas = {EdgeKind.ODOMETRY: noise.odo_sigma, EdgeKind.LOOP_CLOSURE: noise.loop_sigma}
    for kind, sig in sigmas.items():
        if any(s > 0 for s in sig) and not all(s > 0 for s in sig):
            raise ValueError(f"{kind.value} sigmas must be all zero or all positive")
    for edge in out.edges.values():
        sig = np.array(sigmas[edge.kind])
        if not sig.any():
            continue
        delta = rng.normal(0.0, sig)
        edge.measurement = Pose2.from_vec(edge.measurement.to_vec() + delta)
        edge.info = np.diag(1.0 / sig**2)
    return out


def corrupt_loop_closures(g: PoseGraph, spec: CorruptionSpec) -> PoseGraph:
    """Replace a fraction of loop-closure measurements with uniform random
    poses over the arena; information matrices stay untouched so corrupted
    edges look exactly as confident as genuine ones."""
    out = g.copy()
    loops = sorted(out.loop_edges(), key=lambda e: e.eid)
    n_pick = int(math.floor(spec.fraction * len(loops)))
    if spec.fraction > 0 and not loops:
        warnings.warn("corruption requested but the graph has no loop closures")
        return out
    if n_pick == 0:
        return out
    if spec.bounds is not None:
        xmin, xmax, ymin, ymax = spec.bounds
    else:
        pts = np.array([v.pose.position() for v in out.vertices.values()])
        (xmin, ymin), (xmax, ymax) = pts.min(axis=0), pts.max(axis=0)
    rng = np.random.default_rng(spec.seed)
    picks = rng.choice(len(loops), size=n_pick, replace=False)
    for k in picks:
        edge = loops[int(k)]
        edge.measurement = Pose2(
            rng.uniform(xmin, xmax), rng.uniform(ymin, ymax), rng.uniform(-math.pi, math.pi)
        )
        edge.provenance = Provenance.CORRUPTED
    return out
