"""Accuracy metrics: trajectory error, map error, and relative map error.

Trajectory error compares per-step pose estimates (captured as the robot
went, without later corrections) against a reference stream. Map error
compares final vertex poses after expressing both graphs with the shared
gauge vertex at the reference pose. Relative map error compares the
relative pose between consecutive surviving vertices, which stays
meaningful under global drift; the mean distance between those vertices
is reported alongside it, since heavy pruning can stretch the pairs until
the metric effectively measures global consistency again.

Translational errors are in meters, rotational errors in degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2, normalize_angle, relative_pose
from .graph import PoseGraph


class MetricError(ValueError):
    pass


@dataclass
class MetricResult:
    trans_mean: float
    trans_sd: float
    rot_mean: float  # degrees
    rot_sd: float
    trans_residuals: np.ndarray = field(repr=False, default=None)
    rot_residuals: np.ndarray = field(repr=False, default=None)
    mean_step_distance: float | None = None  # only for the relative metric

    @classmethod
    def from_residuals(cls, trans: np.ndarray, rot_deg: np.ndarray) -> "MetricResult":
        trans = np.asarray(trans, dtype=float)
        rot_deg = np.asarray(rot_deg, dtype=float)
        return cls(
            trans_mean=float(trans.mean()),
            trans_sd=float(trans.std()),
            rot_mean=float(rot_deg.mean()),
            rot_sd=float(rot_deg.std()),
            trans_residuals=trans,
            rot_residuals=rot_deg,
        )


def _pose_errors(est: Pose2, ref: Pose2) -> tuple[float, float]:
    dt = math.hypot(est.x - ref.x, est.y - ref.y)
    dth = abs(normalize_angle(est.theta - ref.theta))
    return dt, math.degrees(dth)


def trajectory_error(estimates: list[Pose2], reference: list[Pose2]) -> MetricResult:
    """Absolute per-step errors between two index-associated pose streams."""
    if len(estimates) != len(reference):
        raise MetricError(
            f"stream length mismatch: {len(estimates)} estimates vs {len(reference)} references"
        )
    if not estimates:
        raise MetricError("empty pose streams")
    pairs = [_pose_errors(e, r) for e, r in zip(estimates, reference)]
    trans, rot = zip(*pairs)
    return MetricResult.from_residuals(np.array(trans), np.array(rot))


def _gauge_align(g: PoseGraph, reference: dict[int, Pose2]) -> dict[int, Pose2]:
    """Re-express the graph so its gauge vertex sits at the reference pose."""
    gauge = g.effective_gauge()
    if gauge not in reference:
        raise MetricError(f"gauge vertex {gauge} missing from reference")
    t = reference[gauge].compose(g.vertices[gauge].pose.inverse())
    return {vid: t.compose(v.pose) for vid, v in g.vertices.items()}


def map_error(g: PoseGraph, reference: dict[int, Pose2]) -> MetricResult:
    """Final-pose errors over all vertices, association by id."""
    missing = sorted(set(g.vertices) - set(reference))
    if missing:
        raise MetricError(f"vertices missing from reference: {missing[:10]}")
    if not g.vertices:
        raise MetricError("empty graph")
    aligned = _gauge_align(g, reference)
    pairs = [_pose_errors(aligned[vid], reference[vid]) for vid in sorted(aligned)]
    trans, rot = zip(*pairs)
    return MetricResult.from_residuals(np.array(trans), np.array(rot))


def relative_map_error(g: PoseGraph, reference: dict[int, Pose2]) -> MetricResult:
    """Errors of relative poses between consecutive (by seq) surviving vertices."""
    if g.num_vertices() < 2:
        raise MetricError("need at least 2 vertices for the relative metric")
    missing = sorted(set(g.vertices) - set(reference))
    if missing:
        raise MetricError(f"vertices missing from reference: {missing[:10]}")
    ordered = [v.id for v in sorted(g.vertices.values(), key=lambda v: v.seq)]
    trans, rot, gaps = [], [], []
    for a, b in zip(ordered, ordered[1:]):
        rel_est = relative_pose(g.vertices[a].pose, g.vertices[b].pose)
        rel_ref = relative_pose(reference[a], reference[b])
        err = rel_ref.inverse().compose(rel_est)
        trans.append(math.hypot(err.x, err.y))
        rot.append(math.degrees(abs(err.theta)))
        gaps.append(math.hypot(rel_ref.x, rel_ref.y))
    result = MetricResult.from_residuals(np.array(trans), np.array(rot))
    result.mean_step_distance = float(np.mean(gaps))
    return result
