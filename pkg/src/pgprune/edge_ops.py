"""Elementary edge operations: inversion, composition, and combination.

These are the building blocks of marginalization. Covariances are
propagated to first order, with measurement noise treated as an additive
perturbation of the (x, y, theta) measurement vector in the from-vertex
frame. Corrupted provenance is absorbing: any edge produced from a
corrupted input is itself corrupted.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from ._linalg import inv3, is_pd3, sym3
from .geometry import Pose2, compose_jacobians, inverse_jacobian, pose_difference
from .graph import Edge, EdgeKind, Provenance

# chi-square 0.999 quantile with 3 dof; edges whose Mahalanobis gap exceeds
# this are considered contradictory
DEFAULT_MAHALANOBIS_GATE = float(chi2.ppf(0.999, 3))


class EdgeOpError(ValueError):
    """Edge operation rejected (endpoint mismatch, singular covariance)."""


class Verdict(enum.Enum):
    FUSED = "fused"
    KEEP_ODOMETRY_DROP_LOOP = "keep_odometry_drop_loop"
    DROP_BOTH = "drop_both"


@dataclass
class CombineResult:
    edge: Edge | None
    verdict: Verdict
    gap: float


def _merge_provenance(*edges: Edge) -> Provenance:
    if any(e.provenance is Provenance.CORRUPTED for e in edges):
        return Provenance.CORRUPTED
    return Provenance.GENUINE


def _info_from_cov(cov: np.ndarray, context: str) -> np.ndarray:
    try:
        info = sym3(inv3(cov))
    except np.linalg.LinAlgError:
        raise EdgeOpError(f"singular covariance in {context}") from None
    if not np.all(np.isfinite(info)) or not is_pd3(info):
        raise EdgeOpError(f"near-singular covariance in {context}")
    return info


def edge_invert(e: Edge) -> Edge:
    """Reverse an edge: swap endpoints, invert the measurement, remap the noise."""
    cov = e.covariance()
    jac = inverse_jacobian(e.measurement)
    new_cov = jac @ cov @ jac.T
    return Edge(
        from_id=e.to_id,
        to_id=e.from_id,
        measurement=e.measurement.inverse(),
        info=_info_from_cov(new_cov, "edge_invert"),
        kind=e.kind,
        provenance=e.provenance,
    )


def edge_compose(e1: Edge, e2: Edge) -> Edge:
    """Chain two edges sharing a middle vertex: (a->b) o (b->c) = (a->c).

    The composed edge is odometry only if both inputs are odometry.
    """
    if e1.to_id != e2.from_id:
        raise EdgeOpError(
            f"cannot compose ({e1.from_id},{e1.to_id}) with ({e2.from_id},{e2.to_id}): "
            "endpoints do not chain"
        )
    if e1.from_id == e2.to_id:
        raise EdgeOpError("composition would produce a self-edge")
    m = e1.measurement.compose(e2.measurement)
    j1, j2 = compose_jacobians(e1.measurement, e2.measurement)
    cov = j1 @ e1.covariance() @ j1.T + j2 @ e2.covariance() @ j2.T
    kind = (
        EdgeKind.ODOMETRY
        if e1.kind is EdgeKind.ODOMETRY and e2.kind is EdgeKind.ODOMETRY
        else EdgeKind.LOOP_CLOSURE
    )
    return Edge(
        from_id=e1.from_id,
        to_id=e2.to_id,
        measurement=m,
        info=_info_from_cov(cov, "edge_compose"),
        kind=kind,
        provenance=_merge_provenance(e1, e2),
    )


def _align(e1: Edge, e2: Edge) -> Edge:
    """Orient e2 to run the same way as e1; both must connect the same pair."""
    if (e2.from_id, e2.to_id) == (e1.from_id, e1.to_id):
        return e2
    if (e2.to_id, e2.from_id) == (e1.from_id, e1.to_id):
        return edge_invert(e2)
    raise EdgeOpError(
        f"edges ({e1.from_id},{e1.to_id}) and ({e2.from_id},{e2.to_id}) "
        "do not connect the same vertex pair"
    )


def mahalanobis_gap(e1: Edge, e2: Edge) -> float:
    """Squared Mahalanobis distance between two edges on the same vertex pair."""
    e2 = _align(e1, e2)
    d = pose_difference(e1.measurement, e2.measurement)
    cov = e1.covariance() + e2.covariance()
    try:
        sol = np.linalg.solve(cov, d)
    except np.linalg.LinAlgError:
        raise EdgeOpError("singular combined covariance in mahalanobis_gap") from None
    return float(d @ sol)


def edge_combine(e1: Edge, e2: Edge, gate: float = DEFAULT_MAHALANOBIS_GATE) -> CombineResult:
    """Fuse two edges on the same vertex pair, or rule them contradictory.

    Within the gate the edges are fused: information adds, and the
    measurement is the information-weighted mean linearized at e1's
    measurement. Beyond the gate, odometry wins over a loop closure and
    two contradicting loop closures are both dropped. Two odometry edges
    are always fused (the odometry chain is trusted and must survive).
    """
    e2 = _align(e1, e2)
    gap = mahalanobis_gap(e1, e2)
    odo1 = e1.kind is EdgeKind.ODOMETRY
    odo2 = e2.kind is EdgeKind.ODOMETRY
    if gap > gate and not (odo1 and odo2):
        if odo1 or odo2:
            keeper = e1 if odo1 else e2
            return CombineResult(keeper.copy(), Verdict.KEEP_ODOMETRY_DROP_LOOP, gap)
        return CombineResult(None, Verdict.DROP_BOTH, gap)

    lam1, lam2 = e1.info, e2.info
    lam = sym3(lam1 + lam2)
    resid = pose_difference(e1.measurement, e2.measurement)
    delta = np.linalg.solve(lam, lam2 @ resid)
    mean = e1.measurement.to_vec() + delta
    fused = Edge(
        from_id=e1.from_id,
        to_id=e1.to_id,
        measurement=Pose2.from_vec(mean),
        info=lam,
        kind=EdgeKind.ODOMETRY if (odo1 or odo2) else EdgeKind.LOOP_CLOSURE,
        provenance=_merge_provenance(e1, e2),
    )
    return CombineResult(fused, Verdict.FUSED, gap)
