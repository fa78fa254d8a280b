"""Sparse nonlinear least-squares optimization of SE(2) pose graphs.

Levenberg-Marquardt on the 3n x 3n normal equations, assembled in batch
with numpy and solved with scipy's sparse LU. The gauge freedom is removed
by excluding one anchored vertex from the variable set, so its pose never
moves. Edge residuals are

    r = toVec( inverse(measurement) (+) inverse(x_from) (+) x_to )

with the angle component wrapped, optionally passed through a Huber kernel.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from .geometry import Pose2, normalize_angles
from .graph import PoseGraph

_CHI2_FLOOR = 1e-16
_LAMBDA_MAX = 1e10
_LAMBDA_MIN = 1e-12


class SolverError(RuntimeError):
    """Optimization cannot proceed (under-constrained or singular system)."""


@dataclass(frozen=True)
class Huber:
    """Huber robust kernel on the squared error s: quadratic below delta,
    linear above (rho(s) = 2*delta*sqrt(s) - delta^2)."""

    delta: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("Huber delta must be positive")

    def rho(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        root = np.sqrt(np.maximum(s, 0.0))
        return np.where(root <= self.delta, s, 2.0 * self.delta * root - self.delta**2)

    def weight(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        root = np.sqrt(np.maximum(s, 1e-300))
        return np.where(root <= self.delta, 1.0, self.delta / root)


@dataclass
class OptimizerConfig:
    max_iterations: int = 100
    rel_decrease: float = 1e-9
    damping_init: float = 1e-6
    damping_scale: float = 10.0
    kernel: Huber | None = None
    gauge_id: int | None = None  # None: use the graph's gauge, else its lowest id

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class OptimizeStats:
    chi2_sequence: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    message: str = ""

    @property
    def final_chi2(self) -> float:
        return self.chi2_sequence[-1] if self.chi2_sequence else float("nan")


class _Problem:
    """Vectorized residual/Jacobian evaluation and normal-equation assembly."""

    def __init__(self, g: PoseGraph, gauge_id: int):
        self.ids = sorted(g.vertices)
        slot = {vid: k for k, vid in enumerate(self.ids)}
        self.n = len(self.ids)
        self.gauge_slot = slot[gauge_id]
        edges = list(g.edges.values())
        self.m = len(edges)
        self.F = np.array([slot[e.from_id] for e in edges], dtype=np.int64)
        self.T = np.array([slot[e.to_id] for e in edges], dtype=np.int64)
        self.meas = np.array([e.measurement.to_vec() for e in edges])
        self.L = np.array([e.info for e in edges])
        cm, sm = np.cos(self.meas[:, 2]), np.sin(self.meas[:, 2])
        self.Rmt = np.zeros((self.m, 3, 3))
        self.Rmt[:, 0, 0] = cm
        self.Rmt[:, 0, 1] = sm
        self.Rmt[:, 1, 0] = -sm
        self.Rmt[:, 1, 1] = cm
        self.Rmt[:, 2, 2] = 1.0

        # reduced variable set: every slot except the gauge
        free = np.array([k for k in range(self.n) if k != self.gauge_slot], dtype=np.int64)
        self.free_slots = free
        red = -np.ones(self.n, dtype=np.int64)
        red[free] = np.arange(len(free))
        self.n_free = len(free)

        # sparsity pattern of the four 3x3 blocks per edge, gauge entries
        # dropped; the pattern is fixed, so precompute a block-entry ->
        # csc-slot map and refill only the data array each iteration
        offs = np.arange(3)
        rows, cols = [], []
        for rbase, cbase in ((self.F, self.F), (self.F, self.T), (self.T, self.F), (self.T, self.T)):
            r = (3 * red[rbase])[:, None, None] + offs[None, :, None]
            c = (3 * red[cbase])[:, None, None] + offs[None, None, :]
            rows.append(np.broadcast_to(r, (self.m, 3, 3)).ravel())
            cols.append(np.broadcast_to(c, (self.m, 3, 3)).ravel())
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        keep = (rows >= 0) & (cols >= 0)
        self.h_keep = keep
        rows, cols = rows[keep], cols[keep]
        dim = 3 * self.n_free
        ckey = cols.astype(np.int64) * dim + rows  # column-major entry order
        uniq, inverse = np.unique(ckey, return_inverse=True)
        self.h_slot_of_entry = inverse
        self.h_nnz = len(uniq)
        self.h_indices = (uniq % dim).astype(np.int32)
        ucols = uniq // dim
        self.h_indptr = np.searchsorted(ucols, np.arange(dim + 1)).astype(np.int32)
        self.h_diag_slots = np.nonzero(self.h_indices == ucols)[0]
        self.dim = dim

        b_rows = []
        for base in (self.F, self.T):
            r = (3 * red[base])[:, None] + offs[None, :]
            b_rows.append(np.broadcast_to(r, (self.m, 3)).ravel())
        b_rows = np.concatenate(b_rows)
        self.b_keep = b_rows >= 0
        self.b_rows = b_rows[self.b_keep]

    def poses_from(self, g: PoseGraph) -> np.ndarray:
        return np.array([g.vertices[v].pose.to_vec() for v in self.ids])

    def residuals(self, P: np.ndarray) -> np.ndarray:
        ti, tj = P[self.F, :2], P[self.T, :2]
        thi = P[self.F, 2]
        ci, si = np.cos(thi), np.sin(thi)
        dx = tj[:, 0] - ti[:, 0]
        dy = tj[:, 1] - ti[:, 1]
        hx = ci * dx + si * dy
        hy = -si * dx + ci * dy
        hth = P[self.T, 2] - thi
        r = np.empty((self.m, 3))
        ex, ey = hx - self.meas[:, 0], hy - self.meas[:, 1]
        r[:, 0] = self.Rmt[:, 0, 0] * ex + self.Rmt[:, 0, 1] * ey
        r[:, 1] = self.Rmt[:, 1, 0] * ex + self.Rmt[:, 1, 1] * ey
        r[:, 2] = normalize_angles(hth - self.meas[:, 2])
        return r

    def squared_errors(self, P: np.ndarray) -> np.ndarray:
        r = self.residuals(P)
        return np.einsum("ei,eij,ej->e", r, self.L, r)

    def chi2(self, P: np.ndarray, kernel: Huber | None) -> float:
        s = self.squared_errors(P)
        return float(np.sum(kernel.rho(s) if kernel else s))

    def jacobians(self, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ti, tj = P[self.F, :2], P[self.T, :2]
        thi = P[self.F, 2]
        ci, si = np.cos(thi), np.sin(thi)
        dx = tj[:, 0] - ti[:, 0]
        dy = tj[:, 1] - ti[:, 1]
        Hi = np.zeros((self.m, 3, 3))
        Hi[:, 0, 0] = -ci
        Hi[:, 0, 1] = -si
        Hi[:, 0, 2] = -si * dx + ci * dy
        Hi[:, 1, 0] = si
        Hi[:, 1, 1] = -ci
        Hi[:, 1, 2] = -ci * dx - si * dy
        Hi[:, 2, 2] = -1.0
        Hj = np.zeros((self.m, 3, 3))
        Hj[:, 0, 0] = ci
        Hj[:, 0, 1] = si
        Hj[:, 1, 0] = -si
        Hj[:, 1, 1] = ci
        Hj[:, 2, 2] = 1.0
        return self.Rmt @ Hi, self.Rmt @ Hj

    def normal_equations(self, P: np.ndarray, kernel: Huber | None):
        """Gauss-Newton H (as csc data) and gradient b at the given poses."""
        r = self.residuals(P)
        s = np.einsum("ei,eij,ej->e", r, self.L, r)
        w = kernel.weight(s) if kernel else np.ones(self.m)
        Lw = self.L * w[:, None, None]
        A, B = self.jacobians(P)
        AtL = np.einsum("eji,ejk->eik", A, Lw)
        BtL = np.einsum("eji,ejk->eik", B, Lw)
        AtLB = AtL @ B
        blocks = np.concatenate(
            [
                (AtL @ A).ravel(),
                AtLB.ravel(),
                AtLB.transpose(0, 2, 1).ravel(),
                (BtL @ B).ravel(),
            ]
        )
        h_data = np.bincount(
            self.h_slot_of_entry, weights=blocks[self.h_keep], minlength=self.h_nnz
        )
        bi = np.einsum("eij,ej->ei", AtL, r)
        bj = np.einsum("eij,ej->ei", BtL, r)
        b_entries = np.concatenate([bi.ravel(), bj.ravel()])[self.b_keep]
        b = np.bincount(self.b_rows, weights=b_entries, minlength=self.dim)
        return h_data, b

    def damped_matrix(self, h_data: np.ndarray, lam: float) -> sp.csc_matrix:
        data = h_data.copy()
        data[self.h_diag_slots] += lam * h_data[self.h_diag_slots]
        return sp.csc_matrix(
            (data, self.h_indices, self.h_indptr), shape=(self.dim, self.dim), copy=False
        )

    def apply_step(self, P: np.ndarray, dx: np.ndarray) -> np.ndarray:
        Q = P.copy()
        step = dx.reshape(-1, 3)
        Q[self.free_slots, 0] += step[:, 0]
        Q[self.free_slots, 1] += step[:, 1]
        Q[self.free_slots, 2] = normalize_angles(Q[self.free_slots, 2] + step[:, 2])
        return Q


def _solve_damped(prob: _Problem, h_data: np.ndarray, b: np.ndarray, lam: float) -> np.ndarray | None:
    Hd = prob.damped_matrix(h_data, lam)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MatrixRankWarning)
        try:
            dx = spsolve(Hd, -b)
        except RuntimeError:
            return None
    if not np.all(np.isfinite(dx)):
        return None
    return dx


def optimize(g: PoseGraph, cfg: OptimizerConfig | None = None) -> tuple[PoseGraph, OptimizeStats]:
    """Minimize the total (kernelized) edge error; the gauge vertex stays put.

    Returns an optimized copy of the graph and per-iteration chi2 values.
    A graph that stops improving before `max_iterations` is reported as
    converged; hitting the iteration cap returns the best iterate with
    ``converged=False``.
    """
    cfg = cfg or OptimizerConfig()
    if not g.vertices:
        raise SolverError("empty graph")
    gauge = cfg.gauge_id if cfg.gauge_id is not None else g.effective_gauge()
    if gauge not in g.vertices:
        raise SolverError(f"gauge vertex {gauge} not in graph")
    if not g.is_connected():
        raise SolverError("graph is disconnected; the normal equations are singular")
    stats = OptimizeStats()
    out = g.copy()
    if not g.edges or len(g.vertices) == 1:
        stats.converged = True
        stats.message = "nothing to optimize"
        stats.chi2_sequence = [0.0]
        return out, stats

    prob = _Problem(g, gauge)
    P = prob.poses_from(g)
    cur = prob.chi2(P, cfg.kernel)
    stats.chi2_sequence.append(cur)
    if cur < _CHI2_FLOOR:
        stats.converged = True
        stats.message = "already optimal"
        return out, stats

    lam = cfg.damping_init
    for it in range(cfg.max_iterations):
        h_data, b = prob.normal_equations(P, cfg.kernel)
        accepted = False
        while lam <= _LAMBDA_MAX:
            dx = _solve_damped(prob, h_data, b, lam)
            if dx is not None:
                Q = prob.apply_step(P, dx)
                new = prob.chi2(Q, cfg.kernel)
                if new < cur:
                    P, cur = Q, new
                    lam = max(lam / cfg.damping_scale, _LAMBDA_MIN)
                    accepted = True
                    break
            lam *= cfg.damping_scale
        stats.iterations = it + 1
        if not accepted:
            if dx is None and lam > _LAMBDA_MAX:
                raise SolverError("normal equations singular even with heavy damping")
            stats.converged = True
            stats.message = "no improving step"
            break
        stats.chi2_sequence.append(cur)
        prev = stats.chi2_sequence[-2]
        if cur < _CHI2_FLOOR or (prev - cur) <= cfg.rel_decrease * max(prev, 1e-300):
            stats.converged = True
            stats.message = "chi2 decrease below threshold"
            break
    else:
        stats.message = "max iterations reached"

    for k, vid in enumerate(prob.ids):
        out.vertices[vid].pose = Pose2(P[k, 0], P[k, 1], P[k, 2])
    return out, stats


def chi2(g: PoseGraph, kernel: Huber | None = None) -> float:
    """Total (kernelized) squared error of all edges at the current poses."""
    if not g.edges:
        return 0.0
    prob = _Problem(g, g.effective_gauge())
    return prob.chi2(prob.poses_from(g), kernel)
