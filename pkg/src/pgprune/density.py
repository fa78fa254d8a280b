"""Vertex density measures and the 2D spatial index backing them.

The r-density of a point is the neighbor count strictly inside radius r
divided by the disc area pi*r^2. Integrating the r-density over all radii
gives a scale-invariant density with the closed form

    d(v_i) = (1/pi) * sum_k 1 / ||v_k - v_i||

over all other points; scaling every position by s scales the density by
1/s. For practical use the sum is truncated to the N nearest neighbors.

The spatial index is a uniform bucket grid sized by the median
nearest-neighbor distance. Removals only flip an active flag; the buckets
are rebuilt lazily once enough points are gone, which suits the
removal-heavy access pattern of graph pruning. Queries touch only a few
dozen candidates, so the inner loops run on plain floats rather than
numpy arrays.
"""

from __future__ import annotations

import math

import numpy as np

# pairwise distances below this are clamped to avoid division blow-up on
# (near-)duplicate positions, which the density formulas assume never occur
EPS_MIN = 1e-6

_REBUILD_FRACTION = 0.3


class DensityError(ValueError):
    pass


class PointSet:
    """2D points keyed by vertex id, with k-NN and radius queries."""

    def __init__(self, positions: dict[int, "np.ndarray | tuple[float, float]"]):
        if not positions:
            raise DensityError("PointSet needs at least one point")
        self._ids = sorted(int(i) for i in positions)
        self._coords = [(float(positions[i][0]), float(positions[i][1])) for i in self._ids]
        if not all(math.isfinite(x) and math.isfinite(y) for x, y in self._coords):
            raise DensityError("positions must be finite")
        self._active = [True] * len(self._ids)
        self._slot = {vid: k for k, vid in enumerate(self._ids)}
        self._n_active = len(self._ids)
        self._removed_since_build = 0
        self.clamp_count = 0  # times a pairwise distance was clamped to EPS_MIN
        self._build_buckets()

    # -- index maintenance ---------------------------------------------------

    def _build_buckets(self) -> None:
        pts = [c for c, a in zip(self._coords, self._active) if a]
        xy = np.array(pts) if pts else np.empty((0, 2))
        self._cell = self._median_nn_distance(xy) if len(pts) > 1 else 1.0
        self._cell = max(self._cell, EPS_MIN)
        self._buckets: dict[tuple[int, int], list[int]] = {}
        inv_cell = 1.0 / self._cell
        for slot, ((x, y), act) in enumerate(zip(self._coords, self._active)):
            if not act:
                continue
            key = (math.floor(x * inv_cell), math.floor(y * inv_cell))
            self._buckets.setdefault(key, []).append(slot)
        self._removed_since_build = 0
        if len(pts):
            span = xy.max(axis=0) - xy.min(axis=0)
            self._extent = float(math.hypot(span[0], span[1])) + self._cell
        else:
            self._extent = self._cell

    @staticmethod
    def _median_nn_distance(xy: np.ndarray) -> float:
        n = len(xy)
        nn = np.empty(n)
        step = 512
        for lo in range(0, n, step):
            hi = min(lo + step, n)
            d2 = ((xy[lo:hi, None, :] - xy[None, :, :]) ** 2).sum(axis=2)
            for r in range(hi - lo):
                d2[r, lo + r] = np.inf
            nn[lo:hi] = np.sqrt(d2.min(axis=1))
        med = float(np.median(nn))
        return med if med > 0 else 1.0

    def remove(self, vid: int) -> None:
        slot = self._slot[int(vid)]
        if not self._active[slot]:
            raise DensityError(f"point {vid} already removed")
        self._active[slot] = False
        self._n_active -= 1
        self._removed_since_build += 1
        if self._n_active and self._removed_since_build > _REBUILD_FRACTION * self._n_active:
            self._build_buckets()

    # -- queries ---------------------------------------------------------------

    def size(self) -> int:
        return self._n_active

    def active_ids(self) -> list[int]:
        return [vid for vid, act in zip(self._ids, self._active) if act]

    def position(self, vid: int) -> np.ndarray:
        return np.array(self._coords[self._slot[int(vid)]])

    def _require_active(self, vid: int) -> int:
        slot = self._slot.get(int(vid))
        if slot is None or not self._active[slot]:
            raise DensityError(f"unknown or removed point {vid}")
        return slot

    def _ring_candidates(self, cx: int, cy: int, ring: int, out: list[int]) -> None:
        buckets = self._buckets
        active = self._active
        if ring == 0:
            cells = ((cx, cy),)
        else:
            cells = []
            for dx in range(-ring, ring + 1):
                cells.append((cx + dx, cy - ring))
                cells.append((cx + dx, cy + ring))
            for dy in range(-ring + 1, ring):
                cells.append((cx - ring, cy + dy))
                cells.append((cx + ring, cy + dy))
        for key in cells:
            lst = buckets.get(key)
            if lst:
                out.extend(c for c in lst if active[c])

    def neighbors_within(self, vid: int, r: float) -> list[int]:
        """Ids of other points strictly closer than r, unordered."""
        slot = self._require_active(vid)
        px, py = self._coords[slot]
        inv_cell = 1.0 / self._cell
        span = math.floor(r * inv_cell) + 1
        cx, cy = math.floor(px * inv_cell), math.floor(py * inv_cell)
        coords = self._coords
        active = self._active
        r2 = r * r
        found: list[int] = []
        for ix in range(cx - span, cx + span + 1):
            for iy in range(cy - span, cy + span + 1):
                lst = self._buckets.get((ix, iy))
                if not lst:
                    continue
                for c in lst:
                    if c == slot or not active[c]:
                        continue
                    x, y = coords[c]
                    if (x - px) ** 2 + (y - py) ** 2 < r2:
                        found.append(self._ids[c])
        return found

    def knn(self, vid: int, k: int) -> list[int]:
        """The k nearest other points, ascending by distance, ties by lower id."""
        if k < 1:
            raise DensityError("k must be >= 1")
        slot = self._require_active(vid)
        total_others = self._n_active - 1
        if total_others <= 0:
            return []
        px, py = self._coords[slot]
        inv_cell = 1.0 / self._cell
        cx, cy = math.floor(px * inv_cell), math.floor(py * inv_cell)
        coords = self._coords
        ids = self._ids
        items: list[tuple[float, int]] = []  # (squared distance, id)
        ring = 0
        cand: list[int] = []
        while True:
            cand.clear()
            self._ring_candidates(cx, cy, ring, cand)
            for c in cand:
                if c == slot:
                    continue
                x, y = coords[c]
                items.append(((x - px) ** 2 + (y - py) ** 2, ids[c]))
            if len(items) >= total_others:
                break
            if len(items) >= k:
                items.sort()
                # every unexplored point is farther than ring*cell
                if items[k - 1][0] <= (ring * self._cell) ** 2:
                    break
            ring += 1
            if ring * self._cell > self._extent:
                break
        items.sort()
        return [vid_ for _, vid_ in items[:k]]

    def _inverse_distance_sum(self, slot: int, neighbor_slots: list[int]) -> float:
        px, py = self._coords[slot]
        coords = self._coords
        total = 0.0
        clamped = 0
        for c in neighbor_slots:
            x, y = coords[c]
            d = math.hypot(x - px, y - py)
            if d < EPS_MIN:
                d = EPS_MIN
                clamped += 1
            total += 1.0 / d
        if clamped:
            self.clamp_count += clamped
        return total

    # -- density measures -------------------------------------------------------

    def r_density(self, vid: int, r: float) -> float:
        """Neighbors strictly within r, divided by the disc area."""
        if r <= 0:
            raise DensityError("radius must be positive")
        count = len(self.neighbors_within(vid, r))
        return count / (math.pi * r * r)

    def sid_exact(self, vid: int) -> float:
        """Scale-invariant density over all other points."""
        slot = self._require_active(vid)
        others = [c for c in range(len(self._coords)) if self._active[c] and c != slot]
        if not others:
            return 0.0
        return self._inverse_distance_sum(slot, others) / math.pi

    def sid_truncated(self, vid: int, n_hat: int) -> float:
        """Scale-invariant density truncated to the n_hat nearest neighbors."""
        if n_hat < 1:
            raise DensityError("neighbor truncation must be >= 1")
        if self._n_active < 2:
            return 0.0
        return self.sid_of_neighbors(vid, self.knn(vid, n_hat))

    def sid_of_neighbors(self, vid: int, neighbor_ids: list[int]) -> float:
        """Scale-invariant density contribution of an explicit neighbor list."""
        slot = self._require_active(vid)
        if not neighbor_ids:
            return 0.0
        nbr_slots = [self._slot[int(i)] for i in neighbor_ids]
        return self._inverse_distance_sum(slot, nbr_slots) / math.pi


def r_density(ps: PointSet, vid: int, r: float) -> float:
    return ps.r_density(vid, r)


def sid_exact(ps: PointSet, vid: int) -> float:
    return ps.sid_exact(vid)


def sid_truncated(ps: PointSet, vid: int, n_hat: int) -> float:
    return ps.sid_truncated(vid, n_hat)


def knn(ps: PointSet, vid: int, k: int) -> list[int]:
    return ps.knn(vid, k)
