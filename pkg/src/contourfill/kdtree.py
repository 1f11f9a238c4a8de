"""2-d k-d tree over pixel coordinates.

Stores the tree in flat arrays and answers radius queries for whole query
batches at once (every node processes a vector of still-active queries),
which keeps per-iteration scoring cheap even when the binarized network
output contains thousands of points.
"""

from __future__ import annotations

import numpy as np


class KDTree:
    def __init__(self, points):
        pts = np.asarray(points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 2)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"KDTree expects an (N, 2) array, got {pts.shape}")
        self.points = pts
        n = len(pts)
        self._index = np.empty(n, dtype=np.intp)   # original point index per node
        self._axis = np.empty(n, dtype=np.int8)
        self._left = np.full(n, -1, dtype=np.intp)
        self._right = np.full(n, -1, dtype=np.intp)
        self._count = 0
        self._root = self._build(np.arange(n, dtype=np.intp), 0) if n else -1

    def __len__(self) -> int:
        return len(self.points)

    def _build(self, idx: np.ndarray, depth: int) -> int:
        axis = depth % 2
        node = self._count
        self._count += 1
        self._axis[node] = axis
        if len(idx) == 1:
            self._index[node] = idx[0]
            return node
        mid = len(idx) // 2
        order = np.argpartition(self.points[idx, axis], mid)
        self._index[node] = idx[order[mid]]
        left, right = idx[order[:mid]], idx[order[mid + 1 :]]
        if len(left):
            self._left[node] = self._build(left, depth + 1)
        if len(right):
            self._right[node] = self._build(right, depth + 1)
        return node

    def nearest(self, query) -> tuple[float, int]:
        """Distance to, and original index of, the nearest stored point."""
        if not len(self.points):
            raise ValueError("nearest() on an empty tree")
        q = np.asarray(query, dtype=np.float64)
        best_d2 = np.inf
        best_i = -1
        stack = [self._root]
        while stack:
            node = stack.pop()
            if node < 0:
                continue
            p = self.points[self._index[node]]
            d2 = (q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2
            if d2 < best_d2:
                best_d2, best_i = d2, self._index[node]
            axis = self._axis[node]
            gap = q[axis] - p[axis]
            near, far = (self._left[node], self._right[node]) if gap < 0 else (
                self._right[node],
                self._left[node],
            )
            if gap * gap <= best_d2:
                stack.append(far)
            stack.append(near)
        return float(np.sqrt(best_d2)), int(best_i)

    def has_within(self, queries, radius: float) -> np.ndarray:
        """Boolean per query: is any stored point within ``radius`` of it?"""
        matched, _ = self.mark_matches(queries, radius)
        return matched

    def mark_matches(self, queries, radius: float) -> tuple[np.ndarray, np.ndarray]:
        """Batched radius matching in one traversal.

        Returns ``(matched, covered)`` where ``matched[i]`` says query i has
        a stored point within ``radius`` and ``covered[j]`` says stored
        point j has a query within ``radius``.
        """
        q = np.asarray(queries, dtype=np.float64)
        if q.size == 0:
            q = q.reshape(0, 2)
        if q.ndim != 2 or q.shape[1] != 2:
            raise ValueError(f"queries must be (M, 2), got {q.shape}")
        m = len(q)
        matched = np.zeros(m, dtype=bool)
        covered = np.zeros(len(self.points), dtype=bool)
        if not len(self.points) or not m:
            return matched, covered
        r2 = float(radius) * float(radius)
        stack: list[tuple[int, np.ndarray]] = [(self._root, np.arange(m, dtype=np.intp))]
        while stack:
            node, active = stack.pop()
            if node < 0 or not len(active):
                continue
            pi = self._index[node]
            p = self.points[pi]
            dq = q[active]
            d2 = (dq[:, 0] - p[0]) ** 2 + (dq[:, 1] - p[1]) ** 2
            hit = d2 <= r2
            if hit.any():
                covered[pi] = True
                matched[active[hit]] = True
            axis = self._axis[node]
            qa = dq[:, axis]
            left, right = self._left[node], self._right[node]
            if left >= 0:
                stack.append((left, active[qa - radius <= p[axis]]))
            if right >= 0:
                stack.append((right, active[qa + radius >= p[axis]]))
        return matched, covered
