"""WPGMA agglomerative clustering of Affect Grid responses."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = ["Merge", "Dendrogram", "Clustering", "wpgma", "cut"]


class Merge(NamedTuple):
    node_a: int
    node_b: int
    height: float
    new_node: int


@dataclass(frozen=True, eq=False)
class Dendrogram:
    """Merge list for n points; leaves are nodes 0..n-1, merge k creates node n + k."""

    points: np.ndarray
    merges: tuple[Merge, ...]

    @property
    def n(self) -> int:
        return len(self.points)

    def linkage_matrix(self) -> np.ndarray:
        """scipy-style (n-1) x 4 linkage matrix: [node_a, node_b, height, size]."""
        size = {i: 1 for i in range(self.n)}
        rows = []
        for m in self.merges:
            size[m.new_node] = size[m.node_a] + size[m.node_b]
            rows.append([m.node_a, m.node_b, m.height, size[m.new_node]])
        return np.array(rows, dtype=float).reshape(-1, 4)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "points": self.points.tolist(),
            "merges": [{"a": m.node_a, "b": m.node_b, "height": m.height, "node": m.new_node} for m in self.merges],
        }


def wpgma(points, tie_tol: float = 1e-12) -> Dendrogram:
    """Weighted pair-group average linkage on Euclidean distances.

    After merging A and B, d(A+B, C) = (d(A, C) + d(B, C)) / 2 whatever the
    cluster sizes. Among pairs tied at the minimum distance (within
    ``tie_tol``) the pair with the smallest (node_a, node_b) ids merges first.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = len(pts)
    if n < 2:
        raise ValueError("need at least two points to cluster")
    if not np.all(np.isfinite(pts)):
        raise ValueError("coordinates must be finite")

    dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    np.fill_diagonal(dist, np.inf)
    node = np.arange(n)  # node id held by each slot
    alive = np.ones(n, dtype=bool)
    merges = []
    for k in range(n - 1):
        live = np.flatnonzero(alive)
        sub = dist[np.ix_(live, live)]
        lo = sub.min()
        ii, jj = np.nonzero(np.triu(sub <= lo + tie_tol, k=1))
        ids = np.sort(np.column_stack([node[live[ii]], node[live[jj]]]), axis=1)
        pick = np.lexsort((ids[:, 1], ids[:, 0]))[0]
        si, sj = live[ii[pick]], live[jj[pick]]
        a, b = sorted((int(node[si]), int(node[sj])))
        merges.append(Merge(a, b, float(dist[si, sj]), n + k))
        # slot si takes the merged cluster
        new = (dist[si] + dist[sj]) / 2
        dist[si, :] = new
        dist[:, si] = new
        dist[si, si] = np.inf
        dist[sj, :] = np.inf
        dist[:, sj] = np.inf
        alive[sj] = False
        node[si] = n + k
    return Dendrogram(pts, tuple(merges))


@dataclass(frozen=True, eq=False)
class Clustering:
    labels: np.ndarray
    names: tuple[str, ...]
    shares: np.ndarray
    mean_pleasant: np.ndarray


def cut(d: Dendrogram, k: int) -> Clustering:
    """Undo the k-1 highest merges; clusters are numbered by descending mean first coordinate.

    For k = 2 the clusters are named "Pleasant" and "Unpleasant".
    """
    if not 1 <= k <= d.n:
        raise ValueError(f"k must lie in 1..{d.n}")
    parent = list(range(2 * d.n - 1))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for m in d.merges[: d.n - k]:
        parent[m.node_a] = m.new_node
        parent[m.node_b] = m.new_node
    roots = np.array([find(i) for i in range(d.n)])
    uniq = np.unique(roots)
    means = np.array([d.points[roots == r, 0].mean() for r in uniq])
    order = np.lexsort((uniq, -means))
    relabel = {int(uniq[o]): rank for rank, o in enumerate(order)}
    labels = np.array([relabel[int(r)] for r in roots])
    shares = np.bincount(labels, minlength=k) / d.n
    names = ("Pleasant", "Unpleasant") if k == 2 else tuple(f"cluster{i + 1}" for i in range(k))
    return Clustering(labels, names, shares, means[order])
