"""Shortest-path distances on weighted graphs.

The reference implementation is binary-heap Dijkstra with lazy deletion;
it defines the semantics (exact distances, +inf when unreachable).  Bulk
multi-source runs are delegated to scipy's compiled Dijkstra, which is
checked against the reference in the test suite.

Query endpoints outside the point cloud are handled by augmenting the
graph with up to two extra vertices; only the endpoint adjacency lists are
built, at O(n) extra cost per query.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse import csgraph

from .factors import ConformalFactor
from .geometry import PointCloud, as_point
from .graphs import (
    Ball,
    GraphKind,
    Knn,
    WeightedGraph,
    build_graph,
    check_resolution,
    edge_weights,
)


@dataclass
class PathResult:
    """Distance plus (optionally) the realizing vertex sequence.

    ``vertex_path`` lists graph vertex indices; query endpoints added to
    the graph get indices n and n+1.  It is empty when the target is
    unreachable or path recovery was not requested.
    """

    distance: float
    vertex_path: list[int] = field(default_factory=list)


def _heap_dijkstra(indptr, indices, weights, n, source, want_predecessors=False):
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    pred = np.full(n, -1, dtype=np.int64) if want_predecessors else None
    done = np.zeros(n, dtype=bool)
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for idx in range(indptr[u], indptr[u + 1]):
            v = indices[idx]
            nd = d + weights[idx]
            if nd < dist[v]:
                dist[v] = nd
                if pred is not None:
                    pred[v] = u
                heapq.heappush(heap, (nd, v))
    return (dist, pred) if want_predecessors else dist


def dijkstra(graph: WeightedGraph, source: int) -> np.ndarray:
    """Exact single-source distances to every vertex (+inf if unreachable)."""
    if not 0 <= source < graph.n:
        raise IndexError(f"source index {source} out of range [0, {graph.n})")
    return _heap_dijkstra(graph.indptr, graph.indices, graph.weights,
                          graph.n, source)


def _csr_distances(indptr, indices, weights, n, sources, want_predecessors=False):
    matrix = csr_matrix((weights, indices, indptr), shape=(n, n))
    return csgraph.dijkstra(
        matrix, directed=True, indices=sources,
        return_predecessors=want_predecessors,
    )


def dijkstra_matrix(graph: WeightedGraph, sources, engine: str = "scipy") -> np.ndarray:
    """Distances from each source to every vertex, one row per source.

    ``engine="scipy"`` uses the compiled path; ``engine="reference"`` runs
    the heap implementation per source.  Both are exact.
    """
    sources = np.asarray(sources, dtype=np.int64)
    if sources.ndim != 1:
        raise ValueError("sources must be a 1-D index sequence")
    if sources.size and (sources.min() < 0 or sources.max() >= graph.n):
        raise IndexError("source index out of range")
    if engine == "reference":
        return np.vstack([dijkstra(graph, int(s)) for s in sources])
    if engine != "scipy":
        raise ValueError(f"unknown engine {engine!r}")
    return np.atleast_2d(
        _csr_distances(graph.indptr, graph.indices, graph.weights,
                       graph.n, sources)
    )


def _knn_reverse_hits(rank_dists, d_new, d_other, other_wins_ties):
    """Base vertices whose k-nearest set, after augmentation, contains the
    new point.

    ``rank_dists[:, 1]`` is each vertex's kth-nearest base distance,
    ``rank_dists[:, 0]`` its (k-1)th.  Base points win distance ties
    against new points (smaller index); between the two new points the one
    added first wins, controlled by ``other_wins_ties``.
    """
    kth = rank_dists[:, 1]
    kth_minus = rank_dists[:, 0]
    if d_other is None:
        return d_new < kth
    other_better = d_other <= d_new if other_wins_ties else d_other < d_new
    return np.where(other_better, d_new < kth_minus, d_new < kth)


def _knn_forward_set(d_base, k, other_id=None, d_other=None):
    """k nearest candidates of a new vertex among the base cloud plus,
    optionally, the other new vertex (appended last so it loses ties)."""
    if other_id is None:
        cand_d = d_base
        cand_ids = np.arange(d_base.size, dtype=np.int64)
    else:
        cand_d = np.append(d_base, d_other)
        cand_ids = np.append(np.arange(d_base.size, dtype=np.int64), other_id)
    order = np.argsort(cand_d, kind="stable")[:k]
    return {int(cand_ids[o]) for o in order}


def _augmented_arrays(graph: WeightedGraph, cloud: PointCloud, factor,
                      q, x, y, x_id, y_id):
    """Directed CSR arrays for the graph over the cloud plus new endpoints."""
    coords = cloud.coords
    n = cloud.n
    new_points = []
    if x_id >= n:
        new_points.append((x_id, x))
    if y_id >= n:
        new_points.append((y_id, y))
    total = n + len(new_points)

    extra_u: list[int] = []
    extra_v: list[int] = []
    pts_a: list[np.ndarray] = []
    pts_b: list[np.ndarray] = []

    def connect(a_id, a_point, b_id, b_point):
        extra_u.append(a_id)
        extra_v.append(int(b_id))
        pts_a.append(a_point)
        pts_b.append(b_point)

    if new_points:
        dist_to_base = {pid: np.linalg.norm(coords - p, axis=1)
                        for pid, p in new_points}
        two = len(new_points) == 2
        d_xy = float(np.linalg.norm(x - y)) if two else None

        if isinstance(graph.kind, Ball):
            r = graph.kind.r
            for pid, p in new_points:
                for b in np.nonzero(dist_to_base[pid] <= r)[0]:
                    connect(pid, p, b, coords[b])
            if two and d_xy <= r:
                connect(x_id, x, y_id, y)
        elif isinstance(graph.kind, Knn):
            k = graph.kind.k
            rank_dists = graph.knn_rank_dists
            if rank_dists is None:
                raise ValueError("k-NN graph lacks stored rank distances")
            cross_edge = False
            for pos, (pid, p) in enumerate(new_points):
                d_self = dist_to_base[pid]
                if two:
                    other_id = new_points[1 - pos][0]
                    forward = _knn_forward_set(d_self, k, other_id, d_xy)
                    # the earlier-added endpoint wins ties against the later
                    reverse_hits = _knn_reverse_hits(
                        rank_dists, d_self, dist_to_base[other_id],
                        other_wins_ties=(pos == 1),
                    )
                    if other_id in forward:
                        cross_edge = True
                else:
                    forward = _knn_forward_set(d_self, k)
                    reverse_hits = _knn_reverse_hits(rank_dists, d_self,
                                                     None, False)
                targets = sorted(
                    t for t in forward.union(
                        int(i) for i in np.nonzero(reverse_hits)[0])
                    if t < n
                )
                for b in targets:
                    connect(pid, p, b, coords[b])
            if two and cross_edge:
                connect(x_id, x, y_id, y)
        else:
            raise TypeError(f"unknown graph kind: {graph.kind!r}")

    if extra_u:
        w_new = edge_weights(factor, q, np.asarray(pts_a), np.asarray(pts_b))
        dir_u = np.concatenate([graph.edge_u, graph.edge_v, extra_u, extra_v])
        dir_v = np.concatenate([graph.edge_v, graph.edge_u, extra_v, extra_u])
        dir_w = np.concatenate([graph.edge_w, graph.edge_w, w_new, w_new])
    else:
        dir_u = np.concatenate([graph.edge_u, graph.edge_v])
        dir_v = np.concatenate([graph.edge_v, graph.edge_u])
        dir_w = np.concatenate([graph.edge_w, graph.edge_w])
    order = np.lexsort((dir_v, dir_u))
    counts = np.bincount(dir_u, minlength=total)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return indptr, dir_v[order], dir_w[order], total


def query_distance(cloud: PointCloud, x, y, kind: GraphKind,
                   factor: ConformalFactor, q, *,
                   base_graph: WeightedGraph | None = None,
                   with_path: bool = False) -> PathResult:
    """Graph metric between two query points over the cloud.

    Builds (or reuses) the graph over the cloud, adds the endpoints as
    vertices when they are not already present, and returns the minimum
    total edge weight over graph paths (+inf when unreachable).  Endpoints
    coinciding with existing points reuse that vertex: no duplicates.
    """
    q = check_resolution(q)
    x = as_point(x)
    y = as_point(y)
    if x.size != cloud.dim or y.size != cloud.dim:
        raise ValueError("query points must match the cloud dimension")
    if base_graph is None:
        base_graph = build_graph(cloud, kind, factor, q)
    else:
        if base_graph.kind != kind or base_graph.resolution != q:
            raise ValueError("base graph parameters do not match the query")
        if not base_graph.cloud.same_cloud(cloud):
            raise ValueError("base graph is over a different cloud")

    if np.array_equal(x, y):
        match = cloud.find_point(x)
        vid = match if match is not None else cloud.n
        return PathResult(0.0, [int(vid)] if with_path else [])

    n = cloud.n
    x_match = cloud.find_point(x)
    y_match = cloud.find_point(y)
    x_id = x_match if x_match is not None else n
    y_id = y_match if y_match is not None else (n if x_match is not None else n + 1)

    indptr, indices, weights, total = _augmented_arrays(
        base_graph, cloud, factor, q, x, y, x_id, y_id
    )
    if with_path:
        dist, pred = _heap_dijkstra(indptr, indices, weights, total, x_id,
                                    want_predecessors=True)
        d = float(dist[y_id])
        path: list[int] = []
        if np.isfinite(d):
            at = y_id
            while at != -1:
                path.append(int(at))
                at = int(pred[at]) if at != x_id else -1
            path.reverse()
        return PathResult(d, path)
    dist = _csr_distances(indptr, indices, weights, total, [x_id])
    return PathResult(float(np.atleast_2d(dist)[0, y_id]))
