"""Neighborhood graphs over point clouds with factor-weighted edges.

Two graph kinds: the r-ball graph (edge iff the endpoints are within r)
and the symmetric k-nearest-neighbor graph (edge iff either endpoint is
among the k nearest of the other, self excluded, distance ties broken by
smaller point index).  Edge weights average the conformal factor along the
straight segment between the endpoints at a chosen resolution q; q = inf
means the exact segment integral.

Brute-force O(n^2) pair scans define the edge-set semantics.  Construction
is blocked internally for memory; block size never changes results.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .factors import ConformalFactor
from .geometry import PointCloud, pairwise_distances

INFINITE_RESOLUTION = math.inf

# Edges per chunk when evaluating weights; memory knob only.
WEIGHT_CHUNK = 1 << 16
# Factor evaluations per chunk in exact-integral refinement.
NODE_CHUNK = 1 << 20


@dataclass(frozen=True)
class Ball:
    """r-ball graph kind: connect points at Euclidean distance <= r."""

    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("ball threshold r must be positive")


@dataclass(frozen=True)
class Knn:
    """k-NN graph kind: connect mutual-or nearest neighbors."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


GraphKind = Ball | Knn


def check_resolution(q) -> float | int:
    """Validate a weight resolution: an integer >= 2 or infinity."""
    if q == INFINITE_RESOLUTION:
        return INFINITE_RESOLUTION
    if isinstance(q, (int, np.integer)) or (isinstance(q, float) and q.is_integer()):
        q = int(q)
        if q >= 2:
            return q
    raise ValueError(f"resolution must be an integer >= 2 or inf, got {q!r}")


def parse_resolution(text) -> float | int:
    """Parse a resolution from CLI text; 'inf' selects the exact integral."""
    if isinstance(text, str) and text.strip().lower() in ("inf", "infinity"):
        return INFINITE_RESOLUTION
    return check_resolution(int(text) if isinstance(text, str) else text)


def _trapezoid_coefficients(q: int) -> np.ndarray:
    coef = np.full(q, 1.0 / (q - 1))
    coef[0] = coef[-1] = 0.5 / (q - 1)
    return coef


def _refined_segment_means(factor: ConformalFactor, starts, ends, dists) -> np.ndarray:
    """Per-edge trapezoid refinement until the Lipschitz error bound for
    q-point weights guarantees a relative accuracy of 1e-9."""
    out = np.empty(dists.size)
    kappa = factor.kappa
    for i in range(dists.size):
        d = dists[i]
        if d == 0.0:
            out[i] = factor.evaluate_many(starts[i][None, :])[0]
            continue
        if kappa == 0.0:
            nodes = 2
        else:
            # error kappa*d^2 / (4*(Q-1)) below 1e-9 * d
            nodes = int(math.ceil(1.0 + kappa * d / 4e-9)) + 1
        total = 0.0
        direction = ends[i] - starts[i]
        for lo in range(0, nodes, NODE_CHUNK):
            hi = min(lo + NODE_CHUNK, nodes)
            ts = np.arange(lo, hi, dtype=np.float64) / (nodes - 1)
            vals = factor.evaluate_many(starts[i] + ts[:, None] * direction)
            if lo == 0:
                vals[0] *= 0.5
            if hi == nodes:
                vals[-1] *= 0.5
            total += float(np.sum(vals))
        out[i] = total / (nodes - 1)
    return out


def edge_weights(factor: ConformalFactor, q, starts, ends) -> np.ndarray:
    """Weights of edges from ``starts`` to ``ends`` (row-wise).

    For finite q this is the composite-trapezoid average of the factor over
    q equally spaced samples of the segment, times the segment length.  For
    q = inf it is the exact segment integral: a closed form when the factor
    provides one, otherwise a trapezoid refinement whose Lipschitz error
    bound is below 1e-9 times the segment length.
    """
    q = check_resolution(q)
    starts = np.atleast_2d(np.asarray(starts, dtype=np.float64))
    ends = np.atleast_2d(np.asarray(ends, dtype=np.float64))
    if starts.shape != ends.shape:
        raise ValueError("starts and ends must have matching shapes")
    dists = np.linalg.norm(ends - starts, axis=1)
    if q == INFINITE_RESOLUTION:
        means = factor.segment_mean(starts, ends)
        if means is None:
            means = _refined_segment_means(factor, starts, ends, dists)
        return dists * np.asarray(means)
    coef = _trapezoid_coefficients(q)
    ts = np.arange(q, dtype=np.float64) / (q - 1)
    means = np.empty(starts.shape[0])
    chunk = max(1, WEIGHT_CHUNK // q)
    for lo in range(0, starts.shape[0], chunk):
        hi = min(lo + chunk, starts.shape[0])
        seg = starts[lo:hi, None, :] + ts[None, :, None] * (
            ends[lo:hi, None, :] - starts[lo:hi, None, :]
        )
        vals = factor.evaluate_many(seg.reshape(-1, starts.shape[1]))
        means[lo:hi] = vals.reshape(hi - lo, q) @ coef
    return dists * means


def edge_weight(factor: ConformalFactor, q, x, y) -> float:
    """Weight of one edge; see :func:`edge_weights`."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    if x.shape != y.shape:
        raise ValueError("dimension mismatch between edge endpoints")
    return float(edge_weights(factor, q, x, y)[0])


class WeightedGraph:
    """Immutable undirected weighted graph over a point cloud.

    Stores the unique edge list (u < v) plus a CSR adjacency (indptr,
    indices, weights) with neighbor lists sorted by index.
    """

    __slots__ = (
        "cloud", "kind", "resolution", "factor",
        "edge_u", "edge_v", "edge_w",
        "indptr", "indices", "weights",
        "knn_rank_dists",
    )

    def __init__(self, cloud: PointCloud, kind: GraphKind, resolution, factor,
                 edge_u, edge_v, edge_w, knn_rank_dists=None):
        self.cloud = cloud
        self.kind = kind
        self.resolution = resolution
        self.factor = factor
        self.edge_u = np.asarray(edge_u, dtype=np.int64)
        self.edge_v = np.asarray(edge_v, dtype=np.int64)
        self.edge_w = np.asarray(edge_w, dtype=np.float64)
        # stored per-vertex (k-1)th and kth nearest distances, used to
        # augment k-NN graphs with query endpoints in O(n)
        self.knn_rank_dists = knn_rank_dists
        n = cloud.n
        dir_u = np.concatenate([self.edge_u, self.edge_v])
        dir_v = np.concatenate([self.edge_v, self.edge_u])
        dir_w = np.concatenate([self.edge_w, self.edge_w])
        order = np.lexsort((dir_v, dir_u))
        self.indices = dir_v[order]
        self.weights = dir_w[order]
        counts = np.bincount(dir_u, minlength=n)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        for arr in (self.edge_u, self.edge_v, self.edge_w,
                    self.indices, self.weights, self.indptr):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.cloud.n

    @property
    def num_edges(self) -> int:
        return self.edge_u.size

    def neighbors(self, vertex: int):
        lo, hi = self.indptr[vertex], self.indptr[vertex + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    def edge_keys(self) -> np.ndarray:
        return self.edge_u * self.n + self.edge_v

    def __repr__(self) -> str:
        return (
            f"WeightedGraph(n={self.n}, edges={self.num_edges}, "
            f"kind={self.kind}, q={self.resolution})"
        )


def _ball_edge_set(coords: np.ndarray, r: float, block: int = 512):
    n = coords.shape[0]
    all_u, all_v, all_d = [], [], []
    cols = np.arange(n)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        dmat = pairwise_distances(coords[lo:hi], coords)
        keep = (dmat <= r) & (cols[None, :] > np.arange(lo, hi)[:, None])
        rows, col_idx = np.nonzero(keep)
        all_u.append(rows + lo)
        all_v.append(col_idx)
        all_d.append(dmat[rows, col_idx])
    return (
        np.concatenate(all_u) if all_u else np.empty(0, dtype=np.int64),
        np.concatenate(all_v) if all_v else np.empty(0, dtype=np.int64),
        np.concatenate(all_d) if all_d else np.empty(0),
    )


def build_ball_graph(cloud: PointCloud, r: float, factor: ConformalFactor,
                     q) -> WeightedGraph:
    """Graph with an edge between every pair at distance <= r."""
    kind = Ball(float(r))
    q = check_resolution(q)
    u, v, _ = _ball_edge_set(cloud.coords, kind.r)
    w = edge_weights(factor, q, cloud.coords[u], cloud.coords[v])
    return WeightedGraph(cloud, kind, q, factor, u, v, w)


def knn_neighbor_table(coords: np.ndarray, k: int, block: int = 512):
    """(n, k) nearest-neighbor indices plus per-vertex (k-1)th/kth distances.

    Self is excluded; equal distances rank by smaller point index (stable
    sort order).
    """
    n = coords.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    nbr = np.empty((n, k), dtype=np.int64)
    rank_dists = np.empty((n, 2))
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        dmat = pairwise_distances(coords[lo:hi], coords)
        dmat[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        order = np.argsort(dmat, axis=1, kind="stable")[:, :k]
        nbr[lo:hi] = order
        sorted_d = np.take_along_axis(dmat, order, axis=1)
        rank_dists[lo:hi, 1] = sorted_d[:, k - 1]
        rank_dists[lo:hi, 0] = sorted_d[:, k - 2] if k >= 2 else -np.inf
    return nbr, rank_dists


def build_knn_graph(cloud: PointCloud, k: int, factor: ConformalFactor,
                    q) -> WeightedGraph:
    """Symmetric k-NN graph: edge iff either endpoint is among the other's
    k nearest (self excluded, ties by smaller index)."""
    kind = Knn(int(k))
    q = check_resolution(q)
    n = cloud.n
    if kind.k > n - 1:
        raise ValueError(f"k must be <= n-1 = {n - 1}, got {kind.k}")
    nbr, rank_dists = knn_neighbor_table(cloud.coords, kind.k)
    src = np.repeat(np.arange(n, dtype=np.int64), kind.k)
    dst = nbr.reshape(-1)
    u = np.minimum(src, dst)
    v = np.maximum(src, dst)
    keys = np.unique(u * n + v)
    u = keys // n
    v = keys % n
    w = edge_weights(factor, q, cloud.coords[u], cloud.coords[v])
    return WeightedGraph(cloud, kind, q, factor, u, v, w,
                         knn_rank_dists=rank_dists)


def build_graph(cloud: PointCloud, kind: GraphKind, factor: ConformalFactor,
                q) -> WeightedGraph:
    if isinstance(kind, Ball):
        return build_ball_graph(cloud, kind.r, factor, q)
    if isinstance(kind, Knn):
        return build_knn_graph(cloud, kind.k, factor, q)
    raise TypeError(f"unknown graph kind: {kind!r}")


def is_subgraph(a: WeightedGraph, b: WeightedGraph) -> bool:
    """True iff every edge of ``a`` is an edge of ``b`` (same cloud)."""
    if not a.cloud.same_cloud(b.cloud):
        raise ValueError("cloud mismatch: graphs are over different point clouds")
    if a.num_edges == 0:
        return True
    return bool(np.isin(a.edge_keys(), b.edge_keys(), assume_unique=True).all())


def sandwich_radii(k: int, n: int, eps: float, mass_lower: float,
                   mass_upper: float, d: int) -> tuple[float, float]:
    """Ball radii enclosing the k-NN graph with high probability.

    For an n-point sample of a d-Ahlfors measure with ball-mass constants
    (mass_lower, mass_upper), the k-NN graph lies between the ball graphs
    of radii r_minus and r_plus except with probability at most
    ``2 n exp(-eps^2 k / 2)``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0, 1)")
    if n < 2 or k < 1:
        raise ValueError("need n >= 2 and k >= 1")
    if not 0 < mass_lower <= mass_upper:
        raise ValueError("need 0 < mass_lower <= mass_upper")
    if d < 2:
        raise ValueError("d must be >= 2")
    r_minus = ((1 - eps) * k / (mass_upper * (n - 1))) ** (1.0 / d)
    r_plus = (k / ((1 - eps) * mass_lower * (n - 1))) ** (1.0 / d)
    return r_minus, r_plus


def sandwich_failure_bound(n: int, k: int, eps: float) -> float:
    """Probability bound for the sandwich inclusions failing."""
    return 2.0 * n * math.exp(-eps * eps * k / 2.0)


def dump_edges_jsonl(graph: WeightedGraph, fp) -> None:
    """Write one ``{"u": i, "v": j, "w": weight}`` JSON line per edge,
    i < j, sorted lexicographically."""
    order = np.lexsort((graph.edge_v, graph.edge_u))
    for idx in order:
        record = {
            "u": int(graph.edge_u[idx]),
            "v": int(graph.edge_v[idx]),
            "w": float(graph.edge_w[idx]),
        }
        fp.write(json.dumps(record) + "\n")
