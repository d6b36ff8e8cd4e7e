"""Shortest paths: reference Dijkstra, scipy agreement, query endpoints."""

import math

import numpy as np
import pytest

from confgeo.factors import ConstantFactor, RadialAffineFactor
from confgeo.geometry import PointCloud
from confgeo.graphs import (
    Ball,
    Knn,
    WeightedGraph,
    build_ball_graph,
    build_knn_graph,
)
from confgeo.seeding import make_rng
from confgeo.shortest_path import (
    dijkstra,
    dijkstra_matrix,
    query_distance,
)


def floyd_warshall_oracle(graph):
    # independent cubic-loop oracle
    n = graph.n
    dist = [[math.inf] * n for _ in range(n)]
    for i in range(n):
        dist[i][i] = 0.0
    for u, v, w in zip(graph.edge_u, graph.edge_v, graph.edge_w):
        dist[u][v] = min(dist[u][v], w)
        dist[v][u] = min(dist[v][u], w)
    for mid in range(n):
        for i in range(n):
            dmi = dist[i][mid]
            if math.isinf(dmi):
                continue
            row_mid = dist[mid]
            row_i = dist[i]
            for j in range(n):
                cand = dmi + row_mid[j]
                if cand < row_i[j]:
                    row_i[j] = cand
    return np.asarray(dist)


def path_graph(weights):
    n = len(weights) + 1
    coords = np.cumsum([0.0] + list(weights))[:, None]
    cloud = PointCloud(coords)
    u = np.arange(n - 1)
    v = u + 1
    return WeightedGraph(cloud, Ball(r=max(weights) + 1e-9), 2,
                         ConstantFactor(1.0), u, v, np.asarray(weights))


class TestDijkstra:
    def test_chain(self):
        graph = path_graph([1.0, 2.0])
        assert np.array_equal(dijkstra(graph, 0), [0.0, 1.0, 3.0])

    def test_disconnected_vertex(self):
        cloud = PointCloud([[0.0], [1.0], [10.0]])
        graph = build_ball_graph(cloud, 1.5, ConstantFactor(1.0), 2)
        dist = dijkstra(graph, 0)
        assert dist[2] == math.inf

    def test_invalid_source(self):
        graph = path_graph([1.0])
        with pytest.raises(IndexError):
            dijkstra(graph, 5)

    def test_matches_floyd_warshall(self):
        rng = make_rng(30, "fw")
        cloud = PointCloud(rng.uniform(0, 1, size=(50, 2)))
        graph = build_ball_graph(cloud, 0.25, ConstantFactor(1.0), 2)
        oracle = floyd_warshall_oracle(graph)
        for source in (0, 13, 49):
            dist = dijkstra(graph, source)
            both = np.isfinite(dist) & np.isfinite(oracle[source])
            assert np.array_equal(np.isfinite(dist), np.isfinite(oracle[source]))
            assert np.abs(dist[both] - oracle[source][both]).max() <= 1e-12

    def test_zero_weight_edges_propagate(self):
        cloud = PointCloud([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
        graph = build_ball_graph(cloud, 1.1, ConstantFactor(1.0), 2)
        for engine in ("reference", "scipy"):
            dist = dijkstra_matrix(graph, [0], engine=engine)[0]
            assert dist[1] == 0.0
            assert dist[2] == 1.0

    def test_scipy_engine_matches_reference(self):
        rng = make_rng(31, "engines")
        cloud = PointCloud(rng.uniform(0, 1, size=(80, 2)))
        f = RadialAffineFactor(base=2.0, axis=0, slope=1.0, f_min=1.0)
        graph = build_knn_graph(cloud, 6, f, 3)
        sources = np.array([0, 17, 42])
        ref = dijkstra_matrix(graph, sources, engine="reference")
        fast = dijkstra_matrix(graph, sources, engine="scipy")
        both = np.isfinite(ref)
        assert np.array_equal(both, np.isfinite(fast))
        assert np.abs(ref[both] - fast[both]).max() <= 1e-12


class TestQueryDistance:
    def test_detour_instance(self):
        cloud = PointCloud([[0.0, 0.0], [1.0, 0.0]])
        blocked = query_distance(cloud, [0.0, 0.0], [1.0, 0.0],
                                 Ball(0.6), ConstantFactor(1.0), 2)
        assert blocked.distance == math.inf
        open_path = query_distance(cloud, [0.0, 0.0], [1.0, 0.0],
                                   Ball(1.1), ConstantFactor(1.0), 2)
        assert open_path.distance == pytest.approx(1.0, abs=1e-12)

    def test_identical_endpoints(self):
        cloud = PointCloud([[0.0, 0.0], [1.0, 0.0]])
        res = query_distance(cloud, [0.3, 0.3], [0.3, 0.3],
                             Ball(1.0), ConstantFactor(1.0), 2)
        assert res.distance == 0.0

    def test_complete_graph_metric_weights(self):
        rng = make_rng(32, "query-complete")
        cloud = PointCloud(rng.uniform(0, 1, size=(20, 2)))
        x, y = cloud.coords[3], cloud.coords[11]
        res = query_distance(cloud, x, y, Ball(5.0), ConstantFactor(1.0), 2)
        assert res.distance == pytest.approx(np.linalg.norm(x - y), abs=1e-12)

    def test_new_endpoints_are_augmented(self):
        cloud = PointCloud([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        res = query_distance(cloud, [-0.5, 0.0], [2.5, 0.0],
                             Ball(1.1), ConstantFactor(1.0), 2,
                             with_path=True)
        assert res.distance == pytest.approx(3.0, abs=1e-12)
        assert res.vertex_path == [3, 0, 1, 2, 4]

    def test_path_distance_consistency(self):
        from confgeo.graphs import edge_weight

        rng = make_rng(33, "query-path")
        cloud = PointCloud(rng.uniform(0, 1, size=(30, 2)))
        graph = build_ball_graph(cloud, 0.35, ConstantFactor(1.0), 2)
        f = ConstantFactor(1.0)
        x = rng.uniform(0, 1, 2)
        y = rng.uniform(0, 1, 2)
        res = query_distance(cloud, x, y, Ball(0.35), f, 2,
                             base_graph=graph, with_path=True)
        assert math.isfinite(res.distance)
        coords = np.vstack([cloud.coords, x[None], y[None]])
        total = sum(
            edge_weight(f, 2, coords[a], coords[b])
            for a, b in zip(res.vertex_path, res.vertex_path[1:])
        )
        assert res.distance == pytest.approx(total, abs=1e-12)
        # consecutive path vertices are graph-adjacent (within threshold)
        steps = np.linalg.norm(
            np.diff(coords[res.vertex_path], axis=0), axis=1
        )
        assert np.all(steps <= 0.35 + 1e-12)

    def test_knn_query_matches_full_rebuild(self):
        # augmented adjacency must match rebuilding the k-NN graph over
        # the cloud plus the endpoints, up to edges between base vertices
        rng = make_rng(34, "query-knn")
        coords = rng.uniform(0, 1, size=(40, 2))
        cloud = PointCloud(coords)
        x = rng.uniform(0, 1, 2)
        y = rng.uniform(0, 1, 2)
        k = 4
        res = query_distance(cloud, x, y, Knn(k), ConstantFactor(1.0), 2)

        big = PointCloud(np.vstack([coords, x[None], y[None]]))
        rebuilt = build_knn_graph(big, k, ConstantFactor(1.0), 2)
        ref = dijkstra(rebuilt, 40)[41]
        # the augmented graph keeps base-to-base edges, so it can only be
        # richer than the full rebuild
        assert res.distance <= ref + 1e-12

    def test_existing_vertex_reused(self):
        cloud = PointCloud([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        res = query_distance(cloud, [0.0, 0.0], [2.0, 0.0],
                             Ball(1.1), ConstantFactor(1.0), 2,
                             with_path=True)
        assert res.vertex_path == [0, 1, 2]

    def test_monotone_in_threshold(self):
        rng = make_rng(35, "query-monotone")
        cloud = PointCloud(rng.uniform(0, 1, size=(50, 2)))
        x, y = rng.uniform(0, 1, 2), rng.uniform(0, 1, 2)
        previous = math.inf
        for r in (0.15, 0.25, 0.4, 0.8):
            d = query_distance(cloud, x, y, Ball(r),
                               ConstantFactor(1.0), 2).distance
            assert d <= previous + 1e-12
            previous = d

    def test_monotone_in_k(self):
        rng = make_rng(36, "query-monotone-k")
        cloud = PointCloud(rng.uniform(0, 1, size=(50, 2)))
        x, y = rng.uniform(0, 1, 2), rng.uniform(0, 1, 2)
        previous = math.inf
        for k in (2, 5, 10, 20):
            d = query_distance(cloud, x, y, Knn(k),
                               ConstantFactor(1.0), 2).distance
            assert d <= previous + 1e-12
            previous = d

    def test_lower_bound_floor_times_distance(self):
        rng = make_rng(37, "query-floor")
        cloud = PointCloud(rng.uniform(0, 1, size=(40, 2)))
        f = RadialAffineFactor(base=2.0, axis=0, slope=1.0, f_min=1.0)
        for _ in range(10):
            x, y = rng.uniform(0, 1, size=(2, 2))
            d = query_distance(cloud, x, y, Ball(0.4), f, 2).distance
            if math.isfinite(d):
                assert d >= f.f_min * np.linalg.norm(x - y) - 1e-12

    def test_scaling_with_unit_factor(self):
        rng = make_rng(38, "query-scaling")
        coords = rng.uniform(0, 1, size=(30, 2))
        x, y = rng.uniform(0, 1, size=(2, 2))
        lam = 3.0
        base = query_distance(PointCloud(coords), x, y, Ball(0.4),
                              ConstantFactor(1.0), 2).distance
        scaled = query_distance(PointCloud(coords * lam), x * lam, y * lam,
                                Ball(0.4 * lam), ConstantFactor(1.0),
                                2).distance
        if math.isfinite(base):
            assert scaled == pytest.approx(lam * base, rel=1e-12)

    def test_metric_axioms_on_cloud(self):
        rng = make_rng(39, "metric")
        cloud = PointCloud(rng.uniform(0, 1, size=(35, 2)))
        graph = build_ball_graph(cloud, 0.5, ConstantFactor(1.0), 2)
        dmat = dijkstra_matrix(graph, np.arange(cloud.n))
        assert np.all(np.diag(dmat) == 0.0)
        assert np.abs(dmat - dmat.T).max() <= 1e-12
        if np.all(np.isfinite(dmat)):
            for mid in range(cloud.n):
                assert np.all(
                    dmat <= dmat[:, mid, None] + dmat[None, mid, :] + 1e-12
                )
