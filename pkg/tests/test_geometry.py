"""Core geometry: distances, Hausdorff, CSV round-trips."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confgeo.geometry import (
    PointCloud,
    euclidean_distance,
    hausdorff_distance,
    min_distances,
    nearest_indices,
    pairwise_distances,
)


def scalar_loop_distance(a, b):
    # independent oracle: plain coordinate loop
    total = 0.0
    for x, y in zip(a, b):
        total += (x - y) ** 2
    return math.sqrt(total)


class TestEuclideanDistance:
    def test_three_four_five(self):
        assert euclidean_distance([0, 0], [3, 4]) == 5.0

    def test_identity(self):
        assert euclidean_distance([1, 1], [1, 1]) == 0.0

    def test_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            a = rng.normal(size=10)
            b = rng.normal(size=10)
            assert euclidean_distance(a, b) == pytest.approx(
                scalar_loop_distance(a, b), abs=1e-12
            )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            euclidean_distance([1, 2], [1, 2, 3])

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            euclidean_distance([float("nan"), 0], [0, 0])


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-100, 100), min_size=3, max_size=3),
    st.lists(st.floats(-100, 100), min_size=3, max_size=3),
    st.lists(st.floats(-100, 100), min_size=3, max_size=3),
)
def test_triangle_inequality(a, b, c):
    assert euclidean_distance(a, c) <= (
        euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-12
    )


class TestPointCloud:
    def test_flat_input_is_one_dimensional(self):
        cloud = PointCloud([0.0, 1.0, 2.5])
        assert cloud.n == 3
        assert cloud.dim == 1

    def test_immutable(self):
        cloud = PointCloud([[0.0, 1.0]])
        with pytest.raises(ValueError):
            cloud.coords[0, 0] = 5.0

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValueError):
            PointCloud(np.empty((0, 2)))
        with pytest.raises(ValueError):
            PointCloud([[np.inf, 0.0]])

    def test_find_point(self):
        cloud = PointCloud([[0.0, 0.0], [1.0, 2.0]])
        assert cloud.find_point([1.0, 2.0]) == 1
        assert cloud.find_point([0.5, 0.5]) is None


class TestCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        cloud = PointCloud(rng.normal(size=(17, 3)))
        path = tmp_path / "cloud.csv"
        cloud.to_csv(path)
        text = path.read_bytes()
        assert b"\r" not in text
        loaded = PointCloud.from_csv(path)
        assert np.array_equal(loaded.coords, cloud.coords)

    def test_ragged_row_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n3.0\n", encoding="utf-8")
        with pytest.raises(ValueError, match="line 2"):
            PointCloud.from_csv(path)

    def test_bad_float_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n3.0,zap\n", encoding="utf-8")
        with pytest.raises(ValueError, match="line 2"):
            PointCloud.from_csv(path)


class TestHausdorff:
    def test_midpoint_farthest(self):
        net = PointCloud([0.0, 0.5, 1.0])
        sample = PointCloud([0.0, 1.0])
        assert hausdorff_distance(net, sample) == 0.5

    def test_identical_clouds(self):
        net = PointCloud([[0.0, 0.0], [1.0, 1.0]])
        assert hausdorff_distance(net, net) == 0.0

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(11)
        theta_net = np.linspace(0, 2 * np.pi, 200, endpoint=False)
        net = PointCloud(np.column_stack([np.cos(theta_net), np.sin(theta_net)]))
        theta_s = rng.uniform(0, 2 * np.pi, 50)
        sample = PointCloud(np.column_stack([np.cos(theta_s), np.sin(theta_s)]))
        # brute-force double loop
        best = 0.0
        for p in net.coords:
            closest = min(scalar_loop_distance(p, s) for s in sample.coords)
            best = max(best, closest)
        assert hausdorff_distance(net, sample) == pytest.approx(best, abs=0)

    def test_zero_when_net_subset_of_sample(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(20, 2))
        net = PointCloud(pts[:10])
        sample = PointCloud(pts)
        assert hausdorff_distance(net, sample) == 0.0

    def test_monotone_in_sample(self):
        rng = np.random.default_rng(6)
        net = PointCloud(rng.normal(size=(40, 2)))
        pts = rng.normal(size=(30, 2))
        small = PointCloud(pts[:10])
        large = PointCloud(pts)
        assert hausdorff_distance(net, large) <= hausdorff_distance(net, small)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            hausdorff_distance(PointCloud([[0.0, 0.0]]), PointCloud([0.0]))


def test_min_distances_independent_of_blocking(monkeypatch):
    rng = np.random.default_rng(9)
    queries = rng.normal(size=(100, 3))
    targets = rng.normal(size=(37, 3))
    baseline = min_distances(queries, targets)
    import confgeo.geometry as geometry

    monkeypatch.setattr(geometry, "BLOCK_ROWS", 7)
    assert np.array_equal(geometry.min_distances(queries, targets), baseline)


def test_nearest_indices_breaks_ties_by_index():
    targets = np.array([[1.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    idx = nearest_indices(np.array([[0.0, 0.0]]), targets)
    assert idx[0] == 0


def test_pairwise_matches_euclidean():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(6, 4))
    b = rng.normal(size=(5, 4))
    mat = pairwise_distances(a, b)
    for i in range(6):
        for j in range(5):
            assert mat[i, j] == pytest.approx(
                euclidean_distance(a[i], b[j]), abs=1e-12
            )
