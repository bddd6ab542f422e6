import math

import numpy as np
import pytest

from src.errors import DegenerateInputWarning, IndexOutOfRange, InvalidInput, SelfLoop
from src.graph_construction import (
    GraphSpec,
    build_graph,
    epsilon_graph,
    from_edge_list,
    graph_summary,
    knn_graph,
    short_circuit_edges,
)
from src.schemas import GraphKind, PointCloud


@pytest.fixture
def line_cloud():
    return PointCloud(np.array([[0.0], [1.0], [3.0], [7.0]]))


class TestKnnGraph:
    def test_line_k1(self, line_cloud):
        graph = knn_graph(line_cloud, 1)
        assert graph.edge_set() == {(0, 1), (1, 2), (2, 3)}

    def test_mutual_or_rule(self):
        # 2's nearest neighbour is 1, nobody picks 2 but the edge exists anyway
        cloud = PointCloud(np.array([[0.0], [0.1], [0.5]]))
        graph = knn_graph(cloud, 1)
        assert graph.edge_set() == {(0, 1), (1, 2)}

    def test_ties_go_to_smaller_index(self):
        cloud = PointCloud(np.array([[-1.0], [0.0], [1.0]]))
        graph = knn_graph(cloud, 1)
        # node 1 is equidistant from 0 and 2 and picks 0
        assert (0, 1) in graph.edge_set()
        assert (1, 2) in graph.edge_set()  # 2 picks 1

    def test_weights_are_euclidean(self, line_cloud):
        graph = knn_graph(line_cloud, 2, weighted=True)
        points = line_cloud.points
        for (i, j), w in zip(graph.edges, graph.weights):
            assert w == pytest.approx(np.linalg.norm(points[i] - points[j]), rel=1e-12)

    def test_degree_at_least_k(self):
        rng = np.random.default_rng(3)
        cloud = PointCloud(rng.random((40, 3)))
        graph = knn_graph(cloud, 5)
        assert graph.degrees.min() >= 5

    def test_rejects_k_out_of_range(self, line_cloud):
        with pytest.raises(InvalidInput):
            knn_graph(line_cloud, 4)
        with pytest.raises(InvalidInput):
            knn_graph(line_cloud, 0)

    def test_coincident_points_warn(self):
        cloud = PointCloud(np.array([[0.0], [0.0], [1.0]]))
        with pytest.warns(DegenerateInputWarning):
            knn_graph(cloud, 1)

    def test_coincident_points_cannot_carry_weights(self):
        cloud = PointCloud(np.array([[0.0], [0.0], [1.0]]))
        with pytest.warns(DegenerateInputWarning), pytest.raises(InvalidInput, match="coincident"):
            knn_graph(cloud, 1, weighted=True)


class TestEpsilonGraph:
    def test_closed_ball(self, line_cloud):
        graph = epsilon_graph(line_cloud, 2.0)
        assert graph.edge_set() == {(0, 1), (1, 2)}

    def test_isolated_points_allowed(self, line_cloud):
        graph = epsilon_graph(line_cloud, 0.5)
        assert graph.n_edges == 0
        assert graph.n_components == 4

    def test_rejects_nonpositive_epsilon(self, line_cloud):
        with pytest.raises(InvalidInput):
            epsilon_graph(line_cloud, 0.0)


class TestFromEdgeList:
    def test_duplicates_collapse(self):
        graph = from_edge_list(3, [(0, 1), (1, 0), (1, 2)])
        assert graph.n_edges == 2

    def test_first_weight_wins(self):
        graph = from_edge_list(2, [(0, 1, 2.5), (1, 0, 9.0)])
        assert graph.weights.tolist() == [2.5]

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            from_edge_list(3, [(0, 3)])

    def test_self_loop(self):
        with pytest.raises(SelfLoop):
            from_edge_list(3, [(1, 1)])

    def test_mixed_weights_rejected(self):
        with pytest.raises(InvalidInput):
            from_edge_list(3, [(0, 1, 1.0), (1, 2)])

    def test_nonpositive_weight_rejected(self):
        with pytest.raises(InvalidInput):
            from_edge_list(2, [(0, 1, 0.0)])


class TestGraphSpec:
    def test_knn_needs_k(self):
        with pytest.raises(InvalidInput):
            GraphSpec(GraphKind.KNN)

    def test_build_graph_dispatch(self, line_cloud):
        graph = build_graph(line_cloud, GraphSpec(GraphKind.EPSILON, epsilon=4.0))
        assert graph.edge_set() == {(0, 1), (0, 2), (1, 2), (2, 3)}

    def test_external_cannot_be_built(self, line_cloud):
        with pytest.raises(InvalidInput):
            build_graph(line_cloud, GraphSpec(GraphKind.EXTERNAL))


class TestDiagnostics:
    def test_summary(self):
        graph = from_edge_list(4, [(0, 1), (1, 2)])
        summary = graph_summary(graph)
        assert summary["nodes"] == 4
        assert summary["edges"] == 2
        assert summary["min_degree"] == 0
        assert summary["max_degree"] == 2
        assert summary["mean_degree"] == pytest.approx(1.0)
        assert summary["components"] == 2

    def test_short_circuit_edges(self):
        # two sheets 0.1 apart in space but far apart along the manifold
        points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.1], [1.0, 0.1]])
        intrinsic = np.array([[0.0], [1.0], [10.0], [11.0]])
        cloud = PointCloud(points, intrinsic)
        graph = from_edge_list(4, [(0, 1), (2, 3), (0, 2)])
        assert short_circuit_edges(graph, cloud) == [(0, 2)]

    def test_short_circuit_needs_intrinsic_coords(self, line_cloud):
        graph = knn_graph(line_cloud, 1)
        with pytest.raises(InvalidInput):
            short_circuit_edges(graph, line_cloud)


def test_knn_weight_matches_distance_on_random_cloud():
    rng = np.random.default_rng(11)
    cloud = PointCloud(rng.normal(size=(30, 4)))
    graph = knn_graph(cloud, 3, weighted=True)
    lengths = np.linalg.norm(cloud.points[graph.edges[:, 0]] - cloud.points[graph.edges[:, 1]], axis=1)
    assert np.allclose(graph.weights, lengths, rtol=1e-12)
    assert all(not math.isnan(w) for w in graph.weights)


def relabelled(graph, perm):
    return {tuple(sorted((int(perm[i]), int(perm[j])))) for i, j in graph.edge_set()}


@pytest.mark.parametrize("seed", range(10))
def test_constructions_ignore_point_order(seed):
    rng = np.random.default_rng(seed)
    points = rng.random((30, 3))
    perm = rng.permutation(30)
    cloud, shuffled = PointCloud(points), PointCloud(points[perm])
    assert relabelled(knn_graph(shuffled, 4), perm) == knn_graph(cloud, 4).edge_set()
    assert relabelled(epsilon_graph(shuffled, 0.3), perm) == epsilon_graph(cloud, 0.3).edge_set()


def test_edge_sets_grow_with_k_and_epsilon():
    cloud = PointCloud(np.random.default_rng(4).random((40, 2)))
    for k in range(1, 8):
        assert knn_graph(cloud, k).edge_set() <= knn_graph(cloud, k + 1).edge_set()
    for eps in (0.05, 0.1, 0.2, 0.4):
        assert epsilon_graph(cloud, eps).edge_set() <= epsilon_graph(cloud, 2 * eps).edge_set()
