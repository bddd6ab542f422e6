import networkx as nx
import numpy as np
import pytest

from src.errors import GraphDisconnected, InvalidInput
from src.graph_construction import GraphSpec, from_edge_list, knn_graph
from src.isomap import ShortestPathConfig, UnreachablePolicy, floyd_warshall, isomap_dissimilarity
from src.schemas import GraphKind, PointCloud


def test_hop_counts_on_path():
    graph = from_edge_list(4, [(0, 1), (1, 2), (2, 3)])
    d = floyd_warshall(graph, ShortestPathConfig())
    assert d.d[0].tolist() == [0.0, 1.0, 2.0, 3.0]
    assert d.is_symmetric


def test_weights_ignored_unless_requested():
    graph = from_edge_list(3, [(0, 1, 5.0), (1, 2, 5.0)])
    assert floyd_warshall(graph, ShortestPathConfig()).d[0, 2] == 2.0
    assert floyd_warshall(graph, ShortestPathConfig(use_weights=True)).d[0, 2] == 10.0


def test_weighted_matches_dijkstra():
    rng = np.random.default_rng(2)
    cloud = PointCloud(rng.random((40, 2)))
    graph = knn_graph(cloud, 4, weighted=True)
    g = nx.Graph()
    g.add_nodes_from(range(40))
    for (i, j), w in zip(graph.edges, graph.weights):
        g.add_edge(int(i), int(j), weight=float(w))
    if not nx.is_connected(g):
        pytest.skip("random knn graph happened to be disconnected")

    d = floyd_warshall(graph, ShortestPathConfig(use_weights=True)).d
    lengths = dict(nx.all_pairs_dijkstra_path_length(g))
    for i in range(40):
        for j in range(40):
            assert d[i, j] == pytest.approx(lengths[i][j], rel=1e-12, abs=1e-12)


def test_use_weights_requires_weighted_graph():
    graph = from_edge_list(2, [(0, 1)])
    with pytest.raises(InvalidInput):
        floyd_warshall(graph, ShortestPathConfig(use_weights=True))


class TestUnreachablePairs:
    @pytest.fixture
    def two_components(self):
        return from_edge_list(4, [(0, 1), (2, 3)])

    def test_error_policy(self, two_components):
        with pytest.raises(GraphDisconnected):
            floyd_warshall(two_components, ShortestPathConfig())

    def test_default_sentinel_is_twice_node_count(self, two_components):
        cfg = ShortestPathConfig(unreachable_policy=UnreachablePolicy.SENTINEL)
        d = floyd_warshall(two_components, cfg).d
        assert d[0, 2] == 8.0
        assert d[0, 1] == 1.0

    def test_weighted_default_sentinel(self):
        graph = from_edge_list(4, [(0, 1, 1.5), (2, 3, 2.5)])
        cfg = ShortestPathConfig(use_weights=True, unreachable_policy="sentinel")
        assert floyd_warshall(graph, cfg).d[1, 3] == 8.0

    def test_explicit_sentinel(self, two_components):
        cfg = ShortestPathConfig(unreachable_policy=UnreachablePolicy.SENTINEL, sentinel=100.0)
        assert floyd_warshall(two_components, cfg).d[3, 0] == 100.0

    def test_sentinel_must_exceed_longest_path(self):
        graph = from_edge_list(4, [(0, 1), (1, 2)])
        cfg = ShortestPathConfig(unreachable_policy=UnreachablePolicy.SENTINEL, sentinel=2.0)
        with pytest.raises(InvalidInput, match="longest finite path"):
            floyd_warshall(graph, cfg)

    def test_sentinel_must_be_positive(self):
        with pytest.raises(InvalidInput):
            ShortestPathConfig(sentinel=0.0)


def test_isomap_dissimilarity_from_point_cloud():
    cloud = PointCloud(np.array([[0.0], [1.0], [2.0], [3.0]]))
    d = isomap_dissimilarity(cloud, GraphSpec(GraphKind.KNN, k=1, weighted=True), ShortestPathConfig(use_weights=True))
    assert d.d[0, 3] == pytest.approx(3.0)


def test_isomap_dissimilarity_needs_spec_for_clouds():
    with pytest.raises(InvalidInput):
        isomap_dissimilarity(PointCloud(np.zeros((2, 1)) + [[0.0], [1.0]]), None, ShortestPathConfig())


def random_connected_graph(seed, weighted):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    g = nx.gnp_random_graph(n, float(rng.uniform(0.05, 0.3)), seed=seed)
    components = [sorted(c) for c in nx.connected_components(g)]
    for first, second in zip(components, components[1:]):
        g.add_edge(first[0], second[0])
    for i, j in g.edges():
        g[i][j]["weight"] = float(rng.uniform(0.1, 10.0)) if weighted else 1.0
    edges = [(i, j, w) if weighted else (i, j) for i, j, w in g.edges(data="weight")]
    return g, from_edge_list(n, edges), rng


@pytest.mark.parametrize("seed", range(50))
def test_weighted_paths_match_dijkstra_from_every_source(seed):
    g, graph, _ = random_connected_graph(seed, weighted=True)
    d = floyd_warshall(graph, ShortestPathConfig(use_weights=True)).d
    for source in range(graph.n_nodes):
        lengths = nx.single_source_dijkstra_path_length(g, source)
        expected = np.array([lengths[i] for i in range(graph.n_nodes)])
        assert np.allclose(d[source], expected, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_hop_counts_match_breadth_first_search(seed):
    g, graph, _ = random_connected_graph(seed, weighted=False)
    d = floyd_warshall(graph, ShortestPathConfig()).d
    for source, lengths in nx.all_pairs_shortest_path_length(g):
        assert d[source].tolist() == [float(lengths[i]) for i in range(graph.n_nodes)]


@pytest.mark.parametrize("seed", range(20))
def test_adding_an_edge_never_lengthens_a_path(seed):
    g, graph, rng = random_connected_graph(seed, weighted=True)
    missing = [e for e in nx.non_edges(g)]
    if not missing:
        pytest.skip("complete graph")
    i, j = missing[int(rng.integers(len(missing)))]
    denser = from_edge_list(graph.n_nodes, [*(tuple(e) for e in g.edges(data="weight")), (i, j, 0.5)])
    cfg = ShortestPathConfig(use_weights=True)
    before = floyd_warshall(graph, cfg).d
    after = floyd_warshall(denser, cfg).d
    assert np.all(after <= before)
    assert after[i, j] <= 0.5


@pytest.mark.parametrize("seed", range(10))
def test_path_lengths_form_a_metric(seed):
    _, graph, _ = random_connected_graph(seed, weighted=True)
    d = floyd_warshall(graph, ShortestPathConfig(use_weights=True)).d
    assert np.array_equal(d, d.T)
    assert np.all(np.diag(d) == 0)
    through = d[:, :, None] + d[None, :, :]
    assert np.all(d[:, None, :] <= through + 1e-9 * np.max(d))
