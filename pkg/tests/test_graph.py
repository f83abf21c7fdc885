import json
from collections import deque

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sedsearch.exact import is_isomorphic
from sedsearch.graph import (
    EPSILON_ID,
    GraphFormatError,
    LabelAlphabet,
    LabeledGraph,
    graph_to_record,
    khop_neighborhood,
    longest_path_upper_bound,
    parse_graph,
    random_bfs_sample,
    random_connected_graph,
    read_graphs,
    serialize_graph,
    write_graphs,
)

from .strategies import graphs


def path(labels):
    return LabeledGraph(labels, [(i, i + 1) for i in range(len(labels) - 1)])


# -- construction and parsing ---------------------------------------------


def test_parse_two_node_path():
    g = parse_graph('{"nodes":["a","b"],"edges":[[0,1]]}')
    assert g.labels == ("a", "b")
    assert g.edges == {(0, 1)}


def test_parse_single_node():
    g = parse_graph('{"nodes":["a"],"edges":[]}')
    assert g.node_count == 1 and g.edge_count == 0


@pytest.mark.parametrize(
    "record, fragment",
    [
        ('{"nodes":["a"],"edges":[[0,0]]}', "self-loop"),
        ('{"nodes":["a","b"],"edges":[[0,1],[1,0]]}', "duplicate"),
        ('{"nodes":["a","b"],"edges":[[0,2]]}', "out of range"),
        ('{"nodes":["a",', "malformed"),
        ('{"edges":[]}', "nodes"),
        ('{"nodes":["a","b"],"edges":[]}', "disconnected"),
        ('{"nodes":[""],"edges":[]}', "label"),
    ],
)
def test_parse_errors_name_the_line(record, fragment):
    with pytest.raises(GraphFormatError) as exc:
        parse_graph(record, line=7)
    assert fragment in str(exc.value)
    assert exc.value.line == 7
    assert "line 7" in str(exc.value)


def test_disconnected_allowed_with_flag():
    g = parse_graph('{"nodes":["a","b"],"edges":[]}', allow_disconnected=True)
    assert not g.is_connected()


def test_parse_interns_labels():
    alpha = LabelAlphabet()
    parse_graph('{"nodes":["x","y","x"],"edges":[[0,1],[1,2]]}', alpha)
    assert alpha.labels == ("x", "y")
    assert alpha.id_of("y") == 1
    assert alpha.label_of(EPSILON_ID) is None


def test_read_graphs_reports_file_line(tmp_path):
    p = tmp_path / "g.jsonl"
    p.write_text('{"nodes":["a"],"edges":[]}\n\n{"nodes":["a"],"edges":[[0,0]]}\n')
    with pytest.raises(GraphFormatError) as exc:
        read_graphs(p)
    assert exc.value.line == 3


def test_file_round_trip(tmp_path, rng):
    gs = [random_connected_graph(int(rng.integers(1, 9)), 0.3, 3, rng, graph_id=f"g{i}") for i in range(20)]
    p = tmp_path / "g.jsonl"
    write_graphs(p, gs)
    back = read_graphs(p)
    assert [b.graph_id for b in back] == [g.graph_id for g in gs]
    assert all(a == b for a, b in zip(gs, back))


@given(graphs(max_nodes=7))
def test_serialize_round_trip(g):
    assert parse_graph(serialize_graph(g)) == g
    assert json.loads(serialize_graph(g)) == graph_to_record(g)


def test_edges_are_undirected():
    assert LabeledGraph(["a", "b"], [(1, 0)]) == LabeledGraph(["a", "b"], [(0, 1)])


# -- neighbourhoods ----------------------------------------------------------


def test_khop_middle_of_path_is_whole_path():
    g = path("abc")
    h = khop_neighborhood(g, 1, 1)
    assert sorted(h.meta["original_nodes"]) == [0, 1, 2]
    assert is_isomorphic(h, g)


def test_khop_zero_is_center_only():
    g = path("abc")
    h = khop_neighborhood(g, 2, 0)
    assert h.labels == ("c",) and h.edge_count == 0
    assert h.meta["original_nodes"] == [2]


def _bfs_oracle(adj_matrix, center, k):
    n = len(adj_matrix)
    dist = [-1] * n
    dist[center] = 0
    q = deque([center])
    while q:
        v = q.popleft()
        for u in range(n):
            if adj_matrix[v][u] and dist[u] < 0:
                dist[u] = dist[v] + 1
                q.append(u)
    return {v for v in range(n) if 0 <= dist[v] <= k}


def test_khop_matches_bfs_oracle(rng):
    g = random_connected_graph(100, 0.02, 3, rng)
    adj = g.adjacency_matrix()
    for center in (0, 17, 99):
        h = khop_neighborhood(g, center, 2)
        nodes = h.meta["original_nodes"]
        assert set(nodes) == _bfs_oracle(adj, center, 2)
        # induced: every edge between kept nodes survives, relabelled
        for i, u in enumerate(nodes):
            for j, v in enumerate(nodes):
                assert h.has_edge(i, j) == bool(adj[u][v]) or i == j


def test_khop_validates_arguments():
    with pytest.raises(ValueError):
        khop_neighborhood(path("ab"), 5, 1)
    with pytest.raises(ValueError):
        khop_neighborhood(path("ab"), 0, -1)


# -- random BFS sampling -----------------------------------------------------


def test_bfs_sample_single_node_graph(rng):
    g = LabeledGraph(["z"])
    assert random_bfs_sample(g, 3, 5, rng).labels == ("z",)


def test_bfs_sample_max_nodes_one(rng):
    g = random_connected_graph(10, 0.2, 3, rng)
    s = random_bfs_sample(g, 3, 1, rng)
    assert s.node_count == 1
    assert s.labels[0] == g.labels[s.meta["root"]]


def test_bfs_sample_deterministic():
    g = random_connected_graph(30, 0.1, 3, np.random.default_rng(0))
    a = random_bfs_sample(g, 3, 8, np.random.default_rng(5))
    b = random_bfs_sample(g, 3, 8, np.random.default_rng(5))
    assert a == b and a.meta["original_nodes"] == b.meta["original_nodes"]


@given(graphs(max_nodes=9), st.integers(0, 4), st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_bfs_sample_is_connected_induced_subgraph(g, depth, cap, seed):
    s = random_bfs_sample(g, depth, cap, np.random.default_rng(seed))
    assert s.is_connected()
    assert s.node_count <= cap
    nodes = s.meta["original_nodes"]
    for i, u in enumerate(nodes):
        assert s.labels[i] == g.labels[u]
        for j, v in enumerate(nodes):
            if i < j:
                assert s.has_edge(i, j) == g.has_edge(u, v)


# -- longest path bound -------------------------------------------------------


def test_longest_path_bound_examples():
    assert longest_path_upper_bound(path("aaaa")) == 3
    tri = LabeledGraph("aaa", [(0, 1), (1, 2), (0, 2)])
    assert longest_path_upper_bound(tri) == 2
    star = LabeledGraph("aaaaa", [(0, i) for i in range(1, 5)])
    assert longest_path_upper_bound(star) == 4
    assert longest_path_upper_bound(star, refine_trees=True) == 2


def test_longest_path_bound_rejects_disconnected():
    with pytest.raises(ValueError):
        longest_path_upper_bound(LabeledGraph("ab"))
