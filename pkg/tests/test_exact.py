import math

import numpy as np
import pytest
from hypothesis import given, settings

from sedsearch.exact import (
    DistanceBounds,
    DistancePolicy,
    MappingError,
    Mode,
    NodeMapping,
    check_witness,
    closest_subgraph,
    exact_ged,
    exact_sed,
    ged_under_mapping,
    is_isomorphic,
    is_subgraph_isomorphic,
    label_multiset_lower_bound,
    subgraph_embedding,
    verify_sed_triangle,
)
from sedsearch.exact._backend import compiled_bnb_search
from sedsearch.exact.brute import all_mappings, all_subgraphs, brute_force_ged, brute_force_sed
from sedsearch.exact.search import assignment_order
from sedsearch.graph import LabeledGraph, random_connected_graph

from .strategies import graphs

needs_compiled = pytest.mark.skipif(compiled_bnb_search is None, reason="compiled kernel not built")


def path(labels):
    return LabeledGraph(labels, [(i, i + 1) for i in range(len(labels) - 1)])


def triangle(labels):
    return LabeledGraph(labels, [(0, 1), (1, 2), (0, 2)])


def rand_graph(rng, lo, hi, labels=3, p=0.3):
    return random_connected_graph(int(rng.integers(lo, hi + 1)), p, labels, rng)


# -- policy and mapping cost ---------------------------------------------------


def test_identity_mapping_between_isomorphic_triangles_costs_zero():
    g = triangle("abc")
    pi = NodeMapping.from_assignment([0, 1, 2], 3)
    assert ged_under_mapping(g, g, pi, DistancePolicy.ged()) == 0


def test_relabel_single_node_costs_one():
    pi = NodeMapping.from_assignment([0], 1)
    assert ged_under_mapping(LabeledGraph("a"), LabeledGraph("b"), pi, DistancePolicy.ged()) == 1


def test_path_onto_single_node_costs_two():
    pi = NodeMapping.from_assignment([0, -1], 1)
    assert ged_under_mapping(path("ab"), LabeledGraph("a"), pi, DistancePolicy.ged()) == 2


def test_sed_mode_ignores_insertions():
    pi = NodeMapping.from_assignment([0], 2)
    assert ged_under_mapping(LabeledGraph("a"), path("ab"), pi, DistancePolicy.sed()) == 0
    assert ged_under_mapping(LabeledGraph("a"), path("ab"), pi, DistancePolicy.ged()) == 2


def test_dummy_to_dummy_is_rejected():
    bad = NodeMapping(((0, 0), (None, None)))
    with pytest.raises(MappingError):
        ged_under_mapping(LabeledGraph("a"), LabeledGraph("a"), bad, DistancePolicy.ged())
    with pytest.raises(MappingError):
        DistancePolicy.ged().node_cost(None, None)


def test_non_bijective_mapping_is_rejected():
    bad = NodeMapping(((0, 0), (1, 0)))
    with pytest.raises(MappingError):
        ged_under_mapping(path("ab"), path("ab"), bad, DistancePolicy.ged())


def test_custom_sed_policy_validates_replacement_cost():
    def d(a, b):
        if a == b:
            return 0.0
        return 3.0 if b is not None and a is not None else 1.0

    with pytest.raises(ValueError, match="costs more than deleting"):
        DistancePolicy(Mode.SED, d, labels=["a", "b"])
    DistancePolicy(Mode.GED, d, labels=["a", "b"])  # fine for GED


def test_distance_bounds_invariants():
    with pytest.raises(ValueError):
        DistanceBounds(2.0, 1.0)
    b = DistanceBounds(1.0, 3.0)
    assert not b.exact and b.midpoint == 2.0


# -- exact GED -----------------------------------------------------------------


def test_ged_isomorphic_graphs_zero_with_isomorphism_witness():
    g = path("abca")
    h = g.relabeled([3, 1, 0, 2])
    r = exact_ged(g, h)
    assert r.complete and r.value == 0
    fwd = r.mapping.forward()
    assert all(h.labels[fwd[v]] == g.labels[v] for v in range(4))
    assert all(h.has_edge(fwd[u], fwd[v]) for u, v in g.edges)


def test_ged_triangle_vs_path():
    r = exact_ged(triangle("aaa"), path("aaa"))
    assert r.complete and r.value == 1


def test_ged_matches_mapping_enumeration_on_200_pairs():
    rng = np.random.default_rng(1)
    for _ in range(200):
        a, b = rand_graph(rng, 1, 5), rand_graph(rng, 1, 5)
        r = exact_ged(a, b)
        assert r.complete
        assert r.value == brute_force_ged(a, b)
        assert check_witness(a, b, r, DistancePolicy.ged())


def test_node_cap_guard():
    big = path("a" * 11)
    with pytest.raises(ValueError, match="node_cap"):
        exact_ged(big, big)
    assert exact_ged(big, big, node_cap=None).value == 0


def test_budget_truncation_keeps_admissible_bounds():
    rng = np.random.default_rng(2)
    seen_incomplete = 0
    for _ in range(30):
        a, b = rand_graph(rng, 7, 8, labels=2), rand_graph(rng, 7, 8, labels=2)
        full = exact_ged(a, b)
        cut = exact_ged(a, b, budget=20)
        assert cut.lower <= full.value <= cut.upper
        seen_incomplete += not cut.complete
        if cut.mapping is not None:
            assert check_witness(a, b, cut, DistancePolicy.ged())
    assert seen_incomplete > 0


def test_incumbent_trace_is_non_increasing():
    rng = np.random.default_rng(3)
    for _ in range(30):
        r = exact_sed(rand_graph(rng, 4, 7), rand_graph(rng, 6, 10))
        assert all(x >= y for x, y in zip(r.trace, r.trace[1:]))
        assert r.trace[-1] == r.upper


def test_cutoff_reports_no_mapping_when_nothing_cheaper():
    g, h = path("ab"), path("ba")
    r = exact_ged(g, triangle("aaa"), cutoff=0.5)
    assert r.mapping is None and r.lower >= 0.5
    r = exact_ged(g, h, cutoff=10)
    assert r.value == 0


def test_custom_costs_match_mapping_enumeration():
    costs = {("a", "b"): 0.5, ("b", "a"): 0.5, ("a", "c"): 2.0, ("c", "a"): 2.0, ("b", "c"): 1.5, ("c", "b"): 1.5}

    def d(x, y):
        if x == y:
            return 0.0
        if x is None or y is None:
            return 2.0
        return costs[(x, y)]

    policy = DistancePolicy(Mode.GED, d, edge_cost=0.75)
    rng = np.random.default_rng(4)
    for _ in range(60):
        a, b = rand_graph(rng, 1, 4), rand_graph(rng, 1, 4)
        r = exact_ged(a, b, policy)
        assert r.value == pytest.approx(brute_force_ged(a, b, policy), abs=1e-9)


# -- exact SED -----------------------------------------------------------------


def test_sed_single_node_in_path_is_zero():
    assert exact_sed(LabeledGraph("a"), path("ab")).value == 0


def test_sed_path_into_single_node_is_two():
    assert exact_sed(path("ab"), LabeledGraph("a")).value == 2


def test_sed_equals_min_over_subgraphs_on_200_pairs():
    rng = np.random.default_rng(5)
    for _ in range(200):
        q, t = rand_graph(rng, 1, 4), rand_graph(rng, 1, 6)
        r = exact_sed(q, t)
        assert r.complete
        assert r.value == brute_force_sed(q, t, lambda a, b: exact_ged(a, b).value)


def test_sed_brute_force_with_enumerated_ged_on_tiny_pairs():
    rng = np.random.default_rng(6)
    for _ in range(40):
        q, t = rand_graph(rng, 1, 3), rand_graph(rng, 1, 4)
        assert exact_sed(q, t).value == brute_force_sed(q, t)


def test_all_subgraphs_counts():
    # path a-b: {}, {a}, {b}, {a,b} without edge, {a,b} with edge
    assert len(list(all_subgraphs(path("ab")))) == 5
    # a padded bijection set for n1 = n2 = 2 has 7 members
    assert len(list(all_mappings(2, 2))) == 7


def test_closest_subgraph_witness_properties():
    rng = np.random.default_rng(7)
    for _ in range(100):
        q, t = rand_graph(rng, 2, 5), rand_graph(rng, 3, 8)
        r = exact_sed(q, t)
        s = closest_subgraph(q, t, r.mapping)
        nodes = s.meta["original_nodes"]
        # a subgraph of the target
        for i, j in s.edges:
            assert t.has_edge(nodes[i], nodes[j])
        assert all(s.labels[i] == t.labels[v] for i, v in enumerate(nodes))
        # GED to it equals the SED, and its shape embeds into the query
        assert exact_ged(q, s).value == r.value
        assert subgraph_embedding(s, q, ignore_labels=True) is not None


def test_label_multiset_bound_examples():
    g = path("abc")
    assert label_multiset_lower_bound(g, g, DistancePolicy.ged()) == 0
    q, t = LabeledGraph("aa"), LabeledGraph("ab")
    assert label_multiset_lower_bound(q, t, DistancePolicy.sed()) == 1


def test_label_multiset_bound_never_exceeds_exact_500():
    rng = np.random.default_rng(8)
    for _ in range(500):
        a, b = rand_graph(rng, 1, 6), rand_graph(rng, 1, 7)
        assert label_multiset_lower_bound(a, b, DistancePolicy.sed()) <= exact_sed(a, b).value
        assert label_multiset_lower_bound(a, b, DistancePolicy.ged()) <= exact_ged(a, b).value


def test_verify_sed_triangle_examples():
    g = path("abc")
    assert verify_sed_triangle(g, g, g) is True
    g1, g2, g3 = LabeledGraph("a"), path("ab"), path("abc")
    assert verify_sed_triangle(g1, g2, g3) is True


def test_verify_sed_triangle_inconclusive_on_tiny_budget():
    rng = np.random.default_rng(9)
    gs = [rand_graph(rng, 8, 9, labels=2) for _ in range(3)]
    assert verify_sed_triangle(*gs, budget=3) is None


# -- properties ------------------------------------------------------------------


@settings(max_examples=80)
@given(graphs(max_nodes=5), graphs(max_nodes=5))
def test_ged_symmetric_nonnegative_identity(a, b):
    ab, ba = exact_ged(a, b).value, exact_ged(b, a).value
    assert ab == ba >= 0
    assert (ab == 0) == is_isomorphic(a, b)


@settings(max_examples=80)
@given(graphs(max_nodes=4), graphs(max_nodes=6))
def test_sed_zero_iff_subgraph_isomorphic(q, t):
    assert (exact_sed(q, t).value == 0) == is_subgraph_isomorphic(q, t)


@settings(max_examples=60)
@given(graphs(max_nodes=4), graphs(max_nodes=4), graphs(max_nodes=4))
def test_edit_distance_triangle_inequalities(a, b, c):
    assert exact_sed(a, c).value <= exact_sed(a, b).value + exact_sed(b, c).value
    assert exact_ged(a, c).value <= exact_ged(a, b).value + exact_ged(b, c).value


@given(graphs(max_nodes=6), graphs(max_nodes=6))
def test_sed_never_exceeds_ged(a, b):
    assert exact_sed(a, b).value <= exact_ged(a, b).value


def test_assignment_order_starts_at_max_degree_and_grows_connected():
    g = LabeledGraph("abcde", [(0, 1), (1, 2), (1, 3), (3, 4)])
    order = assignment_order(g)
    assert order[0] == 1
    placed = {order[0]}
    for v in order[1:]:
        assert any(u in placed for u in g.adjacency[v])
        placed.add(v)


# -- backends ----------------------------------------------------------------------


@needs_compiled
def test_compiled_and_python_kernels_agree():
    rng = np.random.default_rng(10)
    for _ in range(60):
        a, b = rand_graph(rng, 2, 7), rand_graph(rng, 2, 9)
        for policy in (DistancePolicy.ged(), DistancePolicy.sed()):
            for budget in (50, 1_000_000):
                r1 = exact_ged(a, b, policy, budget=budget, backend="python")
                r2 = exact_ged(a, b, policy, budget=budget, backend="cython")
                assert (r1.lower, r1.upper, r1.expansions, r1.complete) == (r2.lower, r2.upper, r2.expansions, r2.complete)
                assert r1.trace == r2.trace
                assert r1.mapping == r2.mapping


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        exact_ged(LabeledGraph("a"), LabeledGraph("a"), backend="fortran")


def test_budget_must_be_positive():
    with pytest.raises(ValueError):
        exact_ged(LabeledGraph("a"), LabeledGraph("a"), budget=0)


def test_infinite_cutoff_is_default():
    r = exact_sed(LabeledGraph("a"), LabeledGraph("b"))
    assert r.value == 1 and not math.isinf(r.upper)
