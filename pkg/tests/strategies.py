"""Hypothesis strategies for small labeled graphs."""

from hypothesis import strategies as st

from sedsearch.graph import LabeledGraph


@st.composite
def graphs(draw, min_nodes=1, max_nodes=5, labels="abc", connected=True):
    n = draw(st.integers(min_nodes, max_nodes))
    lab = draw(st.lists(st.sampled_from(labels), min_size=n, max_size=n))
    edges = set()
    if connected:
        for v in range(1, n):
            edges.add((draw(st.integers(0, v - 1)), v))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    if pairs:
        extra = draw(st.lists(st.sampled_from(pairs), max_size=len(pairs)))
        edges.update(extra)
    return LabeledGraph(lab, edges)
