import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diam.graph import EdgeRecord, GraphError, LabelSet, Multigraph, build


def test_parallel_edges_listed_with_multiplicity(parallel_example):
    outs = parallel_example.out_neighbors(3)
    assert [n for n, _ in outs] == [4, 4, 4]
    assert [e for _, e in outs] == [3, 4, 5]
    assert [n for n, _ in parallel_example.in_neighbors(4)] == [3, 3, 3]


def test_isolated_and_source_only_nodes(parallel_example):
    assert parallel_example.out_neighbors(5) == []
    assert parallel_example.in_neighbors(5) == []
    assert parallel_example.in_neighbors(0) == []


def test_self_loop_listed_once():
    g = build(2, [EdgeRecord(1, 1, 0.0, (1.0,))])
    assert g.out_neighbors(1) == [(1, 0)]
    assert g.in_neighbors(1) == [(1, 0)]


def test_out_of_range_node_is_rejected(parallel_example):
    with pytest.raises(IndexError):
        parallel_example.out_neighbors(6)
    with pytest.raises(IndexError):
        parallel_example.in_neighbors(-1)


def test_empty_graph():
    g = build(0, [], attr_dim=2)
    assert g.node_count == 0 and g.edge_count == 0
    assert g.attrs.shape == (0, 2)


def test_duplicate_identical_edges_kept():
    rec = EdgeRecord(0, 1, 3.0, (1.0, 2.0))
    g = build(2, [rec, rec])
    assert g.edge_count == 2
    assert g.out_neighbors(0) == [(1, 0), (1, 1)]


def test_range_and_dimension_errors_name_the_record():
    with pytest.raises(GraphError, match="edge 1"):
        build(2, [EdgeRecord(0, 1, 0.0, (1.0,)), EdgeRecord(0, 2, 0.0, (1.0,))])
    with pytest.raises(GraphError, match="edge 1"):
        build(2, [EdgeRecord(0, 1, 0.0, (1.0,)), EdgeRecord(0, 1, 0.0, (1.0, 2.0))])
    with pytest.raises(GraphError):
        Multigraph.from_arrays(2, [0], [1], [0.0, 1.0], [[1.0]])


def test_arrays_are_read_only(parallel_example):
    with pytest.raises(ValueError):
        parallel_example.src[0] = 2


def test_labelset():
    labels = LabelSet.from_mapping({3: 1, 0: 0, 7: 0})
    assert list(labels.nodes) == [0, 3, 7]
    assert list(labels.label_of([7, 3])) == [0, 1]
    assert labels.counts() == {"normal": 2, "illicit": 1}
    with pytest.raises(KeyError):
        labels.label_of([5])
    with pytest.raises(ValueError):
        LabelSet(np.array([0]), np.array([2]))


edges = st.integers(1, 12).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1),
                                   st.integers(0, 5)), max_size=40)))


@settings(max_examples=60, deadline=None)
@given(edges)
def test_csr_matches_edge_list(case):
    n, recs = case
    g = build(n, [EdgeRecord(s, d, float(t), (float(t),)) for s, d, t in recs], attr_dim=1)
    for v in range(n):
        assert g.out_neighbors(v) == [(d, i) for i, (s, d, _) in enumerate(recs) if s == v]
        assert g.in_neighbors(v) == [(s, i) for i, (s, d, _) in enumerate(recs) if d == v]
    assert g.out_degree().sum() == g.in_degree().sum() == len(recs)
