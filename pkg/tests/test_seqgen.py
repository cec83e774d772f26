import numpy as np
import pytest

from diam.graph import EdgeRecord, build
from diam.seqgen import SequenceBank, build_all, build_sequences


def star(timestamps):
    return build(len(timestamps) + 1,
                 [EdgeRecord(0, i + 1, float(t), (float(t), float(i))) for i, t in enumerate(timestamps)])


def test_most_recent_edges_kept_in_order():
    seqs = build_sequences(star([5, 1, 3]), 0, 2)
    assert seqs.x_out[:, 0].tolist() == [3.0, 5.0]
    assert seqs.out_edges.tolist() == [2, 0]


def test_empty_direction_is_zero_pad():
    seqs = build_sequences(star([5, 1, 3]), 0, 4)
    assert seqs.x_in.shape == (1, 2) and not seqs.x_in.any()
    assert seqs.in_edges.tolist() == [-1]


def test_equal_timestamps_break_ties_by_edge_id():
    seqs = build_sequences(star([2, 2, 2]), 0, 3)
    assert seqs.out_edges.tolist() == [0, 1, 2]


def test_build_all():
    g = star([1, 2])
    first = build_all(g, 2)
    assert set(first) == {0, 1, 2}
    again = build_all(g, 2)
    for v in first:
        assert np.array_equal(first[v].x_out, again[v].x_out)
        assert np.array_equal(first[v].x_in, again[v].x_in)
    with pytest.raises(IndexError):
        build_all(g, 2, [0, 3])
    with pytest.raises(ValueError):
        build_sequences(g, 0, 0)


def test_bank_agrees_with_per_node_sequences():
    rng = np.random.default_rng(0)
    recs = [EdgeRecord(int(rng.integers(8)), int(rng.integers(8)), float(rng.integers(6)),
                       tuple(rng.normal(size=3))) for _ in range(60)]
    g = build(8, recs)
    bank = SequenceBank(g, 4)
    for v in range(8):
        s = build_sequences(g, v, 4)
        x_in, x_out = bank.sequences(v)
        assert np.array_equal(x_in, s.x_in) and np.array_equal(x_out, s.x_out)
